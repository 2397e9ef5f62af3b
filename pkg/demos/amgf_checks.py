"""Averaged moment generating function: evaluation and the Monte Carlo lemma checks.

Run:  python demos/amgf_checks.py
"""
import numpy as np

from stochreach.amgf import amgf, amgf_quadrature_oracle, run_lemma_suite

for n in (1, 2, 3, 5, 10):
    vals = [amgf(n, 1.0, r) for r in (0.5, 2.0, 8.0)]
    print(f"n={n:>2}: Phi(0.5)={vals[0]:.6f}  Phi(2)={vals[1]:.6f}  Phi(8)={vals[2]:.6g}")
print(f"quadrature oracle, n=4, r=8: {amgf_quadrature_oracle(4, 1.0, 8.0):.6g}\n")

report = run_lemma_suite(n_samples=100_000)
for c in report["checks"]:
    print(f"{c['name']:42s} {'ok' if c['passed'] else 'FAILED'}  "
          f"estimate={np.format_float_scientific(c['estimate'], 3)}  limit={c['limit']:.4g}")
