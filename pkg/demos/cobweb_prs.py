"""Probabilistic reachable sets of the Cobweb price model at the plotted times.

Run:  python demos/cobweb_prs.py   (certifying the noise proxy takes ~15 s)
"""
from stochreach.experiments import cobweb_experiment

bundle = cobweb_experiment(seed=0)
print(f"certified noise proxy sigma = {bundle.summary['sigma']:.5f}\n")
for s in bundle.documents["geometry.json"]["sets"]:
    p, q = s["center"]
    print(f"t={s['t']}: centre ({p:.4f}, {q:.4f})  DRS radius {s['drs_radius']:.5f}  "
          f"PRS radius {s['prs_radius']:.5f}")
print()
for name, ok in bundle.checks.items():
    print(f"{name:32s} {'ok' if ok else 'FAILED'}")
