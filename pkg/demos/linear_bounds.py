"""Deviation radii for the scalar-gain linear system against a sampled ensemble.

Run:  python demos/linear_bounds.py
"""
import numpy as np

from stochreach.deviation import amgf_bound, build_schedule, markov_bound, worstcase_bound
from stochreach.montecarlo import empirical_quantile_radius, run_ensemble
from stochreach.presets import get_preset

pre = get_preset("linear")
sched = build_schedule(pre.model.lipschitz_at(0), pre.noise.closed_form_sigma() ** 2, pre.horizon)
ens = run_ensemble(pre.model, pre.noise, pre.initial, pre.horizon, pre.n_traj, seed=0)

n, delta, eps = pre.dim, pre.delta, pre.epsilon
print(f"{'t':>3} {'r_amgf':>9} {'r_markov':>9} {'r_worst':>9} {'max dev':>9} {'r_hat':>9}")
for t in range(1, pre.horizon + 1):
    d = ens.deviations(t)
    print(f"{t:>3} {amgf_bound(sched, n, delta, eps, t):9.3f} {markov_bound(sched, n, delta, t):9.3f} "
          f"{worstcase_bound(sched, n, delta, eps, t):9.3f} {d.max():9.3f} "
          f"{empirical_quantile_radius(d, delta):9.3f}")

violations = sum(int(np.sum(ens.deviations(t) > amgf_bound(sched, n, delta, eps, t)))
                 for t in range(pre.horizon + 1))
print(f"\n{ens.n_traj} trajectories, {violations} exceed the radius at some step")
