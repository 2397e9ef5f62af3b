"""Closed-loop UAV line following and its probabilistic tube in the weighted norm.

Run:  python demos/uav_tube.py [lipschitz_inflation]
The sampled Lipschitz constants are multiplied by the safety factor (default 1.1);
because the loop is not contractive in this norm the certified radius grows
geometrically, which the last column makes visible.
"""
import sys

from stochreach.experiments import uav_experiment

inflation = float(sys.argv[1]) if len(sys.argv) > 1 else None
bundle = uav_experiment(seed=0, lipschitz_inflation=inflation)
_, nominal = bundle.tables["nominal.csv"]
_, prs = bundle.tables["prs.csv"]
print(f"{'t':>4} {'line dist':>10} {'L_t':>7} {'PRS radius':>12}")
for t in range(0, len(nominal), 20):
    L = prs[t][5]
    print(f"{t:>4} {nominal[t][7]:10.4f} {L:7.4f} {prs[t][-1]:12.4g}")
s = bundle.summary
print(f"\nmax sampled deviation at the horizon {s['final_max_sampled_deviation']:.3f}, "
      f"violations {s['violations']} of {s['n_traj']}")
