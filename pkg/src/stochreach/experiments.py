"""End-to-end pipelines: bounds, reachable sets, ensembles and coverage for each preset."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .deviation import bound_table, build_schedule, expectation_bound, amgf_bound
from .drs import BallSet, IntervalBox, interval_reach, natural_inclusion
from .montecarlo import empirical_quantile_radius, line_errors, run_ensemble
from .presets import (certified_proxy_along, cobweb_lipschitz, get_preset, linear_preset,
                      nominal_for, uav_lipschitz_fn)
from .prs import (ProbabilisticReachSet, boundary_points, coverage_check, coverage_threshold,
                  membership, propagate_lipschitz_prs)

COVERAGE_HEADER = ["t", "inflation", "coverage", "violations", "n_traj", "threshold", "passed"]


@dataclass
class ReportBundle:
    """Tables (header plus rows) and JSON documents produced by one run."""

    name: str
    tables: dict = field(default_factory=dict)
    documents: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def add_table(self, filename, header, rows):
        self.tables[filename] = (list(header), [list(r) for r in rows])

    @property
    def passed(self):
        return all(self.checks.values())


_PROXY_CACHE = {}


def variance_proxy(preset, n_samples=None, seed=0):
    """Proxy ``sigma`` in the preset's norm: exact when available, else certified along the nominal."""
    exact = preset.noise.closed_form_sigma(preset.norm)
    if exact is not None:
        return exact
    n_samples = n_samples or preset.params.get("proxy_samples", 100_000)
    key = (preset.name, json.dumps(preset.params, sort_keys=True), preset.horizon, n_samples, seed)
    if key not in _PROXY_CACHE:
        _PROXY_CACHE[key] = certified_proxy_along(preset, nominal_for(preset), n_samples, seed)
    return _PROXY_CACHE[key]


def lipschitz_fn_for(preset, lipschitz_inflation=None, seed=0):
    """``(t, center, radius) -> L_t`` valid on the ball of that radius."""
    if preset.name == "cobweb":
        b, c = preset.params["b"], preset.params["c"]
        # smallest quantity admitted by the region gives the largest slope
        return lambda t, center, radius: cobweb_lipschitz(b, c, center[1] - radius)
    if preset.name == "uav":
        return uav_lipschitz_fn(preset, lipschitz_inflation, seed=seed)
    return lambda t, center, radius: preset.model.lipschitz_at(t)


def reach_sets(preset, sigma=None, lipschitz_inflation=None, seed=0):
    """Nominal trajectory and the jointly propagated Lipschitz DRS / PRS sequence."""
    nominal = nominal_for(preset)
    sigma = variance_proxy(preset, seed=seed) if sigma is None else sigma
    res = propagate_lipschitz_prs(nominal, preset.r1, preset.r2, preset.rho,
                                  lipschitz_fn_for(preset, lipschitz_inflation, seed),
                                  sigma * sigma, preset.dim, preset.delta, preset.epsilon,
                                  preset.norm)
    return nominal, res


def _coverage_rows(rows, prs_seq):
    return [[r.t, p.inflation, r.coverage, r.violations, r.n_traj, r.threshold, r.passed]
            for r, p in zip(rows, prs_seq)]


def _r_squared(x, y):
    return float(linregress(x, y).rvalue ** 2)


def linear_experiment(preset=None, seed=0, scaling_samples=None, full=False, n_export=50):
    pre = preset or linear_preset()
    p = pre.params
    T, n, delta, eps = pre.horizon, pre.dim, pre.delta, pre.epsilon
    sigma2 = pre.noise.closed_form_sigma(pre.norm) ** 2
    sched = build_schedule(pre.model.lipschitz_at(0), sigma2, T)
    out = ReportBundle("linear")
    out.add_table("bounds.csv", ["t", "Psi", "r_amgf", "r_markov", "r_worstcase"],
                  bound_table(sched, n, delta, eps))

    ens = run_ensemble(pre.model, pre.noise, pre.initial, T, pre.n_traj, seed)
    cov, dev_rows = [], []
    worst_violations = 0
    exp_ok = True
    for t in range(T + 1):
        d = ens.deviations(t)
        r = amgf_bound(sched, n, delta, eps, t)
        v = int(np.sum(d > r))
        worst_violations = max(worst_violations, v)
        rate = v / len(d)
        limit = delta + 3.0 * math.sqrt(delta / len(d))
        sq = d * d
        mean_sq = float(sq.mean())
        se = float(sq.std(ddof=1) / math.sqrt(len(d))) if t else 0.0
        bound = expectation_bound(sched, n, t)
        exp_ok &= mean_sq <= bound + 3.0 * se
        cov.append([t, r, float(d.max()), v, rate, limit, rate <= limit, mean_sq, se, bound])
    for i in range(min(n_export, ens.n_traj)):
        for t in range(T + 1):
            dev_rows.append([i, t, float(ens.deviations(t)[i])])
    out.add_table("coverage.csv", ["t", "r_amgf", "max_deviation", "violations", "violation_rate",
                                   "rate_limit", "passed", "mean_sq_deviation", "mean_sq_stderr",
                                   "n_Psi"], cov)
    out.add_table("deviations.csv", ["trajectory", "t", "deviation"], dev_rows)

    sc = p["scaling"]
    t_fix = sc["t"]
    deltas = sc["full_deltas"] if full else sc["deltas"]
    delta_n = sc["full_delta_for_dims"] if full else sc["delta_for_dims"]
    N = scaling_samples or (sc["full_n_traj"] if full else sc["n_traj"])
    q_rows = []
    fits = []
    for sweep, dims, dlist in (("delta", [n], deltas), ("n", sc["dims"], [delta_n])):
        xs, bound_r2, hat_r2 = [], [], []
        for dim in dims:
            pd = linear_preset(dim=dim)
            s = build_schedule(pd.model.lipschitz_at(0), pd.noise.closed_form_sigma() ** 2, t_fix)
            e = run_ensemble(pd.model, pd.noise, pd.initial, t_fix, N, seed, record=[t_fix])
            d = e.deviations(t_fix)
            for dl in dlist:
                rb = amgf_bound(s, dim, dl, eps, t_fix)
                rh = empirical_quantile_radius(d, dl)
                q_rows.append([sweep, dim, dl, t_fix, N, rb * rb, rh * rh])
                xs.append(math.log(1.0 / dl) if sweep == "delta" else dim)
                bound_r2.append(rb * rb)
                hat_r2.append(rh * rh)
        for source, ys in (("bound", bound_r2), ("monte_carlo", hat_r2)):
            fit = linregress(xs, ys)
            fits.append([sweep, source, fit.slope, fit.intercept, fit.rvalue ** 2])
    out.add_table("quantiles.csv", ["sweep", "n", "delta", "t", "n_traj", "r2_bound", "r2_hat"],
                  q_rows)
    out.add_table("scaling_fit.csv", ["sweep", "source", "slope", "intercept", "r_squared"], fits)

    out.summary = {"max_violations": worst_violations, "n_traj": pre.n_traj, "horizon": T,
                   "scaling_samples": N,
                   "scaling_r_squared": {f"{f[0]}_{f[1]}": f[4] for f in fits}}
    out.checks = {"zero_violations": worst_violations == 0,
                  "expectation_bound": bool(exp_ok),
                  "scaling_delta": all(f[4] >= 0.95 for f in fits if f[0] == "delta"),
                  "scaling_n": all(f[4] >= 0.95 for f in fits if f[0] == "n")}
    return out


def _prs_table(nominal, res, labels):
    rows = []
    sched = res.schedule
    for t, prs in enumerate(res.sets):
        L = res.lipschitz[t] if t < len(res.lipschitz) else float("nan")
        rows.append([t, *nominal[t], L, res.drs_radius[t], sched.Psi[t], prs.inflation,
                     res.drs_radius[t] + prs.inflation])
    return ["t", *labels, "lipschitz", "drs_radius", "Psi", "inflation", "total_radius"], rows


def cobweb_experiment(preset=None, seed=0, proxy_samples=None, n_boundary=128):
    pre = preset or get_preset("cobweb")
    T = pre.horizon
    sigma = variance_proxy(pre, proxy_samples, seed)
    nominal, res = reach_sets(pre, sigma, seed=seed)
    out = ReportBundle("cobweb")
    header, rows = _prs_table(nominal, res, ["center_p", "center_q"])
    out.add_table("prs.csv", header, rows)

    ens = run_ensemble(pre.model, pre.noise, pre.initial, T, pre.n_traj, seed,
                       nominal_x0=pre.nominal_x0)
    cov = coverage_check(res.sets[1:], ens)
    cov_rows = _coverage_rows(cov, res.sets[1:])
    plot_times = pre.params["plot_times"]
    plot_violations = sum(r.violations for r in cov if r.t in plot_times)

    # noiseless trajectories from the sampled initial states against both DRS backends
    drs_ball_bad = 0
    for t in range(T + 1):
        ball = BallSet(nominal[t], res.drs_radius[t])
        drs_ball_bad += int(np.sum(~ball.contains(ens.associated[:, t], tol=1e-12)))
    boxes = interval_reach(natural_inclusion(pre.model), pre.initial, None, T)
    drs_box_bad = 0
    box_rows = []
    for t, box in enumerate(boxes):
        drs_box_bad += int(np.sum(~box.contains(ens.associated[:, t])))
        box_rows.append([t, *box.lower, *box.upper])
    out.add_table("drs_interval.csv", ["t", "lower_p", "lower_q", "upper_p", "upper_q"], box_rows)

    # the interval DRS inflated by the same deviation radius is a second valid set
    box_sets = [ProbabilisticReachSet(boxes[t], res.sets[t].inflation, pre.delta, t)
                for t in range(1, T + 1)]
    box_cov = coverage_check(box_sets, ens)
    out.add_table("coverage.csv", ["backend", *COVERAGE_HEADER],
                  [["lipschitz", *r] for r in cov_rows]
                  + [["interval", *r] for r in _coverage_rows(box_cov, box_sets)])

    geom = {"sigma": sigma, "plot_times": plot_times, "sets": []}
    for t in plot_times:
        drs = ProbabilisticReachSet(res.sets[t].base, 0.0, pre.delta, t)
        geom["sets"].append({
            "t": t,
            "center": nominal[t].tolist(),
            "drs_radius": float(res.drs_radius[t]),
            "prs_radius": float(res.drs_radius[t] + res.sets[t].inflation),
            "prs_boundary": boundary_points(res.sets[t], (0, 1), n_boundary).tolist(),
            "drs_boundary": boundary_points(drs, (0, 1), n_boundary).tolist(),
            "states": ens.states_at(t).tolist(),
        })
    out.documents["geometry.json"] = geom
    out.summary = {"sigma": sigma, "plot_time_violations": plot_violations,
                   "drs_ball_violations": drs_ball_bad, "drs_interval_violations": drs_box_bad,
                   "n_traj": pre.n_traj}
    out.checks = {"zero_violations_at_plot_times": plot_violations == 0,
                  "coverage": all(r.passed for r in cov),
                  "interval_coverage": all(r.passed for r in box_cov),
                  "drs_lipschitz_sound": drs_ball_bad == 0,
                  "drs_interval_sound": drs_box_bad == 0}
    return out


def uav_line_distance(states, params):
    e_py, e_h = line_errors(states, params["line_origin"], params["line_direction"])
    return e_py, e_h, np.hypot(e_py, e_h)


def uav_experiment(preset=None, seed=0, lipschitz_inflation=None, n_boundary=64, every=10):
    pre = preset or get_preset("uav")
    T = pre.horizon
    p = pre.params
    sigma = variance_proxy(pre)
    nominal, res = reach_sets(pre, sigma, lipschitz_inflation, seed)
    out = ReportBundle("uav")
    e_py, e_h, dist = uav_line_distance(nominal, p)
    out.add_table("nominal.csv", ["t", "px", "py", "pz", "theta", "cross_track", "altitude_error",
                                  "line_distance"],
                  [[t, *nominal[t], e_py[t], e_h[t], dist[t]] for t in range(T + 1)])
    header, rows = _prs_table(nominal, res, ["px", "py", "pz", "theta"])
    out.add_table("prs.csv", header, rows)

    ens = run_ensemble(pre.model, pre.noise, pre.initial, T, pre.n_traj, seed)
    cov = coverage_check(res.sets[1:], ens)
    out.add_table("coverage.csv", COVERAGE_HEADER, _coverage_rows(cov, res.sets[1:]))
    violations = sum(r.violations for r in cov)

    k = min(p["export_trajectories"], ens.n_traj)
    geom = {"sigma": sigma, "weights": p["weights"], "line_origin": p["line_origin"],
            "line_direction": p["line_direction"], "nominal": nominal[:, :3].tolist(),
            "states": ens.states[:k, :, :3].tolist(), "sets": []}
    for t in range(every, T + 1, every):
        geom["sets"].append({
            "t": t,
            "radius": float(res.drs_radius[t] + res.sets[t].inflation),
            "boundary_xy": boundary_points(res.sets[t], (0, 1), n_boundary).tolist(),
            "boundary_xyz": boundary_points(res.sets[t], (0, 1, 2), n_boundary).tolist(),
        })
    out.documents["geometry.json"] = geom
    # sampled deviations give a sense of how loose the certified radius is
    max_dev = [float(np.max(pre.norm(ens.states[:, t] - ens.associated[:, t]))) for t in range(T + 1)]
    converging = bool(np.all(np.diff(dist[50:]) < 0))
    out.summary = {"sigma": sigma, "violations": violations, "n_traj": pre.n_traj,
                   "final_line_distance": float(dist[-1]),
                   "final_inflation": float(res.sets[-1].inflation),
                   "final_max_sampled_deviation": max_dev[-1],
                   "mean_lipschitz": float(np.mean(res.lipschitz))}
    out.checks = {"converges_after_50": converging, "zero_violations": violations == 0,
                  "coverage": all(r.passed for r in cov)}
    return out


def reproduce_experiment(name, seed=0, **options):
    """Run one of the named experiments and return its report bundle."""
    runners = {"linear": linear_experiment, "cobweb": cobweb_experiment, "uav": uav_experiment}
    if name not in runners:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(runners)}")
    return runners[name](seed=seed, **options)
