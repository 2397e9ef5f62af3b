"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric failure
(divergence, interval domain error, non-sub-Gaussian noise), 4 a check
failed in ``--check`` mode.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .amgf import SeriesDivergence, run_lemma_suite
from .deviation import bound_table, build_schedule
from .drs import InclusionError, IntervalBox, interval_reach, natural_inclusion
from .experiments import (COVERAGE_HEADER, ReportBundle, reach_sets, reproduce_experiment,
                          variance_proxy)
from .interval import DomainError
from .io import dump_json, emit_results, write_csv
from .model import DivergenceError, NotSubGaussianError
from .montecarlo import run_ensemble
from .presets import PRESET_NAMES, ConfigError, get_preset, system_from_json
from .prs import boundary_points, coverage_check

SUBCOMMANDS = ("bound", "drs", "prs", "amgf-check", "simulate", "experiment")
DEFAULT_DELTA = 1e-3
DEFAULT_EPSILON = 1.0 / 16.0
SEED_ENV = "STOCHREACH_SEED"

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


@dataclass
class RunConfig:
    subcommand: str
    preset: str = None
    system: str = None
    delta: float = None
    epsilon: float = None
    horizon: int = None
    seed: int = 0
    n_traj: int = None
    out: str = None
    check: bool = False
    backend: str = "lipschitz"
    experiment: str = None
    full: bool = False
    scaling_samples: int = None
    lipschitz_inflation: float = None
    samples: int = 100_000
    overridden: list = field(default_factory=list)

    def to_dict(self):
        """Settings that determine the results (the output location does not)."""
        d = asdict(self)
        d.pop("out")
        return d


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; flags take precedence")
    common.add_argument("--preset", choices=PRESET_NAMES)
    common.add_argument("--system", help="JSON description of a custom system")
    common.add_argument("--delta", type=float, help=f"probability level (default {DEFAULT_DELTA:g} or the preset's)")
    common.add_argument("--epsilon", type=float, help="net parameter (default 1/16 or the preset's)")
    common.add_argument("--T", "--horizon", dest="horizon", type=int, help="time horizon")
    common.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    common.add_argument("--n-traj", dest="n_traj", type=int, help="number of sampled trajectories")
    common.add_argument("--out", help="output directory")
    common.add_argument("--check", action="store_true", default=None,
                        help="exit with status 4 if any validation check fails")
    common.add_argument("--lipschitz-inflation", dest="lipschitz_inflation", type=float,
                        help="safety factor on sampled Lipschitz estimates (uav)")

    parser = _Parser(prog="stochreach", description="Probabilistic reachable sets for stochastic systems.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    sub.add_parser("bound", parents=[common], help="deviation radii table")
    p = sub.add_parser("drs", parents=[common], help="deterministic reachable set over-approximation")
    p.add_argument("--backend", choices=("lipschitz", "interval"))
    sub.add_parser("prs", parents=[common], help="probabilistic reachable sets with coverage")
    p = sub.add_parser("amgf-check", parents=[common], help="AMGF lemma suite as a JSON report")
    p.add_argument("--samples", type=int, help="Monte Carlo samples per check")
    sub.add_parser("simulate", parents=[common], help="sample trajectory pairs")
    p = sub.add_parser("experiment", parents=[common], help="reproduce a named experiment")
    p.add_argument("experiment", choices=PRESET_NAMES)
    p.add_argument("--full", action="store_true", default=None,
                   help="linear: full-scale scaling sweep (10^7 samples, delta down to 1e-4)")
    p.add_argument("--scaling-samples", dest="scaling_samples", type=int)
    return parser


def parse_config(argv, environ=None):
    """Merge defaults, an optional JSON config file and command-line flags into a RunConfig."""
    environ = os.environ if environ is None else environ
    args = vars(build_parser().parse_args(argv))
    config_path = args.pop("config", None)
    file_vals = {}
    if config_path:
        try:
            file_vals = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from None
        if not isinstance(file_vals, dict):
            raise ConfigError("config file must hold a JSON object")
        file_vals = {k.replace("-", "_"): v for k, v in file_vals.items()}
        known = set(RunConfig.__dataclass_fields__) - {"subcommand", "overridden"}
        unknown = sorted(set(file_vals) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = dict(file_vals)
    overridden = []
    for k, v in args.items():
        if v is None:
            continue
        if k in file_vals and file_vals[k] != v:
            overridden.append(k)
        merged[k] = v
    if merged.get("seed") is None:
        env = environ.get(SEED_ENV)
        try:
            merged["seed"] = int(env) if env is not None else 0
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    merged = {k: v for k, v in merged.items() if v is not None}
    cfg = RunConfig(**merged, overridden=sorted(overridden))
    _validate(cfg)
    return cfg


def _validate(cfg):
    for name in ("delta", "epsilon"):
        v = getattr(cfg, name)
        if v is not None and not 0.0 < v < 1.0:
            raise ConfigError(f"{name} must lie in (0, 1), got {v}")
    if cfg.horizon is not None and cfg.horizon < 0:
        raise ConfigError("horizon must be non-negative")
    for name in ("n_traj", "samples", "scaling_samples"):
        v = getattr(cfg, name)
        if v is not None and v < 1:
            raise ConfigError(f"{name} must be positive")
    if cfg.lipschitz_inflation is not None and not cfg.lipschitz_inflation >= 1.0:
        raise ConfigError("lipschitz-inflation must be at least 1")
    if cfg.backend not in ("lipschitz", "interval"):
        raise ConfigError(f"unknown backend {cfg.backend!r}")
    if cfg.subcommand in ("bound", "drs", "prs", "simulate"):
        if not (cfg.preset or cfg.system):
            raise ConfigError("missing system spec: pass --preset or --system")
        if cfg.preset and cfg.system:
            raise ConfigError("pass only one of --preset and --system")


def resolve_preset(cfg, name=None):
    name = name or cfg.preset
    pre = get_preset(name) if name else system_from_json(cfg.system)
    over = {"delta": cfg.delta, "epsilon": cfg.epsilon, "horizon": cfg.horizon, "n_traj": cfg.n_traj}
    if name is None:
        over["delta"] = cfg.delta or pre.params.get("delta", DEFAULT_DELTA)
        over["epsilon"] = cfg.epsilon or pre.params.get("epsilon", DEFAULT_EPSILON)
    return pre.with_overrides(**over)


def _schedule(pre, cfg):
    if pre.model.lipschitz is not None and pre.name not in ("cobweb", "uav"):
        sigma = variance_proxy(pre, seed=cfg.seed)
        L = [pre.model.lipschitz_at(t) for t in range(pre.horizon)]
        return build_schedule(L, sigma * sigma, pre.horizon)
    return reach_sets(pre, lipschitz_inflation=cfg.lipschitz_inflation, seed=cfg.seed)[1].schedule


def cmd_bound(cfg):
    pre = resolve_preset(cfg)
    sched = _schedule(pre, cfg)
    out = ReportBundle("bound")
    out.add_table("bounds.csv", ["t", "Psi", "r_amgf", "r_markov", "r_worstcase"],
                  bound_table(sched, pre.dim, pre.delta, pre.epsilon))
    return out


def _labels(n):
    return [f"x{i}" for i in range(n)]


def cmd_drs(cfg):
    pre = resolve_preset(cfg)
    out = ReportBundle("drs")
    n = pre.dim
    if cfg.backend == "interval":
        init = pre.initial if isinstance(pre.initial, IntervalBox) else IntervalBox.point(pre.initial)
        ub = pre.model.input_set
        inputs = None if ub is None else IntervalBox(ub.lower, ub.upper)
        boxes = interval_reach(natural_inclusion(pre.model), init, inputs, pre.horizon)
        out.add_table("drs.csv", ["t", *[f"lower_{v}" for v in _labels(n)],
                                  *[f"upper_{v}" for v in _labels(n)]],
                      [[t, *b.lower, *b.upper] for t, b in enumerate(boxes)])
        return out
    nominal, res = reach_sets(pre, lipschitz_inflation=cfg.lipschitz_inflation, seed=cfg.seed)
    out.add_table("drs.csv", ["t", *[f"center_{v}" for v in _labels(n)], "radius"],
                  [[t, *nominal[t], res.drs_radius[t]] for t in range(pre.horizon + 1)])
    return out


def cmd_prs(cfg):
    pre = resolve_preset(cfg)
    nominal, res = reach_sets(pre, lipschitz_inflation=cfg.lipschitz_inflation, seed=cfg.seed)
    out = ReportBundle("prs")
    n = pre.dim
    out.add_table("prs.csv", ["t", *[f"center_{v}" for v in _labels(n)], "drs_radius", "Psi",
                              "inflation", "total_radius"],
                  [[t, *nominal[t], res.drs_radius[t], res.schedule.Psi[t], s.inflation,
                    res.drs_radius[t] + s.inflation] for t, s in enumerate(res.sets)])
    ens = run_ensemble(pre.model, pre.noise, pre.initial, pre.horizon, pre.n_traj, cfg.seed,
                       nominal_x0=pre.nominal_x0)
    rows = coverage_check(res.sets[1:], ens)
    out.add_table("coverage.csv", COVERAGE_HEADER,
                  [[r.t, s.inflation, r.coverage, r.violations, r.n_traj, r.threshold, r.passed]
                   for r, s in zip(rows, res.sets[1:])])
    if n >= 2:
        out.documents["geometry.json"] = {"dims": [0, 1], "sets": [
            {"t": s.t, "boundary": boundary_points(s, (0, 1), 64)} for s in res.sets]}
    out.checks = {"coverage": all(r.passed for r in rows)}
    out.summary = {"violations": sum(r.violations for r in rows)}
    return out


def cmd_simulate(cfg):
    pre = resolve_preset(cfg)
    ens = run_ensemble(pre.model, pre.noise, pre.initial, pre.horizon, pre.n_traj, cfg.seed,
                       nominal_x0=pre.nominal_x0)
    n = pre.dim
    dev = pre.norm(ens.states - ens.associated)
    rows = [[i, t, *ens.states[i, t], *ens.associated[i, t], dev[i, t]]
            for i in range(ens.n_traj) for t in range(pre.horizon + 1)]
    out = ReportBundle("simulate")
    out.add_table("trajectories.csv", ["trajectory", "t", *[f"X_{v}" for v in _labels(n)],
                                       *[f"x_{v}" for v in _labels(n)], "deviation"], rows)
    return out


def cmd_amgf_check(cfg):
    report = run_lemma_suite(n_samples=cfg.samples, seed=cfg.seed)
    out = ReportBundle("amgf-check")
    out.documents["amgf_check.json"] = report
    out.checks = {c["name"]: c["passed"] for c in report["checks"]}
    return out


def cmd_experiment(cfg):
    name = cfg.experiment
    pre = resolve_preset(cfg, name)
    opts = {"preset": pre}
    if name == "linear":
        opts.update(full=cfg.full, scaling_samples=cfg.scaling_samples)
    if name == "uav":
        opts["lipschitz_inflation"] = cfg.lipschitz_inflation
    return reproduce_experiment(name, seed=cfg.seed, **opts)


COMMANDS = {"bound": cmd_bound, "drs": cmd_drs, "prs": cmd_prs, "amgf-check": cmd_amgf_check,
            "simulate": cmd_simulate, "experiment": cmd_experiment}


def _print_bundle(bundle, stream):
    for name, (header, rows) in bundle.tables.items():
        if len(bundle.tables) > 1:
            stream.write(f"# {name}\n")
        write_csv(stream, header, rows)
    for name, doc in bundle.documents.items():
        stream.write(dump_json(doc))


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        bundle = COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        print(f"stochreach: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, DomainError, NotSubGaussianError, InclusionError,
            SeriesDivergence, FloatingPointError) as exc:
        print(f"stochreach: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    default_dir = {"experiment": f"results/{cfg.experiment}", "prs": "results/prs",
                   "simulate": "results/simulate"}
    out_dir = cfg.out or default_dir.get(cfg.subcommand)
    if out_dir:
        try:
            emit_results(bundle, out_dir, cfg.to_dict(), cfg.seed)
        except OSError as exc:
            print(f"stochreach: {exc}", file=sys.stderr)
            return 1
        print(dump_json({"out": str(out_dir), "summary": bundle.summary, "checks": bundle.checks}),
              end="")
    else:
        _print_bundle(bundle, sys.stdout)
    if cfg.check and not bundle.passed:
        failed = sorted(k for k, v in bundle.checks.items() if not v)
        print(f"stochreach: checks failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return 0


if __name__ == "__main__":
    sys.exit(main())
