"""Probabilistic reachable sets for discrete-time stochastic systems."""

__version__ = "0.1.0"

from .amgf import AmgfEvaluator, amgf, amgf_quadrature_oracle, verify_decoupling, verify_norm_concentration
from .deviation import (DeviationSchedule, EpsilonConstants, amgf_bound, build_schedule,
                        epsilon_constants, expectation_bound, linear_exact_bound, markov_bound,
                        optimize_epsilon, worstcase_bound)
from .drs import (BallSet, IntervalBox, interval_reach, interval_step, lipschitz_drs,
                  natural_inclusion)
from .interval import Interval
from .model import (EUCLIDEAN, NoiseSpec, NormSpec, SystemModel, certify_variance_proxy,
                    simulate_pair, weighted_norm)
from .montecarlo import (TrajectoryEnsemble, empirical_quantile_radius, estimate_local_lipschitz,
                         run_ensemble, uav_controller)
from .prs import ProbabilisticReachSet, coverage_check, make_prs, membership
