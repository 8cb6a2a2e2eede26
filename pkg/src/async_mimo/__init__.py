"""Asynchronous massive-MIMO uplink simulator and rate engine."""

__version__ = "0.1.0"

from .channel import LinkConfig, PilotSet, gen_fading, gen_pathloss, make_pilots
from .delay import DelayDist, PointMass, Uniform, make_rng, point_dist, standard_mixture
from .errors import ConfigurationError, InternalError, SingularityError
from .experiments import (ExperimentPlan, MonteCarloReport, optimize_sampling_origin, power_scaling_sweep,
                          run_monte_carlo, seeded_pathloss)
from .moments import MomentTable, base_moments
from .pulse import PulseSpec, eval_conv, eval_pulse, pulse_moment
from .rates import (Analysis, RateReport, SecondOrderStats, analyze, approx_error_bound, asymptotic_limit, lemma_terms,
                    closed_form_rate, second_order_stats, sync_rate, theorem_rate)
from .receivers import ReceiverKind, build_Gamma_W, build_Z

__all__ = [
    "Analysis", "ConfigurationError", "DelayDist", "ExperimentPlan", "InternalError", "LinkConfig",
    "MomentTable", "MonteCarloReport", "PilotSet", "PointMass", "PulseSpec", "RateReport", "ReceiverKind",
    "SecondOrderStats", "SingularityError", "Uniform", "analyze", "approx_error_bound", "asymptotic_limit",
    "base_moments", "build_Gamma_W", "lemma_terms", "build_Z", "closed_form_rate", "eval_conv", "eval_pulse", "gen_fading",
    "gen_pathloss", "make_pilots", "make_rng", "optimize_sampling_origin", "point_dist", "power_scaling_sweep",
    "pulse_moment", "run_monte_carlo", "second_order_stats", "seeded_pathloss", "standard_mixture",
    "sync_rate", "theorem_rate",
]
