"""Rank-based diffusions: particle simulation, stationary initial laws and the limiting CDF equation."""
from .analysis import (
    DistanceReport,
    ResidualReport,
    TestFunction,
    bump,
    capital_curve,
    ks_distance,
    lln_report,
    mv_residual,
    spread_diagnostics,
    summarize,
    w1_distance,
)
from .config import GridSpec, RunConfig, config_from_dict, load_config
from .errors import InputError, RankDiffusionError
from .init_law import (
    GapRates,
    LimitLaw,
    compute_gap_rates,
    limit_cdf,
    limit_quantile,
    median_index,
    quantile_stats,
    sample_initial_positions,
)
from .measures import EmpiricalMeasure, ParticleState
from .model import CoefficientModel, TabulatedDriftModel, eval_mu, eval_theta_sigma, validate_model
from .particle import em_step, run_replicas, simulate, simulate_states, tagged_particle
from .pme_solver import GridCdf, PdeSolution, cfl_dt, pme_step, solve_pme

__version__ = "0.1.0"
