"""Quenched growth rates and large-deviation rate functions of
renewal-reward processes in random environments.

The package computes the almost-sure exponential growth rate z(phi) of
tilted, Gibbs-weighted renewal partition functions along a fixed
environment trajectory, by three mutually validating routes (growth
limits along the orbit, the renewal-equation dynamic program, and a
corrector-based variational formula on periodic environments), and turns
z into rate functions for reward averages by convex conjugation, with an
exact lattice measure and a Monte Carlo sampler as finite-time overlays.
"""

from .env import (
    EnvironmentTrajectory,
    IidSequence,
    Letter,
    MarkovShift,
    Periodic,
    birkhoff_average,
    letter,
    realize,
    shift,
    trajectory_from_csv,
    trajectory_to_csv,
)
from .errors import (
    AllMinusInfinity,
    BracketFailure,
    CapExceeded,
    DimensionMismatch,
    Diverged,
    InvalidRho,
    InvalidSpec,
    MemoryCap,
    NonConvexCurve,
    NotPeriodic,
    OffLattice,
    OutOfHorizon,
    QldpError,
    TooLarge,
    TooManyStates,
)
from .examples import (
    MarkovReturnSpec,
    PinningSpec,
    compound_poisson_ell,
    compound_poisson_model,
    compound_poisson_truncation_mass,
    markov_return_model,
    pinning_contact_fraction_u,
    pinning_environment,
    pinning_free_energy_homogeneous,
    pinning_model,
    pinning_truncation_mass,
    pinning_waiting_law,
)
from .ldp import (
    MINUS_INFINITY,
    CgfCurve,
    LegendreValue,
    RateCurve,
    TailConstant,
    cgf_curve,
    cgf_to_csv,
    legendre,
    rate_curve,
    rate_curve_to_csv,
    tail_constant,
)
from .model import (
    RenewalModel,
    RewardLaw,
    ValidationReport,
    WaitingLaw,
    delta_reward,
    gibbs_weight,
    letter_local_model,
    reward_law,
    site_model,
    tail_probability,
    validate,
    waiting_law,
)
from .montecarlo import (
    BallMassEstimate,
    Trajectory,
    empirical_ball_mass,
    empirical_rate_scan,
    scan_to_csv,
    simulate_batch,
    simulate_trajectory,
)
from .partition import (
    KingmanEstimate,
    LatticeMeasure,
    PartitionTable,
    brute_force_partition,
    constrained_measure,
    constrained_partition,
    default_t_list,
    free_measure,
    free_partition,
    kingman_cgf_estimate,
    measure_to_csv,
    partition_to_csv,
)
from .variational import (
    CorrectorSolution,
    VariationalZ,
    corrector_objective,
    corrector_to_csv,
    free_energy_variational,
    perron_upsilon,
    upsilon,
)

__version__ = "0.1.0"

__all__ = [
    "AllMinusInfinity",
    "BallMassEstimate",
    "BracketFailure",
    "CapExceeded",
    "CgfCurve",
    "CorrectorSolution",
    "DimensionMismatch",
    "Diverged",
    "EnvironmentTrajectory",
    "IidSequence",
    "InvalidRho",
    "InvalidSpec",
    "KingmanEstimate",
    "LatticeMeasure",
    "LegendreValue",
    "Letter",
    "MINUS_INFINITY",
    "MarkovReturnSpec",
    "MarkovShift",
    "MemoryCap",
    "NonConvexCurve",
    "NotPeriodic",
    "OffLattice",
    "OutOfHorizon",
    "PartitionTable",
    "Periodic",
    "PinningSpec",
    "QldpError",
    "RateCurve",
    "RenewalModel",
    "RewardLaw",
    "TailConstant",
    "TooLarge",
    "TooManyStates",
    "Trajectory",
    "ValidationReport",
    "VariationalZ",
    "WaitingLaw",
    "birkhoff_average",
    "brute_force_partition",
    "cgf_curve",
    "cgf_to_csv",
    "compound_poisson_ell",
    "compound_poisson_model",
    "compound_poisson_truncation_mass",
    "constrained_measure",
    "constrained_partition",
    "corrector_objective",
    "corrector_to_csv",
    "default_t_list",
    "delta_reward",
    "empirical_ball_mass",
    "empirical_rate_scan",
    "free_energy_variational",
    "free_measure",
    "free_partition",
    "gibbs_weight",
    "kingman_cgf_estimate",
    "legendre",
    "letter",
    "letter_local_model",
    "markov_return_model",
    "measure_to_csv",
    "partition_to_csv",
    "perron_upsilon",
    "pinning_contact_fraction_u",
    "pinning_environment",
    "pinning_free_energy_homogeneous",
    "pinning_model",
    "pinning_truncation_mass",
    "pinning_waiting_law",
    "rate_curve",
    "rate_curve_to_csv",
    "realize",
    "reward_law",
    "scan_to_csv",
    "shift",
    "simulate_batch",
    "simulate_trajectory",
    "site_model",
    "tail_constant",
    "tail_probability",
    "trajectory_from_csv",
    "trajectory_to_csv",
    "upsilon",
    "validate",
    "waiting_law",
]
