"""Heavy-traffic laboratory for the input-queued switch, the three-queue system and the N-system.

Exact MaxWeight dynamics, state-space-collapse geometry, closed-form limit
laws and Monte Carlo checks of the functional equations they satisfy.
"""

from .ensemble import StationaryEnsemble, batch_means_se, concatenate
from .geometry import (
    ConeRepresentation,
    Decomposition,
    NSysCone,
    Target,
    project_cone_switch,
    project_cones_nsys,
    project_subspace,
    switch_b_matrix,
)
from .limit_theory import DomainError, Frequency, LimitLaw, functional_residual, random_frequencies
from .nsys_sim import run_stationary_nsys
from .replicas import run_replicas, simulate
from .stochastics import (
    ArrivalFamily,
    ArrivalKind,
    HeavyTrafficSchedule,
    RngStream,
    SystemSpec,
    make_rates,
    nsys_spec,
    switch_spec,
    threeq_spec,
)
from .switch_sim import maxweight_schedule, run_stationary
from .threeq_sim import run_stationary_3q, threeq_maxweight
from .transform_lab import compare_to_limit, empirical_residual, estimate_L, estimate_M, ssc_report

__version__ = "0.1.0"

__all__ = [
    "ArrivalFamily",
    "ArrivalKind",
    "ConeRepresentation",
    "Decomposition",
    "DomainError",
    "Frequency",
    "HeavyTrafficSchedule",
    "LimitLaw",
    "NSysCone",
    "RngStream",
    "StationaryEnsemble",
    "SystemSpec",
    "Target",
    "batch_means_se",
    "compare_to_limit",
    "concatenate",
    "empirical_residual",
    "estimate_L",
    "estimate_M",
    "functional_residual",
    "make_rates",
    "maxweight_schedule",
    "nsys_spec",
    "project_cone_switch",
    "project_cones_nsys",
    "project_subspace",
    "random_frequencies",
    "run_replicas",
    "run_stationary",
    "run_stationary_3q",
    "run_stationary_nsys",
    "simulate",
    "ssc_report",
    "switch_b_matrix",
    "switch_spec",
    "threeq_maxweight",
    "threeq_spec",
]
