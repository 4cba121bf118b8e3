"""Partition functions of local quantum Hamiltonians by certified Taylor extrapolation."""

from .errors import (
    BudgetExceededError,
    InstanceError,
    NoCertificateError,
    NotFerromagneticError,
    PartfnError,
    PreconditionError,
)
from .hamiltonian import (
    GeometryParams,
    LocalHamiltonian,
    LocalTerm,
    Site,
    connection_distance,
    geometry_params,
    load_hamiltonian,
    parse_hamiltonian,
    random_instance,
    restrict,
)
from .series import PowerSeries, log_series
from .moments import trace_moment, weighted_trace_moment, z_series
from .extrapolation import Estimate, ZeroFreeDisk, choose_K, estimate_log_partition, truncation_bound
from .cluster import beta0

__all__ = [
    "BudgetExceededError", "InstanceError", "NoCertificateError", "NotFerromagneticError", "PartfnError",
    "PreconditionError", "GeometryParams", "LocalHamiltonian", "LocalTerm", "Site", "connection_distance",
    "geometry_params", "load_hamiltonian", "parse_hamiltonian", "random_instance", "restrict", "PowerSeries",
    "log_series", "trace_moment", "weighted_trace_moment", "z_series", "Estimate", "ZeroFreeDisk", "choose_K",
    "estimate_log_partition", "truncation_bound", "beta0",
]
