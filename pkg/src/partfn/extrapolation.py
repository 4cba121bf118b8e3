"""Truncated-Taylor extrapolation of log Z from beta = 0 with certified error."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cluster import beta0, log_bound
from .errors import NoCertificateError, PreconditionError
from .hamiltonian import LocalHamiltonian, geometry_params
from .moments import DEFAULT_CONFIG, MomentConfig, z_series
from .series import PowerSeries, exp_series, log_series

__all__ = [
    "PowerSeries", "ZeroFreeDisk", "Estimate", "log_series", "exp_series", "truncation_bound",
    "choose_K", "estimate_log_partition", "map_disk_to_region", "RegionMap", "estimate_in_region",
]


@dataclass(frozen=True)
class ZeroFreeDisk:
    """Disk |z| <= b (target rescaled to z = 1) on which |log Z| <= M."""

    b: float
    M: float

    def __post_init__(self):
        if not self.b > 0:
            raise PreconditionError("disk radius must be positive")


@dataclass(frozen=True, eq=False)
class Estimate:
    value: complex
    K: int
    certified_error: float
    target: complex
    series: PowerSeries | None = None
    var: str = "beta"
    disk: ZeroFreeDisk | None = None
    exact: complex | None = None


def truncation_bound(kind: str, M_or_N: float, b: float, K: int) -> float:
    """Remainder bound for an order-K Taylor polynomial on |z| <= 1.

    ``bounded``: M / (b^K (b-1)) for |f| <= M on the disk of radius b.
    ``polynomial``: N / ((K+1) b^K (b-1)) for f = log of a degree-N
    polynomial without zeros in that disk.
    """
    if not b > 1:
        raise PreconditionError(f"disk radius b={b} must exceed 1")
    if K < 0:
        raise PreconditionError("K must be non-negative")
    if math.isinf(b):
        return 0.0
    if kind not in ("bounded", "polynomial"):
        raise PreconditionError(f"unknown bound kind {kind!r}")
    if not M_or_N:
        return 0.0
    try:
        val = M_or_N / (b**K * (b - 1))
    except OverflowError:
        val = M_or_N * math.exp(-K * math.log(b) - math.log(b - 1))
    return val / (K + 1) if kind == "polynomial" else val


def choose_K(M: float, b: float, eps: float, kind: str = "bounded", K_limit: int = 10_000) -> int:
    """Smallest K whose truncation bound is at most eps."""
    if not b > 1:
        raise PreconditionError(f"disk radius b={b} must exceed 1")
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    for K in range(K_limit + 1):
        if truncation_bound(kind, M, b, K) <= eps:
            return K
    raise PreconditionError(f"no K <= {K_limit} reaches eps={eps}")


def _auto_disk(H: LocalHamiltonian, beta: complex) -> ZeroFreeDisk:
    gp = geometry_params(H)
    b0 = beta0(gp)
    if abs(beta) >= b0:
        raise NoCertificateError(f"|beta|={abs(beta):.6g} is not inside the certified disk beta0={b0:.6g}")
    if math.isinf(b0):
        return ZeroFreeDisk(math.inf, math.log(H.d) * H.n)
    return ZeroFreeDisk(b0 / abs(beta), log_bound(gp, b0, H.n, H.d))


def estimate_log_partition(H: LocalHamiltonian, beta: complex, eps: float, disk: ZeroFreeDisk | str = "auto",
                           method: str = "auto", config: MomentConfig = DEFAULT_CONFIG,
                           K: int | None = None) -> Estimate:
    """Estimate log Z_beta(H) to additive error eps from the moments at beta = 0.

    In ``auto`` mode the disk comes from the high-temperature certificate
    (b = beta0/|beta|, M from the log Z bound at beta0); otherwise the caller
    supplies a certified ``ZeroFreeDisk``.  Passing ``K`` overrides the
    automatic order choice (the certified error is still reported).
    """
    beta = complex(beta)
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    if beta == 0:
        value = H.n * math.log(H.d)
        return Estimate(complex(value), 0, 0.0, beta, PowerSeries([value]))
    if isinstance(disk, str):
        if disk != "auto":
            raise PreconditionError(f"unknown disk mode {disk!r}")
        disk = _auto_disk(H, beta)
    if not disk.b > 1:
        raise NoCertificateError(f"disk radius b={disk.b} does not exceed 1")
    if K is None:
        K = 0 if math.isinf(disk.b) else choose_K(disk.M, disk.b, eps)
    f = log_series(z_series(H, K, method, config))
    value = complex(f(beta))
    err = truncation_bound("bounded", disk.M, disk.b, K)
    return Estimate(value, K, err, beta, f, "beta", disk)


# -- disk-to-region maps ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegionMap:
    """Polynomial phi with phi(0) = 0, phi(1) = beta mapping |z| <= b into the region."""

    coeffs: np.ndarray  # phi(z) = sum_k coeffs[k] z^k
    b: float
    delta: float
    beta: float

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    def as_series(self) -> PowerSeries:
        return PowerSeries(self.coeffs, "z")


def _distance_to_segment(w: np.ndarray, beta: float) -> np.ndarray:
    x = np.clip(w.real, 0.0, beta)
    return np.abs(w - x)


def _contained(coeffs, radius, delta, beta, samples) -> bool:
    z = radius * np.exp(2j * np.pi * np.arange(samples) / samples)
    w = np.polynomial.polynomial.polyval(z, coeffs)
    return bool(np.all(_distance_to_segment(w, beta) <= delta))


def map_disk_to_region(delta: float, beta: float, degree_budget: int = 256, samples: int = 4096,
                       disk_radius: float | None = None) -> RegionMap:
    """Polynomial map of a disk of radius b > 1 into the delta-neighbourhood of [0, beta].

    The neighbourhood is convex, so containment of the sampled image of the
    circle |z| = b implies containment of the whole disk's image.  Candidates
    are normalised truncated logarithms phi(z) = beta P(a z)/P(a) with
    P(w) = sum_{j<=N} w^j / j; the plain scaling phi(z) = beta z is tried first.
    The candidate with the largest certified b is returned.

    With ``disk_radius`` set the region is the disk |w| <= disk_radius and the
    map is the scaling phi(z) = beta z with b = disk_radius / beta.
    """
    if not delta > 0 or not beta > 0:
        raise PreconditionError("delta and beta must be positive")
    if disk_radius is not None:
        if not beta < disk_radius:
            raise PreconditionError(f"target {beta} is not inside the disk of radius {disk_radius}")
        return RegionMap(np.array([0.0, beta]), disk_radius / beta, delta, beta)
    best = None

    def radius_for(coeffs):
        if not _contained(coeffs, 1.0, delta, beta, samples):
            return None
        lo, hi = 1.0, 2.0
        while _contained(coeffs, hi, delta, beta, samples) and hi < 1e6:
            lo, hi = hi, 2 * hi
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if _contained(coeffs, mid, delta, beta, samples):
                lo = mid
            else:
                hi = mid
        return lo

    linear = np.array([0.0, beta])
    r = radius_for(linear)
    if r is not None and r > 1:
        best = (r, linear)
    for N in sorted({2, 4, 8, 16, 32, 64, 128, 256, degree_budget}):
        if N > degree_budget:
            continue
        for a in 1 - np.geomspace(0.5, 1e-3, 40):
            j = np.arange(1, N + 1)
            c = np.concatenate([[0.0], a**j / j])
            c = beta * c / c.sum()
            r = radius_for(c)
            if r is not None and r > 1 and (best is None or r > best[0]):
                best = (r, c)
    if best is None:
        raise PreconditionError(f"no polynomial of degree <= {degree_budget} maps a disk of radius > 1 into the region")
    r, c = best
    # report a radius strictly inside the verified one
    return RegionMap(c, 1 + 0.999 * (r - 1), delta, beta)


def estimate_in_region(H: LocalHamiltonian, beta: float, eps: float, delta: float, M: float,
                       degree_budget: int = 256, method: str = "auto",
                       config: MomentConfig = DEFAULT_CONFIG) -> Estimate:
    """Estimate log Z at real beta using a caller-certified region bound M.

    log Z is composed with a disk-to-region polynomial; the composed
    function's Taylor coefficients through order K need only the log-Z
    coefficients through order K because phi(0) = 0.
    """
    phi = map_disk_to_region(delta, beta, degree_budget)
    K = choose_K(M, phi.b, eps)
    f = log_series(z_series(H, K, method, config))
    c = np.zeros(K + 1)
    c[: min(K, phi.degree) + 1] = phi.coeffs[: K + 1]
    composed = PowerSeries(f.coeffs, "z").compose(PowerSeries(c, "z"))
    value = complex(composed(1.0))
    err = truncation_bound("bounded", M, phi.b, K)
    return Estimate(value, K, err, complex(beta), composed, "z", ZeroFreeDisk(phi.b, M))
