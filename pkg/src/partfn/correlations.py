"""Gibbs-state covariance: series in beta, vanishing order and decay profiles."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from . import oracle
from .errors import PreconditionError
from .hamiltonian import LocalHamiltonian, LocalTerm, connection_distance, pauli_matrix
from .moments import DEFAULT_CONFIG, MomentConfig, trace_series
from .series import PowerSeries

VANISH_RTOL = 1e-10
DROP_BELOW = 1e-13


def site_observable(word: str, support) -> LocalTerm:
    """Pauli word on the given sites, e.g. ``site_observable("Z", [0])``."""
    support = [support] if isinstance(support, int) else list(support)
    return LocalTerm(tuple(support), pauli_matrix(word), word)


@dataclass(frozen=True, eq=False)
class CovarianceSeries:
    coeffs: np.ndarray
    O1: LocalTerm
    O2: LocalTerm
    L_predicted: float

    @property
    def series(self) -> PowerSeries:
        return PowerSeries(self.coeffs)

    def __call__(self, beta):
        return self.series(beta)

    @property
    def scale(self) -> float:
        return max(1.0, float(np.max(np.abs(self.coeffs))))

    def vanishing_order(self) -> float:
        big = np.nonzero(np.abs(self.coeffs) > VANISH_RTOL * self.scale)[0]
        return int(big[0]) if big.size else math.inf


def _check_disjoint(O1: LocalTerm, O2: LocalTerm):
    if O1.sites & O2.sites:
        raise PreconditionError("observable supports overlap")


def covariance_series(H: LocalHamiltonian, O1: LocalTerm, O2: LocalTerm, K: int, method: str = "auto",
                      config: MomentConfig = DEFAULT_CONFIG) -> CovarianceSeries:
    """Taylor coefficients of Tr[rho O1 O2] - Tr[rho O1] Tr[rho O2] in beta through order K."""
    _check_disjoint(O1, O2)
    Z = trace_series(H, K, (), method, config)
    T1 = trace_series(H, K, [O1], method, config)
    T2 = trace_series(H, K, [O2], method, config)
    T12 = trace_series(H, K, [O1, O2], method, config)
    cov = T12 / Z - (T1 / Z) * (T2 / Z)
    L = connection_distance(H, O1.support, O2.support)
    return CovarianceSeries(cov.coeffs, O1, O2, L)


def vanishing_order(H: LocalHamiltonian, O1: LocalTerm, O2: LocalTerm, K: int, **kw) -> float:
    """First order with a coefficient above 1e-10 max(1, max|c|); inf if none through K."""
    return covariance_series(H, O1, O2, K, **kw).vanishing_order()


@dataclass(frozen=True, eq=False)
class DecayProfile:
    distances: np.ndarray
    covariances: np.ndarray
    probes: tuple[int, ...]
    beta: float
    fitted_xi: float | None = None
    fitted_c: float | None = None
    r_squared: float | None = None
    residuals: np.ndarray | None = None

    @property
    def has_fit(self) -> bool:
        return self.fitted_xi is not None


def decay_profile(H: LocalHamiltonian, beta: float, anchor: int, probes: Sequence[int], word: str = "Z",
                  spectrum: oracle.SpectralDecomposition | None = None) -> DecayProfile:
    """Oracle covariance between ``word`` on the anchor and on each probe site.

    log|cov| is fit linearly in distance, giving |cov| ~ c exp(-dist / xi).
    Points with |cov| < 1e-13 are dropped; fewer than three usable points
    leaves the fit unset.
    """
    beta = float(beta)
    s = spectrum if spectrum is not None and spectrum.basis is not None else oracle.spectrum(H, keep_basis=True)
    O1 = site_observable(word, anchor)
    dists, covs = [], []
    for p in probes:
        O2 = site_observable(word, p)
        dists.append(H.site_distance([anchor], [p]))
        covs.append(oracle.covariance(s, beta, O1, O2).real)
    dists = np.asarray(dists, dtype=float)
    covs = np.asarray(covs, dtype=float)
    keep = np.abs(covs) >= DROP_BELOW
    base = dict(distances=dists, covariances=covs, probes=tuple(probes), beta=beta)
    if keep.sum() < 3:
        return DecayProfile(**base)
    x, y = dists[keep], np.log(np.abs(covs[keep]))
    fit = stats.linregress(x, y)
    xi = -1.0 / fit.slope if fit.slope < 0 else math.inf
    resid = y - (fit.intercept + fit.slope * x)
    return DecayProfile(**base, fitted_xi=xi, fitted_c=math.exp(fit.intercept), r_squared=fit.rvalue**2,
                        residuals=resid)


def write_profile_csv(path, profile: DecayProfile):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["distance", "covariance"])
        for d, c in zip(profile.distances, profile.covariances):
            w.writerow([repr(float(d)), repr(float(c))])
