"""High-temperature cluster expansion and the certified zero-free disk.

Connected sets are indexed by *terms* (a frozenset of term indices); when no
two terms share a support this is the same as indexing by supports.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .errors import BudgetExceededError, PreconditionError
from .hamiltonian import GeometryParams, LocalHamiltonian, geometry_params, restrict
from .moments import _dense_on, _eigvalsh, connected_term_sets

E = math.e


def beta0(gp: GeometryParams) -> float:
    """Radius 1/(5 e g h kappa) of the certified zero-free disk."""
    if gp.g <= 0 or gp.h <= 0 or gp.kappa <= 0:
        warnings.warn("degenerate geometry (g, h or kappa is zero): no finite zero-free radius")
        return math.inf
    return 1.0 / (5 * E * gp.g * gp.h * gp.kappa)


def log_bound(gp: GeometryParams, beta: complex, n: int, d: int) -> float:
    """(e^2 g h |beta| + log d) n, the bound on |log|Z|| inside the disk."""
    return (E**2 * gp.g * gp.h * abs(beta) + math.log(d)) * n


def expansion_radius(gp: GeometryParams) -> float:
    """1/(g h (e-1)): radius where the cluster expansion converges absolutely."""
    if gp.g <= 0 or gp.h <= 0:
        return math.inf
    return 1.0 / (gp.g * gp.h * (E - 1))


@dataclass(frozen=True)
class ConnectedSet:
    members: tuple[int, ...]
    supports: tuple[tuple[int, ...], ...]
    root: int

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def sites(self) -> tuple[int, ...]:
        return tuple(sorted(set().union(*map(set, self.supports))))

    def is_connected(self) -> bool:
        """Chain search: every support reachable from the first through overlaps."""
        supports = [set(s) for s in self.supports]
        seen, stack = {0}, [0]
        while stack:
            i = stack.pop()
            for j, s in enumerate(supports):
                if j not in seen and s & supports[i]:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == len(supports)


def enumerate_connected_sets(H: LocalHamiltonian, x0: int, max_size: int,
                             budget: int = 1_000_000) -> list[ConnectedSet]:
    """Every connected set of at most ``max_size`` terms with x0 in its support."""
    if not 0 <= x0 < H.n:
        raise PreconditionError(f"site {x0} is not in the lattice")
    seeds = H.terms_at(x0)
    if not seeds or max_size < 1:
        return []
    raw = connected_term_sets(H.overlap_graph, max_size, seeds=seeds, max_sets=budget)
    out = []
    for members in raw:
        idx = tuple(sorted(members, key=lambda i: (H.terms[i].support, i)))
        out.append(ConnectedSet(idx, tuple(H.terms[i].support for i in idx), x0))
    out.sort(key=lambda c: (c.size, c.supports, c.members))
    return out


def count_by_size(sets) -> dict[int, int]:
    counts: dict[int, int] = {}
    for c in sets:
        counts[c.size] = counts.get(c.size, 0) + 1
    return counts


@dataclass(frozen=True)
class ClusterWeight:
    set: ConnectedSet
    value: complex
    p_max: int
    tail_bound: float
    envelope: float  # d^|supp| (e^{|beta| h} - 1)^|set|
    within_radius: bool = field(default=True)


def cluster_weight(H: LocalHamiltonian, cset: ConnectedSet, beta: complex, p_max: int) -> ClusterWeight:
    """Partial sum through p_max of the weight series attached to ``cset``.

    The sum over p-tuples that use every member at least once is evaluated by
    inclusion-exclusion over member subsets S:
    sum_S (-1)^{|set|-|S|} Tr_supp[(H_S)^p], each trace from the eigenvalues
    of H_S on the set's support.
    """
    k = cset.size
    if p_max < k:
        raise PreconditionError(f"p_max={p_max} is below the set size {k}")
    sites = list(cset.sites)
    terms = [H.terms[i] for i in cset.members]
    beta = complex(beta)
    powers = np.arange(k, p_max + 1)
    coef = np.array([(-beta) ** p / math.factorial(p) for p in powers])
    parts = []
    for r in range(1, k + 1):
        for subset in itertools.combinations(range(k), r):
            ev = _eigvalsh(_dense_on([terms[j] for j in subset], sites, H.d))
            traces = np.array([math.fsum(ev**p) for p in powers])
            parts.append((-1) ** (k - r) * np.dot(coef, traces))
    value = complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))

    h = max(t.norm for t in terms)
    x = abs(beta) * h
    dim = float(H.d) ** len(sites)
    envelope = dim * math.expm1(x) ** k
    # coefficients of (e^x - 1)^k are dominated by those of e^{kx}
    tail = dim * (k * x) ** (p_max + 1) / math.factorial(p_max + 1) * math.exp(k * x)
    gp = geometry_params(H)
    return ClusterWeight(cset, value, p_max, tail, envelope, abs(beta) <= expansion_radius(gp) * (1 + 1e-12))


def _log_z(H: LocalHamiltonian, removed, beta) -> complex:
    keep = [s for s in range(H.n) if s not in set(removed)]
    if not keep:
        return 0j
    return oracle.log_partition(oracle.spectrum(restrict(H, keep, reindex=True)), beta)


def _z(H, removed, beta) -> complex:
    keep = [s for s in range(H.n) if s not in set(removed)]
    if not keep:
        return 1 + 0j
    return oracle.partition_function(oracle.spectrum(restrict(H, keep, reindex=True)), beta)


def expansion_terms(H: LocalHamiltonian, x0: int, beta: complex, max_size: int, p_max: int):
    """Z(Lambda), d Z(Lambda \\ x0) and the weighted cluster corrections."""
    sets = enumerate_connected_sets(H, x0, max_size)
    z_full = _z(H, (), beta)
    z_rest = H.d * _z(H, (x0,), beta)
    corrections = []
    for c in sets:
        if c.size > p_max:
            continue
        w = cluster_weight(H, c, beta, p_max)
        corrections.append((w, _z(H, c.sites, beta)))
    return z_full, z_rest, corrections


def expansion_residual(H: LocalHamiltonian, x0: int, beta: complex, max_size: int, p_max: int) -> float:
    """Relative defect of Z = d Z(minus x0) + sum_X W(X) Z(minus supp X)."""
    z_full, z_rest, corrections = expansion_terms(H, x0, beta, max_size, p_max)
    vals = [z_rest] + [w.value * z for w, z in corrections]
    approx = complex(math.fsum(v.real for v in vals), math.fsum(v.imag for v in vals))
    return abs(z_full - approx) / abs(z_full)


def ratio_bound_check(H: LocalHamiltonian, beta: complex) -> dict:
    """|log|Z(Lambda) / (d Z(Lambda minus x))|| against e^2 g h |beta| for every site x."""
    gp = geometry_params(H)
    bound = E**2 * gp.g * gp.h * abs(beta)
    full = _log_z(H, (), beta).real
    rows = []
    for x in range(H.n):
        val = abs(full - math.log(H.d) - _log_z(H, (x,), beta).real)
        rows.append({"site": x, "log_ratio": val, "bound": bound, "ok": val <= bound + 1e-9})
    b0 = beta0(gp)
    return {
        "beta": complex(beta),
        "beta0": b0,
        "in_disk": abs(beta) <= b0,
        "bound": bound,
        "max_log_ratio": max((r["log_ratio"] for r in rows), default=0.0),
        "violations": sum(not r["ok"] for r in rows),
        "sites": rows,
    }


def site_removal_check(H: LocalHamiltonian, X, beta: float) -> tuple[float, float]:
    """|log(Z(Lambda) / (d^|X| Z(Lambda minus X)))| and its bound g h beta |X| (real beta)."""
    X = sorted(set(X))
    gp = geometry_params(H)
    val = abs(_log_z(H, (), beta).real - len(X) * math.log(H.d) - _log_z(H, X, beta).real)
    return val, gp.g * gp.h * abs(beta) * len(X)


def disk_scan(H: LocalHamiltonian, n_grid: int = 64, radius: float | None = None) -> dict:
    """Evaluate Z on an n_grid x n_grid mesh of the square around |beta| <= radius.

    Reports min |Z| and the largest excess of |log|Z|| over the certified
    bound across mesh points inside the disk.
    """
    gp = geometry_params(H)
    r = beta0(gp) if radius is None else radius
    if not math.isfinite(r):
        raise PreconditionError("no finite disk radius for this Hamiltonian")
    s = oracle.spectrum(H)
    xs = np.linspace(-r, r, n_grid)
    B = xs[None, :] + 1j * xs[:, None]
    inside = np.abs(B) <= r * (1 + 1e-12)
    pts = B[inside]
    Z = oracle.partition_function_grid(s, pts)
    logabs = np.log(np.abs(Z))
    bounds = (E**2 * gp.g * gp.h * np.abs(pts) + math.log(H.d)) * H.n
    return {
        "radius": r,
        "points": int(pts.size),
        "min_abs_Z": float(np.min(np.abs(Z))),
        "max_excess": float(np.max(np.abs(logabs) - bounds)),
    }
