"""Anisotropic XXZ model: magnetization sectors, Lee-Yang roots and estimates in z = e^{beta mu}.

H(mu) = -sum_edges (J (XX + YY) + Jzz ZZ) - mu/2 sum_i (Z_i + 1).
Sector k is spanned by basis states with exactly k sites in |0> (Z = +1), so
Z = sum_k q_k z^k with q_k the trace of exp(beta A) over sector k, where A is
the field-free coupling part without the leading minus sign.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import NoCertificateError, NotFerromagneticError, PreconditionError, BudgetExceededError
from .extrapolation import Estimate, choose_K, truncation_bound
from .hamiltonian import LocalHamiltonian, LocalTerm, Site, pauli_matrix
from .series import PowerSeries, log_series

SECTOR_CAP = 4096
CIRCLE_TOL = 1e-12


@dataclass(frozen=True)
class EdgeCouplings:
    """General two-qubit XY-plane couplings plus Jzz on one edge."""

    Jxx: float
    Jyy: float
    Jxy: float = 0.0
    Jyx: float = 0.0
    Jzz: float = 0.0

    def threshold(self) -> float:
        a = math.hypot(self.Jxx - self.Jyy, self.Jxy + self.Jyx)
        b = math.hypot(self.Jxx + self.Jyy, self.Jxy - self.Jyx)
        return 0.5 * a + 0.5 * b


def check_ferromagnetic(edges: Sequence[EdgeCouplings] | EdgeCouplings, atol: float = 0.0) -> tuple[bool, list[dict]]:
    """Per-edge test of Jzz >= |(Jxx-Jyy, Jxy+Jyx)|/2 + |(Jxx+Jyy, Jxy-Jyx)|/2."""
    if isinstance(edges, EdgeCouplings):
        edges = [edges]
    report = []
    for i, e in enumerate(edges):
        vals = (e.Jxx, e.Jyy, e.Jxy, e.Jyx, e.Jzz)
        if not all(map(math.isfinite, vals)):
            raise PreconditionError(f"edge {i} has non-finite couplings")
        need = e.threshold()
        report.append({"edge": i, "Jzz": e.Jzz, "threshold": need, "ok": e.Jzz >= need - atol})
    return all(r["ok"] for r in report), report


@dataclass(frozen=True, eq=False)
class XXZInstance:
    n: int
    edges: tuple[tuple[int, int], ...]
    J: np.ndarray
    Jzz: np.ndarray
    beta: float
    mu: float = 0.0

    def __post_init__(self):
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        J = np.asarray(self.J, dtype=float).reshape(-1)
        Jzz = np.asarray(self.Jzz, dtype=float).reshape(-1)
        if J.size == 1 and len(edges) != 1:
            J = np.full(len(edges), J[0])
        if Jzz.size == 1 and len(edges) != 1:
            Jzz = np.full(len(edges), Jzz[0])
        if self.n < 1:
            raise PreconditionError("n must be >= 1")
        if J.size != len(edges) or Jzz.size != len(edges):
            raise PreconditionError("need one J and one Jzz per edge")
        for a, b in edges:
            if a == b or not (0 <= a < self.n and 0 <= b < self.n):
                raise PreconditionError(f"bad edge ({a}, {b})")
        if not (np.all(np.isfinite(J)) and np.all(np.isfinite(Jzz)) and math.isfinite(self.beta)):
            raise PreconditionError("couplings must be finite")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "Jzz", Jzz)

    @property
    def couplings(self) -> list[EdgeCouplings]:
        return [EdgeCouplings(j, j, 0.0, 0.0, jz) for j, jz in zip(self.J, self.Jzz)]

    @property
    def ferromagnetic(self) -> bool:
        return bool(np.all(self.Jzz >= np.abs(self.J)))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "edges": [list(e) for e in self.edges],
            "J": [float(x) for x in self.J],
            "Jzz": [float(x) for x in self.Jzz],
            "beta": float(self.beta),
            "mu": float(self.mu),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "XXZInstance":
        try:
            return cls(int(doc["n"]), tuple(map(tuple, doc["edges"])), doc["J"], doc["Jzz"],
                       float(doc["beta"]), float(doc.get("mu", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise PreconditionError(f"malformed XXZ instance: {exc}") from exc


def random_ferromagnet(n: int, seed: int, beta: float = 1.0, mu: float = 0.0, kind: str = "chain",
                       edge_prob: float = 0.5) -> XXZInstance:
    """J uniform in [-1, 1] and Jzz = |J| + U[0, 1] on a chain or random graph."""
    rng = np.random.default_rng(seed)
    if kind == "chain":
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "graph":
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob]
    else:
        raise PreconditionError(f"unsupported kind {kind!r}")
    J = rng.uniform(-1, 1, len(edges))
    Jzz = np.abs(J) + rng.uniform(0, 1, len(edges))
    return XXZInstance(n, tuple(edges), J, Jzz, beta, mu)


def _sector_states(n: int, k: int) -> list[int]:
    """Basis indices with exactly k zero bits (site 0 = most significant bit)."""
    out = []
    for zeros in itertools.combinations(range(n), k):
        idx = (1 << n) - 1
        for s in zeros:
            idx &= ~(1 << (n - 1 - s))
        out.append(idx)
    return sorted(out)


def sector_block(inst: XXZInstance, k: int, cap: int = SECTOR_CAP) -> np.ndarray:
    """sum_edges J (XX + YY) + Jzz ZZ restricted to the weight-k sector."""
    n = inst.n
    if not 0 <= k <= n:
        raise PreconditionError(f"sector {k} outside 0..{n}")
    dim = math.comb(n, k)
    if dim > cap:
        raise BudgetExceededError(f"sector dimension {dim} exceeds cap {cap}")
    states = _sector_states(n, k)
    pos = {s: i for i, s in enumerate(states)}
    A = np.zeros((dim, dim))
    for (a, b), J, Jzz in zip(inst.edges, inst.J, inst.Jzz):
        ma, mb = 1 << (n - 1 - a), 1 << (n - 1 - b)
        for i, s in enumerate(states):
            same = bool(s & ma) == bool(s & mb)
            A[i, i] += Jzz if same else -Jzz
            if not same:
                A[pos[s ^ ma ^ mb], i] += 2 * J
    return A


@dataclass(frozen=True, eq=False)
class SectorPolynomial:
    """q_0..q_n; entries of sectors that were not computed are NaN."""

    q: np.ndarray
    beta: float
    n: int
    ferromagnetic: bool
    computed: tuple[int, ...] = field(default=())

    @property
    def complete(self) -> bool:
        return len(self.computed) == self.n + 1

    def __call__(self, z):
        if not self.complete:
            raise PreconditionError("polynomial has uncomputed sectors")
        return np.polynomial.polynomial.polyval(z, self.q)

    def partition_function(self, mu: float) -> float:
        return float(self(math.exp(self.beta * mu)))

    def log_value(self, log_z: float) -> float:
        """log sum_k q_k z^k from log z, without overflow."""
        if not self.complete:
            raise PreconditionError("polynomial has uncomputed sectors")
        return float(logsumexp(np.log(self.q) + np.arange(self.n + 1) * log_z))


def sector_coefficients(inst: XXZInstance, sectors: Sequence[int] | None = None,
                        cap: int = SECTOR_CAP) -> SectorPolynomial:
    """q_k = Tr_k exp(beta A_k) for every sector, or only the listed ones."""
    ks = range(inst.n + 1) if sectors is None else sorted(set(int(k) for k in sectors))
    q = np.full(inst.n + 1, np.nan)
    for k in ks:
        ev = np.linalg.eigvalsh(sector_block(inst, k, cap))
        q[k] = math.fsum(np.exp(inst.beta * ev))
    return SectorPolynomial(q, float(inst.beta), inst.n, inst.ferromagnetic, tuple(ks))


def xxz_hamiltonian(inst: XXZInstance, mu: float | None = None) -> LocalHamiltonian:
    """H(mu) as a generic local Hamiltonian (for the dense oracle)."""
    mu = inst.mu if mu is None else mu
    xy = pauli_matrix("XX") + pauli_matrix("YY")
    zz = pauli_matrix("ZZ")
    terms = [LocalTerm(e, -(J * xy + Jzz * zz), "XXZ") for e, J, Jzz in zip(inst.edges, inst.J, inst.Jzz)]
    if mu:
        field_term = -0.5 * mu * (pauli_matrix("Z") + np.eye(2))
        terms += [LocalTerm((i,), field_term, "field") for i in range(inst.n)]
    return LocalHamiltonian(inst.n, 2, tuple(terms), tuple(Site(i) for i in range(inst.n)))


def magnetization_commutator(inst: XXZInstance, mu: float | None = None) -> float:
    """Norm of [H(mu), sum_i (Z_i + 1)/2] on the dense space."""
    from .oracle import full_matrix

    H = full_matrix(xxz_hamiltonian(inst, mu))
    n = inst.n
    N = np.array([n - bin(s).count("1") for s in range(2**n)], dtype=float)
    C = H * N[None, :] - N[:, None] * H
    return float(np.linalg.norm(C, 2)) if C.size else 0.0


def _polish(q: np.ndarray, r: complex, iters: int = 8) -> complex:
    dq = np.polynomial.polynomial.polyder(q)
    best, best_res = r, abs(np.polynomial.polynomial.polyval(r, q))
    for _ in range(iters):
        d = np.polynomial.polynomial.polyval(r, dq)
        if d == 0:
            break
        r = r - np.polynomial.polynomial.polyval(r, q) / d
        res = abs(np.polynomial.polynomial.polyval(r, q))
        if not np.isfinite(res) or res >= best_res:
            break
        best, best_res = r, res
    return complex(best)


def lee_yang_roots(poly: SectorPolynomial | Sequence[float], polish: bool = True) -> tuple[np.ndarray, float]:
    """Roots of sum_k q_k z^k (companion matrix, then Newton polish) and max ||z| - 1|."""
    q = np.asarray(poly.q if isinstance(poly, SectorPolynomial) else poly, dtype=float)
    if not np.all(np.isfinite(q)):
        raise PreconditionError("all sector coefficients are needed for root finding")
    q = np.trim_zeros(q, "b")
    if q.size < 2:
        raise PreconditionError("polynomial degree must be >= 1")
    # rescale so the coefficients are O(1); roots are unchanged
    q = q / np.max(np.abs(q))
    roots = np.polynomial.polynomial.polyroots(q).astype(complex)
    if polish:
        roots = np.array([_polish(q, r) for r in roots])
    roots = roots[np.lexsort((roots.imag, roots.real))]
    dev = float(np.max(np.abs(np.abs(roots) - 1))) if roots.size else 0.0
    return roots, dev


def _needed_sectors(n: int, K: int, reversed_: bool) -> list[int]:
    top = min(K, n)
    return [n - k for k in range(top + 1)] if reversed_ else list(range(top + 1))


def xxz_estimate(source: SectorPolynomial | XXZInstance, mu: float, eps: float, K: int | None = None,
                 exact: bool = True) -> Estimate:
    """Truncated-log estimate of log Z at z = e^{beta mu}, extrapolating from z = 0.

    For |z| < 1 the disk radius is b = 1/|z|; for |z| > 1 the reversed
    polynomial z^n p(1/z) is used instead and n log z added back.  The error
    bound is the one for logarithms of degree-n polynomials with no zeros in
    the disk.  Given an instance, only the sectors the truncation needs are
    diagonalised (plus all of them when ``exact`` is requested).
    """
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    beta = float(source.beta)
    n = source.n
    if not source.ferromagnetic:
        raise NotFerromagneticError("instance is not ferromagnetic; no Lee-Yang certificate")
    log_z = beta * mu
    if abs(log_z) <= CIRCLE_TOL:
        raise NoCertificateError("target lies on the unit circle where the zeros live")
    flip = log_z > 0
    w = math.exp(-abs(log_z))
    if w == 0:
        # only the extreme sector survives
        K = 0
        err = 0.0
    else:
        b = 1 / abs(w)
        if K is None:
            K = choose_K(n, b, eps, kind="polynomial")
        err = truncation_bound("polynomial", n, b, K)
    need = _needed_sectors(n, K, flip)
    if isinstance(source, XXZInstance):
        poly = sector_coefficients(source, None if exact else need)
    else:
        poly = source
        missing = set(need) - set(poly.computed)
        if missing:
            raise PreconditionError(f"sectors {sorted(missing)} were not computed")
    q = np.zeros(K + 1)
    for j, k in enumerate(need):
        q[j] = poly.q[k]
    f = log_series(PowerSeries(q, "z"))
    value = complex(f(w))
    if flip:
        value += n * log_z
    ex = complex(poly.log_value(log_z)) if poly.complete else None
    return Estimate(value, K, err, complex(math.exp(min(log_z, 700.0))), f, "z", None, ex)


def write_poly_csv(path, poly: SectorPolynomial):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "q_k"])
        for k, v in enumerate(poly.q):
            w.writerow([k, repr(float(v))])


def write_roots_csv(path, roots: np.ndarray):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "abs"])
        for r in roots:
            w.writerow([repr(float(r.real)), repr(float(r.imag)), repr(float(abs(r)))])
