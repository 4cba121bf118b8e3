"""Geometrically-local qudit Hamiltonians: data model, ingestion and geometry.

Tensor-factor convention used everywhere in the package: site 0 is the most
significant digit of a basis-state index, and a term's matrix is written in the
order of its ``support`` tuple.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InstanceError, PreconditionError

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

HERMITIAN_RTOL = 1e-12


def pauli_matrix(word: str) -> np.ndarray:
    """Dense matrix of a Pauli word such as ``"ZZ"`` or ``"XIY"``."""
    mat = np.ones((1, 1), dtype=complex)
    for ch in word.upper():
        if ch not in PAULI:
            raise InstanceError(f"unknown Pauli letter {ch!r} in {word!r}")
        mat = np.kron(mat, PAULI[ch])
    return mat


@dataclass(frozen=True)
class Site:
    index: int
    coords: tuple[int, ...] | None = None


@dataclass(frozen=True, eq=False)
class LocalTerm:
    support: tuple[int, ...]
    matrix: np.ndarray
    label: str | None = None

    def __post_init__(self):
        support = tuple(int(s) for s in self.support)
        if not support:
            raise InstanceError("term support must be non-empty")
        if len(set(support)) != len(support):
            raise InstanceError(f"repeated site in support {support}")
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", mat)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InstanceError("term matrix must be square")
        scale = np.linalg.norm(mat)
        if np.linalg.norm(mat - mat.conj().T) > HERMITIAN_RTOL * max(scale, 1e-300):
            raise InstanceError(f"term on {support} is not Hermitian")

    @property
    def sites(self) -> frozenset:
        return frozenset(self.support)

    @cached_property
    def norm(self) -> float:
        """Spectral norm from a dense Hermitian eigensolve on the support."""
        if not self.matrix.size:
            return 0.0
        return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix))))

    def same_as(self, other: "LocalTerm") -> bool:
        return self.support == other.support and np.array_equal(self.matrix, other.matrix)


def embed(matrix: np.ndarray, support: Sequence[int], target: Sequence[int], d: int) -> np.ndarray:
    """Lift ``matrix`` acting on ``support`` to the ordered site list ``target``."""
    support = list(support)
    target = list(target)
    if support == target:
        return matrix
    rest = [s for s in target if s not in support]
    if len(rest) + len(support) != len(target):
        raise PreconditionError(f"support {support} not contained in {target}")
    full = np.kron(matrix, np.eye(d ** len(rest), dtype=matrix.dtype))
    order = support + rest
    t = len(target)
    perm = [order.index(s) for s in target]
    full = full.reshape((d,) * (2 * t))
    full = full.transpose(perm + [p + t for p in perm])
    return full.reshape(d**t, d**t)


@dataclass(frozen=True, eq=False)
class LocalHamiltonian:
    """H = sum of local terms on ``n`` qudits of dimension ``d``.

    Immutable after construction; every derived quantity is a pure function of
    the stored terms.
    """

    n: int
    d: int
    terms: tuple[LocalTerm, ...] = ()
    sites: tuple[Site, ...] = field(default=())

    def __post_init__(self):
        if self.n < 0:
            raise InstanceError("site count must be non-negative")
        if self.d < 2:
            raise InstanceError("local dimension must be at least 2")
        sites = tuple(self.sites) or tuple(Site(i) for i in range(self.n))
        if [s.index for s in sites] != list(range(self.n)):
            raise InstanceError("site indices must be 0..n-1 in order")
        coords = [s.coords for s in sites if s.coords is not None]
        if coords and (len(coords) != self.n or len(set(coords)) != self.n):
            raise InstanceError("coordinates must be given for all sites and be unique")
        object.__setattr__(self, "sites", sites)
        terms = tuple(self.terms)
        for t in terms:
            if any(s < 0 or s >= self.n for s in t.support):
                raise InstanceError(f"support {t.support} out of range for n={self.n}")
            if t.matrix.shape[0] != self.d ** len(t.support):
                raise InstanceError(
                    f"term on {t.support} has dimension {t.matrix.shape[0]}, "
                    f"expected d^{len(t.support)}={self.d ** len(t.support)}"
                )
        object.__setattr__(self, "terms", terms)

    @property
    def m(self) -> int:
        return len(self.terms)

    @property
    def has_coords(self) -> bool:
        return self.n > 0 and self.sites[0].coords is not None

    def coords(self, i: int) -> tuple[int, ...] | None:
        return self.sites[i].coords

    @cached_property
    def overlap_graph(self) -> list[frozenset]:
        """For each term index, the indices of other terms sharing a site."""
        by_site: dict[int, list[int]] = {}
        for i, t in enumerate(self.terms):
            for s in t.support:
                by_site.setdefault(s, []).append(i)
        nbrs = [set() for _ in self.terms]
        for idx in by_site.values():
            for i in idx:
                nbrs[i].update(idx)
        return [frozenset(nb - {i}) for i, nb in enumerate(nbrs)]

    def terms_at(self, site: int) -> list[int]:
        return [i for i, t in enumerate(self.terms) if site in t.support]

    def with_terms(self, terms: Iterable[LocalTerm]) -> "LocalHamiltonian":
        return LocalHamiltonian(self.n, self.d, tuple(terms), self.sites)

    def scaled(self, c: float) -> "LocalHamiltonian":
        return self.with_terms(LocalTerm(t.support, c * t.matrix, t.label) for t in self.terms)

    def site_graph(self) -> list[set]:
        """Adjacency among sites induced by term supports (hop-count metric)."""
        adj = [set() for _ in range(self.n)]
        for t in self.terms:
            for a in t.support:
                adj[a].update(s for s in t.support if s != a)
        return adj

    def site_distance(self, a: Iterable[int], b: Iterable[int]) -> float:
        """Distance between two site sets: inf-norm on coords, else hop count."""
        a, b = list(a), list(b)
        if self.has_coords:
            return min(
                max(abs(p - q) for p, q in zip(self.coords(x), self.coords(y))) for x in a for y in b
            )
        adj = self.site_graph()
        dist = {x: 0 for x in a}
        queue = deque(a)
        targets = set(b)
        while queue:
            x = queue.popleft()
            if x in targets:
                return dist[x]
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        return math.inf

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        doc: dict = {"d": self.d, "n": self.n}
        if self.has_coords:
            doc["coords"] = [list(s.coords) for s in self.sites]
        doc["terms"] = [
            {
                "support": list(t.support),
                "pauli": None,
                "coeff": None,
                # + 0.0 folds negative zeros so equal matrices hash equally
                "matrix": [[[float(z.real) + 0.0, float(z.imag) + 0.0] for z in row] for row in t.matrix],
            }
            for t in self.terms
        ]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def content_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def parse_hamiltonian(document: str | dict) -> LocalHamiltonian:
    """Build a Hamiltonian from instance-file text (or an already-decoded dict)."""
    if isinstance(document, (str, bytes)):
        try:
            doc = json.loads(document)
        except json.JSONDecodeError as exc:
            raise InstanceError(f"instance is not valid JSON: {exc}") from exc
    else:
        doc = document
    if not isinstance(doc, dict):
        raise InstanceError("instance must be a JSON object")
    try:
        d = int(doc["d"])
        n = int(doc["n"])
        raw_terms = doc.get("terms", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"missing or invalid field: {exc}") from exc
    if not isinstance(raw_terms, list):
        raise InstanceError("'terms' must be a list")

    sites = ()
    if doc.get("coords") is not None:
        coords = doc["coords"]
        if len(coords) != n:
            raise InstanceError("coords length does not match n")
        sites = tuple(Site(i, tuple(int(c) for c in xy)) for i, xy in enumerate(coords))

    terms = []
    for k, raw in enumerate(raw_terms):
        if not isinstance(raw, dict) or "support" not in raw:
            raise InstanceError(f"term {k}: missing support")
        support = tuple(int(s) for s in raw["support"])
        if any(s < 0 or s >= n for s in support):
            raise InstanceError(f"term {k}: support index out of range")
        pauli = raw.get("pauli")
        matrix = raw.get("matrix")
        if (pauli is None) == (matrix is None):
            raise InstanceError(f"term {k}: exactly one of 'pauli' and 'matrix' is required")
        if pauli is not None:
            if d != 2:
                raise InstanceError(f"term {k}: Pauli strings require d=2")
            if len(pauli) != len(support):
                raise InstanceError(f"term {k}: Pauli word length does not match support")
            coeff = raw.get("coeff")
            coeff = 1.0 if coeff is None else float(coeff)
            mat = coeff * pauli_matrix(pauli)
            label = pauli
        else:
            try:
                arr = np.asarray(matrix, dtype=float)
            except (TypeError, ValueError) as exc:
                raise InstanceError(f"term {k}: malformed matrix") from exc
            if arr.ndim == 3 and arr.shape[-1] == 2:
                mat = np.empty(arr.shape[:2], dtype=complex)
                mat.real, mat.imag = arr[..., 0], arr[..., 1]
            elif arr.ndim == 2:
                mat = arr.astype(complex)
            else:
                raise InstanceError(f"term {k}: matrix entries must be [re, im] pairs")
            if mat.shape != (d ** len(support),) * 2:
                raise InstanceError(f"term {k}: matrix dimension does not match d^|support|")
            label = None
        terms.append(LocalTerm(support, mat, label))
    return LocalHamiltonian(n, d, tuple(terms), sites)


def load_hamiltonian(path) -> LocalHamiltonian:
    with open(path) as fh:
        return parse_hamiltonian(fh.read())


@dataclass(frozen=True)
class GeometryParams:
    kappa: int
    R: float
    g: float
    h: float
    m: int


def geometry_params(H: LocalHamiltonian) -> GeometryParams:
    """Locality, range, growth constant and maximal term norm.

    ``g`` is the tight data-dependent ratio max_x sum_{X containing x} |H_X| / h.
    """
    if not H.terms:
        return GeometryParams(kappa=0, R=0.0 if H.has_coords else math.inf, g=0.0, h=0.0, m=0)
    norms = [t.norm for t in H.terms]
    h = max(norms)
    load = [0.0] * H.n
    for t, nrm in zip(H.terms, norms):
        for s in t.support:
            load[s] += nrm
    g = max(load) / h if h > 0 else 0.0
    kappa = max(len(t.support) for t in H.terms)
    if H.has_coords:
        R = 0.0
        for t in H.terms:
            pts = [H.coords(s) for s in t.support]
            for p in pts:
                for q in pts:
                    R = max(R, float(max(abs(a - b) for a, b in zip(p, q))))
    else:
        R = math.inf
    return GeometryParams(kappa=kappa, R=R, g=g, h=h, m=H.m)


def site_loads(H: LocalHamiltonian) -> np.ndarray:
    load = np.zeros(H.n)
    for t in H.terms:
        for s in t.support:
            load[s] += t.norm
    return load


def restrict(H: LocalHamiltonian, region: Iterable[int], reindex: bool = False) -> LocalHamiltonian:
    """Keep exactly the terms whose support lies inside ``region``.

    With ``reindex`` the result lives on |region| sites, renumbered in
    ascending order; otherwise the site count is unchanged.
    """
    region = set(int(r) for r in region)
    bad = [r for r in region if r < 0 or r >= H.n]
    if bad:
        raise PreconditionError(f"region contains unknown sites {sorted(bad)}")
    kept = [t for t in H.terms if t.sites <= region]
    if not reindex:
        return H.with_terms(kept)
    order = sorted(region)
    new_index = {s: i for i, s in enumerate(order)}
    sites = tuple(Site(i, H.sites[s].coords) for i, s in enumerate(order))
    terms = tuple(LocalTerm(tuple(new_index[s] for s in t.support), t.matrix, t.label) for t in kept)
    return LocalHamiltonian(len(order), H.d, terms, sites)


def connection_distance(H: LocalHamiltonian, A: Iterable[int], B: Iterable[int]) -> float:
    """Fewest terms whose chained supports link site set A to site set B."""
    A, B = set(A), set(B)
    if not A or not B:
        raise PreconditionError("site sets must be non-empty")
    if A & B:
        raise PreconditionError("site sets overlap")
    nbrs = H.overlap_graph
    dist = {}
    queue = deque()
    for i, t in enumerate(H.terms):
        if t.sites & A:
            dist[i] = 1
            queue.append(i)
    while queue:
        i = queue.popleft()
        if H.terms[i].sites & B:
            return dist[i]
        for j in nbrs[i]:
            if j not in dist:
                dist[j] = dist[i] + 1
                queue.append(j)
    return math.inf


# -- random instances -----------------------------------------------------

DEFAULT_COUPLINGS = {"zz": (-1.0, 1.0), "x": (-1.0, 1.0)}


def grid_shape(n: int) -> tuple[int, int]:
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    return rows, n // rows


def random_instance(kind: str, n: int, couplings: dict | None = None, seed: int = 0,
                    edge_prob: float = 0.4) -> LocalHamiltonian:
    """Random qubit instance with two-body Pauli couplings and one-body fields.

    ``couplings`` maps Pauli words to (low, high) uniform ranges: two-letter
    words ("zz", "xx", ...) go on every edge, one-letter words on every site.
    ``kind`` is ``chain``, ``grid2d`` (most-square rows x cols factorisation of
    n, open boundaries) or ``graph`` (Erdos-Renyi, no coordinates).
    """
    if n < 1:
        raise PreconditionError("n must be >= 1")
    couplings = DEFAULT_COUPLINGS if couplings is None else couplings
    for lo_hi in couplings.values():
        if not all(math.isfinite(v) for v in lo_hi):
            raise PreconditionError("coupling ranges must be finite")
    rng = np.random.default_rng(seed)
    if kind == "chain":
        coords = [(i,) for i in range(n)]
        edges = [(i, i + 1) for i in range(n - 1)]
    elif kind == "grid2d":
        rows, cols = grid_shape(n)
        coords = [(i // cols, i % cols) for i in range(n)]
        edges = []
        for i in range(n):
            r, c = divmod(i, cols)
            if c + 1 < cols:
                edges.append((i, i + 1))
            if r + 1 < rows:
                edges.append((i, i + cols))
    elif kind == "graph":
        coords = None
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob]
    else:
        raise PreconditionError(f"unsupported instance kind {kind!r}")

    terms = []
    for word in sorted(couplings):
        lo, hi = couplings[word]
        w = word.upper()
        if len(w) == 2:
            for e in edges:
                terms.append(LocalTerm(e, rng.uniform(lo, hi) * pauli_matrix(w), w))
        elif len(w) == 1:
            for i in range(n):
                terms.append(LocalTerm((i,), rng.uniform(lo, hi) * pauli_matrix(w), w))
        else:
            raise PreconditionError(f"unsupported coupling word {word!r}")
    sites = tuple(Site(i, coords[i]) for i in range(n)) if coords else ()
    return LocalHamiltonian(n, 2, tuple(terms), sites)


def uniform_instance(kind: str, n: int, zz: float = 1.0, x: float = 0.0) -> LocalHamiltonian:
    """Translation-invariant ZZ (+ optional X field) chain or grid."""
    couplings = {"zz": (zz, zz)}
    if x:
        couplings["x"] = (x, x)
    return random_instance(kind, n, couplings, seed=0)
