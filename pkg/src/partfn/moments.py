"""Exact moments Tr[H^k O_1...O_r] of local Hamiltonians.

Three engines compute the same quantity:

``enumerate``
    The reference: sum over all m^k ordered tuples of local terms.  A tuple's
    product factorizes over connected components of its support-overlap
    graph, so each component's ordered product trace is computed once and
    memoised.
``cluster``
    Linked-cluster evaluation of log Tr[e^{-beta H}] through order K from
    connected term sets of size <= K, followed by series exponentiation.
    Polynomial in n at fixed K; observables are not supported.
``dense``
    Per connected component of the whole Hamiltonian, a dense eigensolve on
    the component's sites.

``auto`` splits the Hamiltonian (plus observables) into connected
components and picks ``dense`` for a component that fits under the matrix
cap, ``cluster`` for an observable-free one that does not, and ``enumerate``
otherwise.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import BudgetExceededError, PreconditionError
from .hamiltonian import LocalHamiltonian, LocalTerm, embed
from .series import PowerSeries, exp_series, log_series, power_sum_series

METHODS = ("auto", "enumerate", "cluster", "dense")


def resolve_threads(threads: int | None = None) -> int:
    env = os.environ.get("PARTFN_THREADS")
    if env:
        return max(1, int(env))
    if threads:
        return max(1, int(threads))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class MomentConfig:
    k_max: int = 32
    matrix_cap: int = 2**20  # entries of the largest dense matrix formed
    max_tuples: int = 20_000_000
    max_sets: int = 2_000_000
    threads: int | None = None


DEFAULT_CONFIG = MomentConfig()


@dataclass(frozen=True)
class MomentValue:
    value: complex
    normalized: complex


def _fsum_complex(values) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def _check_cap(n_sites: int, d: int, cfg: MomentConfig):
    if d ** (2 * n_sites) > cfg.matrix_cap:
        raise BudgetExceededError(
            f"dense block on {n_sites} sites has {d ** (2 * n_sites)} entries, cap is {cfg.matrix_cap}"
        )


def _dense_on(ops: Sequence[LocalTerm], sites: Sequence[int], d: int) -> np.ndarray:
    dim = d ** len(sites)
    out = np.zeros((dim, dim), dtype=complex)
    for t in ops:
        out += embed(t.matrix, t.support, sites, d)
    return out


def _product_on(ops: Sequence[LocalTerm], sites: Sequence[int], d: int) -> np.ndarray:
    dim = d ** len(sites)
    out = np.eye(dim, dtype=complex)
    for t in ops:
        out = out @ embed(t.matrix, t.support, sites, d)
    return out


def _eigh(mat: np.ndarray):
    if not np.any(mat.imag):
        return np.linalg.eigh(mat.real)
    return np.linalg.eigh(mat)


def _eigvalsh(mat: np.ndarray):
    if not np.any(mat.imag):
        return np.linalg.eigvalsh(mat.real)
    return np.linalg.eigvalsh(mat)


def components(op_sites: Sequence[frozenset]) -> list[list[int]]:
    """Connected components (lists of op indices) of the support-overlap graph."""
    parent = list(range(len(op_sites)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for i, sites in enumerate(op_sites):
        for s in sites:
            if s in owner:
                a, b = find(owner[s]), find(i)
                if a != b:
                    parent[max(a, b)] = min(a, b)
            else:
                owner[s] = i
    groups: dict[int, list[int]] = {}
    for i in range(len(op_sites)):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values())


# -- reference enumeration ------------------------------------------------


class _TupleEnumerator:
    """Depth-first sum over ordered k-tuples of terms followed by fixed observables.

    The partial product of a tuple prefix is tracked as a set of components
    (site set, ordered op sequence).  Ops in different components commute, so
    a component's sequence is all that matters for its trace and the sum over
    continuations depends only on that canonical state; subtree sums are
    memoized on it.
    """

    def __init__(self, ops: Sequence[LocalTerm], n_terms: int, n_sites: int, d: int, cfg: MomentConfig):
        self.ops = list(ops)
        self.sites = [t.sites for t in self.ops]
        self.m = n_terms
        self.obs = list(range(n_terms, len(self.ops)))
        self.n = n_sites
        self.d = d
        self.cfg = cfg
        self.memo: dict[tuple, complex] = {}
        self.subtree: dict[tuple, complex] = {}

    def _trace(self, ids: tuple[int, ...]) -> complex:
        val = self.memo.get(ids)
        if val is None:
            sites = sorted(set().union(*(self.sites[i] for i in ids)))
            _check_cap(len(sites), self.d, self.cfg)
            val = complex(np.trace(_product_on([self.ops[i] for i in ids], sites, self.d)))
            self.memo[ids] = val
        return val

    def _add(self, state: tuple, op: int) -> tuple:
        sites = self.sites[op]
        merged_sites = set(sites)
        merged: tuple = ()
        rest = []
        for c in state:
            if c[0] & sites:
                merged_sites |= c[0]
                merged += c[1]
            else:
                rest.append(c)
        rest.append((frozenset(merged_sites), merged + (op,)))
        rest.sort(key=lambda c: c[1])
        return tuple(rest)

    def _leaf(self, state: tuple) -> complex:
        for op in self.obs:
            state = self._add(state, op)
        covered = set().union(*(c[0] for c in state)) if state else set()
        val = complex(self.d ** (self.n - len(covered)))
        for c in state:
            val *= self._trace(c[1])
            if val == 0:
                break
        return val

    def _sum(self, state: tuple, remaining: int) -> complex:
        if remaining == 0:
            return self._leaf(state)
        key = (state, remaining)
        val = self.subtree.get(key)
        if val is None:
            val = _fsum_complex([self._sum(self._add(state, i), remaining - 1) for i in range(self.m)])
            self.subtree[key] = val
        return val

    def unit(self, first: int, k: int) -> complex:
        return self._sum(self._add((), first), k - 1)

    def moment(self, k: int, threads: int) -> complex:
        if k == 0:
            return self._leaf(())
        if self.m == 0:
            return 0j
        if self.m**k > self.cfg.max_tuples:
            raise BudgetExceededError(f"{self.m}^{k} tuples exceed the enumeration budget {self.cfg.max_tuples}")
        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                parts = list(pool.map(lambda i: self.unit(i, k), range(self.m)))
        else:
            parts = [self.unit(i, k) for i in range(self.m)]
        return _fsum_complex(parts)


def _enumerate_series(ops, n_terms, n_sites, d, K, cfg) -> np.ndarray:
    en = _TupleEnumerator(ops, n_terms, n_sites, d, cfg)
    threads = resolve_threads(cfg.threads)
    out = np.zeros(K + 1, dtype=complex)
    for k in range(K + 1):
        out[k] = (-1) ** k * en.moment(k, threads) / math.factorial(k)
    return out


# -- dense per component ----------------------------------------------------


def _dense_series(terms, obs, sites, d, K, cfg) -> np.ndarray:
    _check_cap(len(sites), d, cfg)
    Hc = _dense_on(terms, sites, d)
    if not obs:
        return power_sum_series(_eigvalsh(Hc), K)
    E, U = _eigh(Hc)
    O = _product_on(obs, sites, d)
    weights = np.einsum("ij,ij->j", U.conj(), O @ U)
    return power_sum_series(E, K, weights)


# -- linked-cluster -----------------------------------------------------------


def connected_term_sets(nbrs: Sequence[frozenset], max_size: int, seeds=None, max_sets: int | None = None):
    """All connected sets (frozensets of term indices) of size <= max_size.

    With ``seeds`` only sets containing at least one seed term are produced.
    Returned in canonical order: by size, then sorted member tuple.
    """
    level = {frozenset([i]) for i in (range(len(nbrs)) if seeds is None else seeds)}
    found = []
    size = 1
    while level and size <= max_size:
        found.extend(sorted(level, key=sorted))
        if max_sets is not None and len(found) > max_sets:
            raise BudgetExceededError(f"more than {max_sets} connected sets")
        if size == max_size:
            break
        nxt = set()
        for c in level:
            frontier = set().union(*(nbrs[i] for i in c)) - c
            for u in frontier:
                nxt.add(c | {u})
        level = nxt
        size += 1
    return found


def _cluster_coefficient(size: int, n_neighbours: int, K: int) -> int:
    # sum_{j=0}^{K-size} (-1)^j C(N, j)
    r = K - size
    if n_neighbours == 0:
        return 1
    if r > n_neighbours - 1:
        return 0
    return (-1) ** r * math.comb(n_neighbours - 1, r)


def _cluster_log_series(H: LocalHamiltonian, K: int, cfg: MomentConfig) -> np.ndarray:
    """Coefficients of log(Tr[e^{-beta H}] / d^n) through order K."""
    nbrs = H.overlap_graph
    sets = connected_term_sets(nbrs, K, max_sets=cfg.max_sets)
    work = []
    for c in sets:
        frontier = set().union(*(nbrs[i] for i in c)) - c
        a = _cluster_coefficient(len(c), len(frontier), K)
        if a:
            work.append((a, sorted(c)))

    def local_log(item):
        a, members = item
        terms = [H.terms[i] for i in members]
        sites = sorted(set().union(*(t.sites for t in terms)))
        _check_cap(len(sites), H.d, cfg)
        E = _eigvalsh(_dense_on(terms, sites, H.d))
        zs = power_sum_series(E, K) / E.size
        return a * log_series(PowerSeries(zs)).coeffs

    threads = resolve_threads(cfg.threads)
    if threads > 1 and len(work) > 64:
        with ThreadPoolExecutor(threads) as pool:
            contribs = list(pool.map(local_log, work))
    else:
        contribs = [local_log(w) for w in work]
    out = np.zeros(K + 1, dtype=complex)
    if contribs:
        stack = np.array(contribs)
        for k in range(1, K + 1):
            out[k] = _fsum_complex(stack[:, k])
    return out


def _cluster_series(H: LocalHamiltonian, K: int, cfg: MomentConfig) -> np.ndarray:
    logtau = _cluster_log_series(H, K, cfg)
    return float(H.d) ** H.n * exp_series(PowerSeries(logtau)).coeffs


# -- public API ---------------------------------------------------------------


def trace_series(H: LocalHamiltonian, K: int, obs: Sequence[LocalTerm] = (), method: str = "auto",
                 config: MomentConfig = DEFAULT_CONFIG) -> PowerSeries:
    """Series sum_k (-beta)^k Tr[H^k O_1...O_r] / k! through order K."""
    if method not in METHODS:
        raise PreconditionError(f"unknown moment method {method!r}")
    if K < 0:
        raise PreconditionError("order must be non-negative")
    if K > config.k_max:
        raise BudgetExceededError(f"order {K} exceeds k_max={config.k_max}")
    obs = list(obs)
    for o in obs:
        if any(s < 0 or s >= H.n for s in o.support) or o.matrix.shape[0] != H.d ** len(o.support):
            raise PreconditionError(f"observable on {o.support} does not fit the Hamiltonian")

    if method == "enumerate":
        return PowerSeries(_enumerate_series(list(H.terms) + obs, H.m, H.n, H.d, K, config))
    if method == "cluster":
        if obs:
            raise PreconditionError("the cluster engine does not support observables")
        return PowerSeries(_cluster_series(H, K, config))

    ops = list(H.terms) + obs
    comps = components([o.sites for o in ops])
    covered = set().union(*(o.sites for o in ops)) if ops else set()
    total = np.zeros(K + 1, dtype=complex)
    total[0] = float(H.d) ** (H.n - len(covered))
    for comp in comps:
        terms = [ops[i] for i in comp if i < H.m]
        cobs = [ops[i] for i in comp if i >= H.m]
        sites = sorted(set().union(*(ops[i].sites for i in comp)))
        fits = H.d ** (2 * len(sites)) <= config.matrix_cap
        if method == "dense" or fits:
            part = _dense_series(terms, cobs, sites, H.d, K, config)
        else:
            sub = _component_hamiltonian(H, terms, sites)
            if not cobs:
                part = _cluster_series(sub, K, config)
            else:
                local_obs = [_relabel(o, sites) for o in cobs]
                part = _enumerate_series(list(sub.terms) + local_obs, sub.m, sub.n, sub.d, K, config)
        total = np.convolve(total, part)[: K + 1]
    return PowerSeries(total)


def _relabel(t: LocalTerm, sites: Sequence[int]) -> LocalTerm:
    index = {s: i for i, s in enumerate(sites)}
    return LocalTerm(tuple(index[s] for s in t.support), t.matrix, t.label)


def _component_hamiltonian(H: LocalHamiltonian, terms, sites) -> LocalHamiltonian:
    return LocalHamiltonian(len(sites), H.d, tuple(_relabel(t, sites) for t in terms))


def _moment_from_series(H, k, series: PowerSeries) -> MomentValue:
    value = complex((-1) ** k * math.factorial(k) * series.coeffs[k])
    return MomentValue(value, value / float(H.d) ** H.n)


def trace_moment(H: LocalHamiltonian, k: int, method: str = "auto",
                 config: MomentConfig = DEFAULT_CONFIG) -> MomentValue:
    """Tr[H^k]; k = 0 gives d^n."""
    if method == "enumerate":
        return weighted_trace_moment(H, k, (), method, config)
    return _moment_from_series(H, k, trace_series(H, k, (), method, config))


def weighted_trace_moment(H: LocalHamiltonian, k: int, obs: Sequence[LocalTerm], method: str = "auto",
                          config: MomentConfig = DEFAULT_CONFIG) -> MomentValue:
    """Tr[H^k O_1 ... O_r] with the observables multiplied on the right in order."""
    if k < 0:
        raise PreconditionError("order must be non-negative")
    if k > config.k_max:
        raise BudgetExceededError(f"order {k} exceeds k_max={config.k_max}")
    if method == "enumerate":
        en = _TupleEnumerator(list(H.terms) + list(obs), H.m, H.n, H.d, config)
        value = en.moment(k, resolve_threads(config.threads))
        return MomentValue(value, value / float(H.d) ** H.n)
    return _moment_from_series(H, k, trace_series(H, k, obs, method, config))


def z_series(H: LocalHamiltonian, K: int, method: str = "auto", config: MomentConfig = DEFAULT_CONFIG) -> PowerSeries:
    """Taylor coefficients a_k = (-1)^k Tr[H^k] / k! of Z(beta) at beta = 0."""
    return trace_series(H, K, (), method, config)
