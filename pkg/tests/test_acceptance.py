"""Acceptance suite: one test group per criterion, summarised after the run."""

from __future__ import annotations

import math
import time
from functools import lru_cache

import numpy as np
import pytest

from partfn import oracle
from partfn.cluster import (
    beta0, count_by_size, disk_scan, enumerate_connected_sets, expansion_radius, expansion_residual,
    site_removal_check,
)
from partfn.correlations import covariance_series, decay_profile, site_observable
from partfn.extrapolation import estimate_log_partition, truncation_bound
from partfn.hamiltonian import connection_distance, geometry_params, parse_hamiltonian, random_instance, uniform_instance
from partfn.moments import MomentConfig, trace_moment
from partfn.series import PowerSeries
from partfn.xxz import (
    XXZInstance, lee_yang_roots, random_ferromagnet, sector_coefficients, xxz_estimate, xxz_hamiltonian,
)

SEEDS = range(20)


def random_n8(seed):
    return random_instance("chain" if seed % 2 == 0 else "grid2d", 8, None, seed)


@lru_cache(maxsize=None)
def extrapolation_run(seed):
    H = random_n8(seed)
    beta = beta0(geometry_params(H)) / 2
    t0 = time.perf_counter()
    est = estimate_log_partition(H, beta, 1e-5)
    elapsed = time.perf_counter() - t0
    exact = oracle.log_partition(oracle.spectrum(H), beta)
    return H, beta, est, exact, elapsed


# 1 ---------------------------------------------------------------------------------

@pytest.mark.criterion(1, "extrapolation correctness at beta0/2, eps=1e-5, K<=30, <120 s")
@pytest.mark.parametrize("seed", SEEDS)
def test_extrapolation_correctness(seed):
    H, beta, est, exact, elapsed = extrapolation_run(seed)
    assert est.disk.b == pytest.approx(2.0)
    assert abs(est.value - exact) <= 1e-5
    assert est.certified_error <= 1e-5
    assert est.K <= 30
    assert elapsed < 120


# 2 ---------------------------------------------------------------------------------

@pytest.mark.criterion(2, "observed error within the truncation bound for every K from 2 to K_final")
@pytest.mark.parametrize("seed", SEEDS)
def test_truncation_bound_soundness(seed):
    H, beta, est, exact, _ = extrapolation_run(seed)
    violations = []
    for K in range(2, est.K + 1):
        err = abs(PowerSeries(est.series.coeffs[: K + 1])(beta) - exact)
        bound = truncation_bound("bounded", est.disk.M, est.disk.b, K)
        if err > bound:
            violations.append((K, err, bound))
    assert not violations


# 3 ---------------------------------------------------------------------------------

@pytest.mark.criterion(3, "zero-free disk: 64x64 grid over |beta| <= beta0, log|Z| bound")
@pytest.mark.parametrize("seed", SEEDS)
def test_zero_free_disk(seed):
    scan = disk_scan(random_n8(seed), 64)
    assert scan["points"] > 0
    assert scan["min_abs_Z"] > 0
    assert scan["max_excess"] <= 1e-9


# 4 ---------------------------------------------------------------------------------

@pytest.mark.criterion(4, "site-removal bound for |X| in {1, 2}, beta in {0.1, 0.5, 1.0}")
@pytest.mark.parametrize("kind,n,seed", [("chain", 4, 0), ("chain", 6, 1), ("chain", 8, 2),
                                         ("grid2d", 4, 3), ("grid2d", 6, 4), ("grid2d", 8, 5)])
def test_site_removal(kind, n, seed):
    H = random_instance(kind, n, None, seed)
    rng = np.random.default_rng(100 + seed)
    for beta in (0.1, 0.5, 1.0):
        for size in (1, 2):
            for _ in range(3):
                X = rng.choice(n, size=size, replace=False).tolist()
                val, bound = site_removal_check(H, X, beta)
                assert val <= bound + 1e-9, (beta, X, val, bound)


# 5 ---------------------------------------------------------------------------------

@pytest.mark.criterion(5, "cluster-expansion identity on the 2x2 ZZ grid")
def test_cluster_expansion_identity():
    H = uniform_instance("grid2d", 4, zz=1.0)
    beta = 0.5 * expansion_radius(geometry_params(H))
    res = [expansion_residual(H, 0, beta, 6, p) for p in (4, 8, 12)]
    assert res[2] <= 1e-6
    assert res[0] > res[1] > res[2]


# 6 ---------------------------------------------------------------------------------

@pytest.mark.criterion(6, "connected-set counts at most g^k for k <= 5")
@pytest.mark.parametrize("kind,n", [("chain", 8), ("grid2d", 4)])
def test_connected_set_counts(kind, n):
    H = uniform_instance(kind, n, zz=1.0, x=1.0)
    g = geometry_params(H).g
    violations = []
    for x0 in range(n):
        for k, c in count_by_size(enumerate_connected_sets(H, x0, 5)).items():
            if c > g**k:
                violations.append((x0, k, c))
    assert not violations


# 7 ---------------------------------------------------------------------------------

@pytest.mark.criterion(7, "trace moments match the spectrum for n <= 8, k <= 6")
@pytest.mark.parametrize("kind,n,seed", [("chain", 3, 0), ("chain", 5, 1), ("chain", 8, 2),
                                         ("grid2d", 4, 3), ("grid2d", 6, 4), ("grid2d", 8, 5),
                                         ("graph", 6, 6), ("graph", 8, 7)])
def test_moment_oracle_equivalence(kind, n, seed):
    H = random_instance(kind, n, {"zz": (-1, 1), "xx": (-0.5, 0.5), "x": (-1, 1), "z": (-1, 1)}, seed)
    E = oracle.spectrum(H).energies
    for k in range(7):
        ref = math.fsum(E**k)
        scale = math.fsum(np.abs(E) ** k)
        val = trace_moment(H, k).value
        assert abs(val - ref) <= 1e-9 * scale, (k, val, ref)


@pytest.mark.criterion(7, "trace moments match the spectrum for n <= 8, k <= 6")
def test_moment_performance_gate():
    H = random_instance("chain", 32, None, 11)
    t0 = time.perf_counter()
    val = trace_moment(H, 8, config=MomentConfig(threads=8))
    assert time.perf_counter() - t0 < 60
    assert np.isfinite(val.value) and val.value.real > 0


# 8 ---------------------------------------------------------------------------------

def ferro(seed):
    return random_ferromagnet(4 + seed % 7, seed, kind="chain" if seed % 2 == 0 else "graph")


@pytest.mark.criterion(8, "XXZ sector identity against the dense oracle")
@pytest.mark.parametrize("seed", SEEDS)
def test_xxz_sector_identity(seed):
    base = ferro(seed)
    for beta in (0.5, 1.0):
        inst = XXZInstance(base.n, base.edges, base.J, base.Jzz, beta)
        poly = sector_coefficients(inst)
        for mu in (-1.0, 0.3, 2.0):
            ref = oracle.partition_function(oracle.spectrum(xxz_hamiltonian(inst, mu)), beta).real
            assert abs(poly.partition_function(mu) - ref) <= 1e-10 * abs(ref)


# 9 ---------------------------------------------------------------------------------

@pytest.mark.criterion(9, "Lee-Yang roots on the unit circle")
@pytest.mark.parametrize("seed", SEEDS)
def test_lee_yang_circle(seed):
    _, dev = lee_yang_roots(sector_coefficients(ferro(seed)))
    assert dev <= 1e-8


@pytest.mark.criterion(9, "Lee-Yang roots on the unit circle")
def test_lee_yang_two_site_closed_form():
    poly = sector_coefficients(XXZInstance(2, ((0, 1),), [1.0], [1.0], beta=1.0))
    e = math.e
    np.testing.assert_allclose(poly.q, [e, e + math.exp(-3), e], rtol=1e-12, atol=0)


# 10 --------------------------------------------------------------------------------

@pytest.mark.criterion(10, "XXZ truncated estimate at z=0.5 within n/((K+1) 2^K)")
def test_xxz_truncated_estimate():
    inst = random_ferromagnet(8, 7, beta=1.0)
    poly = sector_coefficients(inst)
    mu = math.log(0.5) / inst.beta
    for K in range(2, 26):
        est = xxz_estimate(poly, mu, 1.0, K=K)
        bound = 8 / ((K + 1) * 2**K)
        assert est.certified_error == pytest.approx(bound, rel=1e-12)
        assert abs(est.value - est.exact) <= bound, K


# 11 --------------------------------------------------------------------------------

@pytest.mark.criterion(11, "covariance series vanishes below the connection distance")
def test_covariance_structure():
    hits = 0
    for i in range(10):
        n = 4 + i % 3
        L = 2 + i % 2
        H = random_instance("chain", n, {"zz": (-1, 1), "xx": (-1, 1), "x": (-1, 1)}, 500 + i)
        O1, O2 = site_observable("Z", 0), site_observable("Z", L)
        assert connection_distance(H, [0], [L]) == L
        cov = covariance_series(H, O1, O2, L + 1)
        c = cov.coeffs
        assert abs(c[0]) <= 1e-14
        assert np.all(np.abs(c[:L]) <= 1e-10), (i, c)
        hits += abs(c[L]) > 1e-10 * cov.scale
    assert hits >= 8


# 12 --------------------------------------------------------------------------------

@pytest.mark.criterion(12, "decay profile on the 12-site ZZ+X chain at beta=0.2")
def test_decay_profile():
    H = uniform_instance("chain", 12, zz=1.0, x=1.0)
    prof = decay_profile(H, 0.2, 0, range(1, 9))
    mags = np.abs(prof.covariances)
    np.testing.assert_array_equal(prof.distances, np.arange(1, 9))
    assert np.all(np.diff(mags) < 0)
    assert prof.has_fit and prof.r_squared >= 0.95


# 13 --------------------------------------------------------------------------------

@pytest.mark.criterion(13, "Fisher-zero scans")
def test_fisher_zero_single_qubit():
    H = parse_hamiltonian({"n": 1, "d": 2, "terms": [{"support": [0], "pauli": "Z"}]})
    zeros = oracle.fisher_zero_scan(oracle.spectrum(H), (-0.5, 0.5, 0.0, 2.0))
    assert len(zeros) == 1
    assert abs(zeros[0].location - 1j * math.pi / 2) <= 1e-9


@pytest.mark.criterion(13, "Fisher-zero scans")
@pytest.mark.parametrize("seed", SEEDS)
def test_fisher_zero_scan_empty_inside_disk(seed):
    H = random_n8(seed)
    half = 0.999 * beta0(geometry_params(H)) / math.sqrt(2)
    assert oracle.fisher_zero_scan(oracle.spectrum(H), (-half, half, -half, half)) == []
