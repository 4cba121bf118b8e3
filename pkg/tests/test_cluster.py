import math
import warnings

import numpy as np
import pytest

from partfn import oracle
from partfn.cluster import (
    ConnectedSet,
    beta0,
    cluster_weight,
    count_by_size,
    disk_scan,
    enumerate_connected_sets,
    expansion_radius,
    expansion_residual,
    log_bound,
    ratio_bound_check,
    site_removal_check,
)
from partfn.errors import BudgetExceededError, PreconditionError
from partfn.hamiltonian import GeometryParams, geometry_params, random_instance, uniform_instance

from conftest import pauli_H


def gp(g, h, kappa):
    return GeometryParams(kappa=kappa, R=1.0, g=g, h=h, m=1)


def test_beta0_values():
    assert beta0(gp(2, 1, 2)) == pytest.approx(0.0183940, abs=1e-7)
    assert beta0(gp(1, 1, 1)) == pytest.approx(0.0735759, abs=1e-7)
    assert beta0(gp(2, 2, 2)) == pytest.approx(beta0(gp(2, 1, 2)) / 2)


def test_beta0_degenerate_warns():
    with pytest.warns(UserWarning):
        assert beta0(gp(0, 0, 0)) == math.inf


def test_enumerate_examples():
    single = pauli_H(1, [("Z", (0,), 1.0)])
    sets = enumerate_connected_sets(single, 0, 2)
    assert len(sets) == 1 and sets[0].supports == ((0,),)
    chain = pauli_H(3, [("ZZ", (0, 1), 1.0), ("ZZ", (1, 2), 1.0)])
    assert [c.supports for c in enumerate_connected_sets(chain, 1, 1)] == [((0, 1),), ((1, 2),)]
    iso = pauli_H(3, [("ZZ", (0, 1), 1.0)])
    assert enumerate_connected_sets(iso, 2, 3) == []
    with pytest.raises(PreconditionError):
        enumerate_connected_sets(iso, 5, 1)


def test_enumerated_sets_are_connected_and_distinct():
    H = uniform_instance("grid2d", 6, 1.0, 1.0)
    sets = enumerate_connected_sets(H, 0, 4)
    keys = {c.members for c in sets}
    assert len(keys) == len(sets)
    for c in sets:
        assert c.is_connected() and 0 in c.sites


def test_enumeration_budget():
    H = uniform_instance("grid2d", 9, 1.0, 1.0)
    with pytest.raises(BudgetExceededError):
        enumerate_connected_sets(H, 4, 5, budget=10)


@pytest.mark.parametrize("kind,n", [("chain", 5), ("grid2d", 4), ("grid2d", 6)])
def test_count_bound(kind, n):
    H = uniform_instance(kind, n, 1.0, 1.0)
    g = geometry_params(H).g
    for x0 in range(n):
        for k, c in count_by_size(enumerate_connected_sets(H, x0, 5)).items():
            assert c <= g**k


def test_weight_single_term_closed_form():
    H = pauli_H(1, [("Z", (0,), 0.7)])
    cset = enumerate_connected_sets(H, 0, 1)[0]
    beta = 0.3 + 0.1j
    w = cluster_weight(H, cset, beta, 30)
    assert w.value == pytest.approx(2 * np.cosh(0.7 * beta) - 2, abs=1e-14)
    assert cluster_weight(H, cset, 0, 5).value == 0
    with pytest.raises(PreconditionError):
        cluster_weight(H, ConnectedSet((0, 0), ((0,), (0,)), 0), 0.1, 1)


@pytest.mark.parametrize("seed", range(3))
def test_weight_envelope(seed):
    H = random_instance("chain", 5, None, seed)
    g = geometry_params(H)
    r = beta0(g)
    rng = np.random.default_rng(seed)
    sets = enumerate_connected_sets(H, 2, 3)
    for _ in range(10):
        beta = r * rng.uniform() * np.exp(2j * np.pi * rng.uniform())
        for c in sets:
            w = cluster_weight(H, c, beta, 14)
            assert abs(w.value) <= w.envelope + w.tail_bound + 1e-15


def test_expansion_exact_for_single_term():
    H = pauli_H(3, [("ZZ", (0, 1), 1.0), ("X", (2,), 0.5), ("XX", (1, 2), 0.4)])
    solo = pauli_H(2, [("Z", (0,), 1.0), ("X", (1,), 1.0)])
    assert expansion_residual(solo, 0, 0.2, 1, 30) <= 1e-10
    assert expansion_residual(H, 0, 0.0, 2, 4) == 0


def test_expansion_converges_on_grid():
    H = uniform_instance("grid2d", 4)
    g = geometry_params(H)
    beta = 0.5 * expansion_radius(g)
    res = [expansion_residual(H, 0, beta, 6, p) for p in (4, 8, 12)]
    assert res[0] > res[1] > res[2] and res[2] <= 1e-6


def test_ratio_bound():
    H = pauli_H(1, [("Z", (0,), 1.0)])
    rep = ratio_bound_check(H, 0.05)
    assert rep["max_log_ratio"] == pytest.approx(abs(math.log(math.cosh(0.05))))
    assert rep["violations"] == 0
    assert ratio_bound_check(H, 0.0)["max_log_ratio"] == 0
    R = random_instance("chain", 6, None, 1)
    rep = ratio_bound_check(R, beta0(geometry_params(R)))
    assert rep["violations"] == 0 and rep["in_disk"]


def test_site_removal_multi_site():
    H = random_instance("grid2d", 6, None, 2)
    for beta in (0.1, 0.5, 1.0):
        for X in ([0], [1, 4], [0, 2, 5]):
            val, bound = site_removal_check(H, X, beta)
            assert val <= bound + 1e-9


def test_disk_scan():
    H = random_instance("chain", 6, None, 3)
    rep = disk_scan(H, n_grid=32)
    assert rep["min_abs_Z"] > 0 and rep["max_excess"] <= 1e-9
    assert log_bound(geometry_params(H), 0, 6, 2) == pytest.approx(6 * math.log(2))
