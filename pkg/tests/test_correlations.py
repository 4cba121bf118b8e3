import math

import numpy as np
import pytest

from partfn import oracle
from partfn.correlations import covariance_series, decay_profile, site_observable, vanishing_order, write_profile_csv
from partfn.errors import PreconditionError
from partfn.hamiltonian import LocalHamiltonian, random_instance, uniform_instance

from conftest import pauli_H


def test_zeroth_coefficient_vanishes():
    H = random_instance("chain", 5, None, 1)
    cs = covariance_series(H, site_observable("Z", 0), site_observable("X", 4), 4)
    assert abs(cs.coeffs[0]) < 1e-15


def test_four_site_chain_vanishing():
    H = uniform_instance("chain", 4)
    cs = covariance_series(H, site_observable("Z", 0), site_observable("Z", 3), 5)
    assert cs.L_predicted == 3
    assert np.all(np.abs(cs.coeffs[:3]) <= 1e-10)
    assert abs(cs.coeffs[3]) > 1e-3
    assert vanishing_order(H, site_observable("Z", 0), site_observable("Z", 3), 5) == 3


def test_series_matches_finite_differences():
    H = uniform_instance("chain", 4)
    cs = covariance_series(H, site_observable("Z", 0), site_observable("Z", 3), 5)
    s = oracle.spectrum(H, keep_basis=True)
    O1, O2 = site_observable("Z", 0), site_observable("Z", 3)
    h = 0.05
    f = [oracle.covariance(s, j * h, O1, O2).real for j in range(-3, 4)]
    # central third difference / 3! approximates the order-3 coefficient
    d3 = (-f[1] + 2 * f[2] - 2 * f[4] + f[5]) / (2 * h**3)
    assert d3 / 6 == pytest.approx(cs.coeffs[3].real, rel=5e-2)


def test_adjacent_order_one():
    H = pauli_H(2, [("ZZ", (0, 1), 0.8), ("X", (0,), 0.3)])
    assert vanishing_order(H, site_observable("Z", 0), site_observable("Z", 1), 4) == 1


def test_isolated_site_never_correlates():
    H = pauli_H(3, [("ZZ", (0, 1), 1.0), ("X", (2,), 0.7)])
    cs = covariance_series(H, site_observable("Z", 0), site_observable("X", 2), 6)
    assert cs.L_predicted == math.inf
    assert vanishing_order(H, site_observable("Z", 0), site_observable("X", 2), 6) == math.inf
    assert np.all(np.abs(cs.coeffs) <= 1e-14)


def test_overlap_rejected():
    H = uniform_instance("chain", 3)
    with pytest.raises(PreconditionError):
        covariance_series(H, site_observable("Z", 0), site_observable("ZZ", [0, 1]), 3)


@pytest.mark.parametrize("seed", range(4))
def test_below_L_vanishes_random(seed):
    n = 4 + seed % 3
    H = random_instance("chain", n, None, seed)
    O1, O2 = site_observable("Z", 0), site_observable("Z", n - 1)
    cs = covariance_series(H, O1, O2, 7)
    assert np.all(np.abs(cs.coeffs[: int(cs.L_predicted)]) <= 1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_series_vs_oracle(seed):
    H = random_instance("chain", 6, None, seed)
    O1, O2 = site_observable("Z", 1), site_observable("X", 4)
    K = 8
    cs = covariance_series(H, O1, O2, K)
    s = oracle.spectrum(H, keep_basis=True)
    beta = 0.05
    exact = oracle.covariance(s, beta, O1, O2)
    # the next terms scale like (2 |H| beta)^{K+1}; bound the remainder geometrically
    x = 2 * np.linalg.norm(oracle.full_matrix(H), 2) * beta
    assert abs(cs(beta) - exact) <= 4 * x ** (K + 1) / (1 - x)


def test_symmetry():
    H = random_instance("grid2d", 6, None, 2)
    a = covariance_series(H, site_observable("Z", 0), site_observable("Z", 5), 6)
    b = covariance_series(H, site_observable("Z", 5), site_observable("Z", 0), 6)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-12


def test_profile_beta_zero_and_product():
    H = uniform_instance("chain", 6, 1.0, 1.0)
    p = decay_profile(H, 0.0, 0, [1, 2, 3, 4])
    assert np.all(np.abs(p.covariances) < 1e-15) and not p.has_fit
    prod = LocalHamiltonian(5, 2, tuple(random_instance("chain", 5, {"x": (-1, 1)}, 0).terms))
    q = decay_profile(prod, 0.7, 0, [1, 2, 3])
    assert np.all(np.abs(q.covariances) < 1e-15) and not q.has_fit


def test_profile_fit(tmp_path):
    H = uniform_instance("chain", 8, -1.0, 1.0)
    p = decay_profile(H, 0.3, 0, range(1, 7))
    assert p.has_fit and p.fitted_xi > 0 and p.r_squared > 0.9
    assert list(p.distances) == [1, 2, 3, 4, 5, 6]
    out = tmp_path / "p.csv"
    write_profile_csv(out, p)
    assert len(out.read_text().splitlines()) == 7
