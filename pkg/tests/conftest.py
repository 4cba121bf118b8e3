"""Shared fixtures, plus the per-criterion summary printed after the acceptance suite."""

from __future__ import annotations

import numpy as np
import pytest

from partfn.hamiltonian import LocalHamiltonian, LocalTerm, parse_hamiltonian, pauli_matrix

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion tag")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    num, title = crit
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "ran": False})
    if report.when == "call" or report.failed:
        entry["ran"] = True
    if report.failed:
        entry["ok"] = False


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        rep.criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] and e["ran"] else ("FAIL" if e["ran"] else "SKIP")
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {e['title']}")


def pauli_H(n: int, words: list[tuple[str, tuple[int, ...], float]], d: int = 2) -> LocalHamiltonian:
    terms = tuple(LocalTerm(sup, c * pauli_matrix(w), w) for w, sup, c in words)
    return LocalHamiltonian(n, d, terms)


@pytest.fixture
def z1():
    return parse_hamiltonian({"n": 1, "d": 2, "terms": [{"support": [0], "pauli": "Z"}]})


@pytest.fixture
def zz_chain4():
    return pauli_H(4, [("ZZ", (i, i + 1), 1.0) for i in range(3)])


def dense_reference(H: LocalHamiltonian) -> np.ndarray:
    """Independent dense build by explicit Kronecker products (site 0 leftmost)."""
    dim = H.d**H.n
    out = np.zeros((dim, dim), dtype=complex)
    for t in H.terms:
        # permute via tensor reshape: term on its support, identity elsewhere
        rest = [s for s in range(H.n) if s not in t.support]
        full = np.kron(t.matrix, np.eye(H.d ** len(rest)))
        order = list(t.support) + rest
        perm = [order.index(s) for s in range(H.n)]
        full = full.reshape((H.d,) * (2 * H.n)).transpose(perm + [p + H.n for p in perm]).reshape(dim, dim)
        out += full
    return out
