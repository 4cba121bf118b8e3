"""Dense exact diagonalization: ground truth for small systems."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import sparse

from .errors import BudgetExceededError, PreconditionError
from .hamiltonian import LocalHamiltonian, LocalTerm

DIMENSION_CAP = 4096


def embed_sparse(term: LocalTerm, n: int, d: int) -> sparse.csr_matrix:
    """The term as a sparse d^n x d^n operator (site 0 = most significant digit)."""
    dim = d**n
    k = len(term.support)
    states = np.arange(dim)
    digits = [(states // d ** (n - 1 - s)) % d for s in term.support]
    local = np.zeros(dim, dtype=np.int64)
    for dig in digits:
        local = local * d + dig
    # state with the support digits zeroed
    base = states.copy()
    for s, dig in zip(term.support, digits):
        base -= dig * d ** (n - 1 - s)
    place = np.zeros(d**k, dtype=np.int64)
    for a in range(d**k):
        rem = a
        for pos in range(k - 1, -1, -1):
            place[a] += (rem % d) * d ** (n - 1 - term.support[pos])
            rem //= d
    rows, cols, vals = [], [], []
    mat = term.matrix
    for a, b in zip(*np.nonzero(mat)):
        sel = local == b
        cols.append(states[sel])
        rows.append(base[sel] + place[a])
        vals.append(np.full(int(sel.sum()), mat[a, b]))
    if not rows:
        return sparse.csr_matrix((dim, dim), dtype=complex)
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )


def full_matrix(H: LocalHamiltonian, cap: int = DIMENSION_CAP) -> np.ndarray:
    dim = H.d**H.n
    if dim > cap:
        raise BudgetExceededError(f"dimension {dim} exceeds the dense cap {cap}")
    out = sparse.csr_matrix((dim, dim), dtype=complex)
    for t in H.terms:
        out = out + embed_sparse(t, H.n, H.d)
    dense = out.toarray()
    if not np.any(dense.imag):
        return dense.real
    return dense


def operator_product(obs: Sequence[LocalTerm], n: int, d: int) -> sparse.csr_matrix:
    out = sparse.identity(d**n, dtype=complex, format="csr")
    for o in obs:
        out = out @ embed_sparse(o, n, d)
    return out


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    energies: np.ndarray
    basis: np.ndarray | None
    n: int
    d: int

    @property
    def dim(self) -> int:
        return self.energies.size


@dataclass(frozen=True)
class FisherZero:
    location: complex
    residual: float
    multiplicity_hint: int


def spectrum(H: LocalHamiltonian, keep_basis: bool = False, cap: int = DIMENSION_CAP) -> SpectralDecomposition:
    """Full spectrum (ascending) of H, optionally with eigenvectors as columns."""
    M = full_matrix(H, cap)
    if keep_basis:
        E, U = np.linalg.eigh(M)
    else:
        E, U = np.linalg.eigvalsh(M), None
    return SpectralDecomposition(E, U, H.n, H.d)


def partition_function(s: SpectralDecomposition, beta: complex) -> complex:
    """sum_k exp(-beta E_k) with compensated summation."""
    terms = np.exp(-complex(beta) * s.energies)
    return complex(math.fsum(terms.real), math.fsum(terms.imag))


def partition_function_grid(s: SpectralDecomposition, betas: np.ndarray) -> np.ndarray:
    betas = np.asarray(betas, dtype=complex)
    flat = betas.reshape(-1)
    out = np.empty(flat.shape, dtype=complex)
    for i in range(0, flat.size, 256):
        chunk = np.exp(-np.outer(flat[i : i + 256], s.energies))
        out[i : i + 256] = chunk.sum(axis=1)
    return out.reshape(betas.shape)


def log_partition(s: SpectralDecomposition, beta: complex) -> complex:
    """log Z, shifted by the ground energy so large real beta does not overflow.

    The imaginary part is the principal branch of the shifted sum, so it is
    continuous along paths from beta = 0 that avoid zeros only when |Im| stays
    small; callers comparing against series estimates use real beta.
    """
    beta = complex(beta)
    e0 = s.energies[0] if beta.real >= 0 else s.energies[-1]
    terms = np.exp(-beta * (s.energies - e0))
    total = complex(math.fsum(terms.real), math.fsum(terms.imag))
    return -beta * e0 + np.log(total)


def free_energy(s: SpectralDecomposition, beta: float) -> float:
    if beta == 0:
        raise PreconditionError("free energy needs beta > 0")
    if beta < 0:
        raise PreconditionError("free energy is defined for positive beta")
    return float(-log_partition(s, beta).real / beta)


def gibbs_expectation(s: SpectralDecomposition, beta: float, obs: Sequence[LocalTerm]) -> complex:
    """Tr[rho_beta O_1 ... O_r]."""
    if s.basis is None:
        raise PreconditionError("Gibbs expectations need the eigenbasis (keep_basis=True)")
    beta = float(beta)
    w = np.exp(-beta * (s.energies - s.energies[0]))
    w = w / math.fsum(w)
    if not obs:
        return complex(1.0)
    O = operator_product(obs, s.n, s.d)
    diag = np.einsum("ij,ij->j", s.basis.conj(), O @ s.basis)
    vals = w * diag
    return complex(math.fsum(vals.real), math.fsum(vals.imag))


def covariance(s: SpectralDecomposition, beta: float, O1: LocalTerm, O2: LocalTerm) -> complex:
    """Tr[rho O1 O2] - Tr[rho O1] Tr[rho O2] for observables on disjoint supports."""
    if O1.sites & O2.sites:
        raise PreconditionError("observable supports overlap")
    return (
        gibbs_expectation(s, beta, [O1, O2])
        - gibbs_expectation(s, beta, [O1]) * gibbs_expectation(s, beta, [O2])
    )


def _local_minima(vals: np.ndarray) -> list[tuple[int, int]]:
    padded = np.pad(vals, 1, constant_values=np.inf)
    ny, nx = vals.shape
    out = []
    for i in range(ny):
        for j in range(nx):
            window = padded[i : i + 3, j : j + 3]
            if vals[i, j] <= window.min():
                out.append((i, j))
    return out


def fisher_zero_scan(s: SpectralDecomposition, rect: tuple[float, float, float, float],
                     grid: tuple[int, int] = (64, 64), tol: float = 1e-10,
                     dedup: float = 1e-6, max_iter: int = 60) -> list[FisherZero]:
    """Zeros of Z(beta) inside rect = (re_min, re_max, im_min, im_max).

    Newton iterations are seeded at grid-local minima of |Z|; a zero is
    accepted when |Z| <= tol * d^n and it lies inside the rectangle.
    Non-converging seeds are dropped.
    """
    re0, re1, im0, im1 = map(float, rect)
    if not all(map(math.isfinite, (re0, re1, im0, im1))) or re1 < re0 or im1 < im0:
        raise PreconditionError("rectangle must be finite and ordered")
    nx, ny = grid
    xs = np.linspace(re0, re1, nx)
    ys = np.linspace(im0, im1, ny)
    B = xs[None, :] + 1j * ys[:, None]
    Z = partition_function_grid(s, B)
    scale = float(s.d) ** s.n
    found: list[list] = []
    E = s.energies
    for i, j in _local_minima(np.abs(Z)):
        b = B[i, j]
        for _ in range(max_iter):
            e = np.exp(-b * E)
            z = e.sum()
            dz = -(E * e).sum()
            if dz == 0:
                break
            step = z / dz
            b = b - step
            if not np.isfinite(b):
                break
            if abs(step) < 1e-15 * max(1.0, abs(b)):
                break
        resid = abs(partition_function(s, b))
        if resid > tol * scale:
            continue
        if not (re0 - 1e-12 <= b.real <= re1 + 1e-12 and im0 - 1e-12 <= b.imag <= im1 + 1e-12):
            continue
        for entry in found:
            if abs(entry[0] - b) < dedup:
                entry[2] += 1
                break
        else:
            found.append([b, resid, 1])
    found.sort(key=lambda e: (e[0].imag, e[0].real))
    return [FisherZero(complex(b), float(r), int(c)) for b, r, c in found]


def write_zero_csv(path, zeros: Sequence[FisherZero]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "abs_Z"])
        for z in zeros:
            w.writerow([repr(z.location.real), repr(z.location.imag), repr(z.residual)])


def write_grid_csv(path, s: SpectralDecomposition, rect, grid=(64, 64)):
    re0, re1, im0, im1 = rect
    xs = np.linspace(re0, re1, grid[0])
    ys = np.linspace(im0, im1, grid[1])
    B = xs[None, :] + 1j * ys[:, None]
    Z = partition_function_grid(s, B)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "abs_Z"])
        for b, z in zip(B.ravel(), Z.ravel()):
            w.writerow([repr(float(b.real)), repr(float(b.imag)), repr(float(abs(z)))])
