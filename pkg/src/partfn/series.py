"""Truncated power series with complex coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True, eq=False)
class PowerSeries:
    """c_0 + c_1 x + ... + c_K x^K, with x named by ``var``.

    Coefficients beyond ``order`` are unknown, not zero, so binary operations
    truncate to the smaller order.
    """

    coeffs: np.ndarray
    var: str = "beta"

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex)).copy()
        if c.ndim != 1 or c.size == 0:
            raise PreconditionError("a power series needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise PreconditionError("power series coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    def __len__(self):
        return self.coeffs.size

    def __getitem__(self, k):
        return self.coeffs[k]

    def __repr__(self):
        return f"PowerSeries({self.coeffs.tolist()!r}, var={self.var!r})"

    def truncate(self, K: int) -> "PowerSeries":
        return PowerSeries(self.coeffs[: K + 1], self.var)

    def _pair(self, other):
        if not isinstance(other, PowerSeries):
            other = PowerSeries([other], self.var)
            return self.coeffs, np.concatenate([other.coeffs, np.zeros(self.order)])
        K = min(self.order, other.order)
        return self.coeffs[: K + 1], other.coeffs[: K + 1]

    def __add__(self, other):
        a, b = self._pair(other)
        return PowerSeries(a + b, self.var)

    __radd__ = __add__

    def __neg__(self):
        return PowerSeries(-self.coeffs, self.var)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs * other, self.var)
        a, b = self._pair(other)
        return PowerSeries(np.convolve(a, b)[: a.size], self.var)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, PowerSeries):
            return PowerSeries(self.coeffs / other, self.var)
        return self * other.reciprocal()

    def reciprocal(self) -> "PowerSeries":
        a = self.coeffs
        if a[0] == 0:
            raise PreconditionError("cannot invert a series with zero constant term")
        r = np.zeros_like(a)
        r[0] = 1 / a[0]
        for k in range(1, a.size):
            r[k] = -np.dot(a[1 : k + 1], r[k - 1 :: -1][:k]) / a[0]
        return PowerSeries(r, self.var)

    def __call__(self, x):
        """Horner evaluation at a scalar or array."""
        acc = np.zeros_like(np.asarray(x, dtype=complex)) + self.coeffs[-1]
        for c in self.coeffs[-2::-1]:
            acc = acc * x + c
        return acc[()] if np.ndim(acc) == 0 else acc

    def partial_sums(self, x) -> np.ndarray:
        """Values of sum_{k<=K'} c_k x^k for K' = 0..order."""
        return np.cumsum(self.coeffs * np.asarray(x, dtype=complex) ** np.arange(self.coeffs.size))

    def compose(self, inner: "PowerSeries") -> "PowerSeries":
        """self(inner(x)) for an inner series with zero constant term."""
        if inner.coeffs[0] != 0:
            raise PreconditionError("inner series must vanish at the origin")
        K = min(self.order, inner.order)
        inner = inner.truncate(K)
        out = np.zeros(K + 1, dtype=complex)
        power = np.zeros(K + 1, dtype=complex)
        power[0] = 1
        for c in self.coeffs[: K + 1]:
            out += c * power
            power = np.convolve(power, inner.coeffs)[: K + 1]
        return PowerSeries(out, self.var)


def log_series(g: PowerSeries) -> PowerSeries:
    """Taylor coefficients of log g from those of g.

    Solves the triangular system obtained from g' = g f' order by order,
    k g_k = sum_{j=1..k} j f_j g_{k-j}; the constant term is the principal log.
    """
    a = g.coeffs
    if a[0] == 0:
        raise PreconditionError("log of a series with zero constant term")
    K = a.size - 1
    f = np.zeros(K + 1, dtype=complex)
    f[0] = np.log(a[0])
    jf = np.zeros(K + 1, dtype=complex)
    for k in range(1, K + 1):
        acc = k * a[k] - np.dot(jf[1:k], a[k - 1 : 0 : -1])
        f[k] = acc / (k * a[0])
        jf[k] = k * f[k]
    return PowerSeries(f, g.var)


def exp_series(f: PowerSeries) -> PowerSeries:
    """Coefficients of exp f (inverse of :func:`log_series`)."""
    c = f.coeffs
    K = c.size - 1
    b = np.zeros(K + 1, dtype=complex)
    b[0] = np.exp(c[0])
    jc = np.arange(K + 1) * c
    for k in range(1, K + 1):
        b[k] = np.dot(jc[1 : k + 1], b[k - 1 :: -1][:k]) / k
    return PowerSeries(b, f.var)


def power_sum_series(eigenvalues: np.ndarray, K: int, weights=None, sign: float = -1.0) -> np.ndarray:
    """sum_j w_j (sign * E_j)^k / k! for k = 0..K (EGF of weighted power sums)."""
    E = np.asarray(eigenvalues) * sign
    w = np.ones(E.shape) if weights is None else np.asarray(weights)
    out = np.zeros(K + 1, dtype=complex)
    term = w.astype(complex)
    for k in range(K + 1):
        if k:
            term = term * E / k
        out[k] = math.fsum(term.real) + 1j * math.fsum(term.imag)
    return out
