"""Truncated power series in ``x = 1/z`` (Laurent series at ``z = inf``)."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

Number = Union[int, float, complex, Fraction]


@dataclass(frozen=True)
class LaurentSeries:
    """Coefficients ``c_0..c_N`` of ``sum_l c_l z**-l``."""

    coeffs: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or len(c) == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError(f"non-finite coefficient in series {self.label!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __len__(self):
        return len(self.coeffs)

    @property
    def N(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, l):
        return self.coeffs[l]

    def __call__(self, z):
        """Evaluate the truncated sum at ``z`` (scalar or array)."""
        z = np.asarray(z, dtype=complex)
        return np.polyval(self.coeffs[::-1], 1.0 / z)

    @property
    def real(self) -> np.ndarray:
        return self.coeffs.real.copy()

    def _wrap(self, coeffs, label):
        return LaurentSeries(coeffs, label)

    def __add__(self, other):
        if isinstance(other, LaurentSeries):
            n = min(len(self), len(other))
            return self._wrap(self.coeffs[:n] + other.coeffs[:n], f"({self.label}+{other.label})")
        c = self.coeffs.copy()
        c[0] += other
        return self._wrap(c, self.label)

    __radd__ = __add__

    def __neg__(self):
        return self._wrap(-self.coeffs, f"-{self.label}")

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, LaurentSeries):
            n = min(len(self), len(other))
            return self._wrap(np.convolve(self.coeffs[:n], other.coeffs[:n])[:n],
                              f"{self.label}*{other.label}")
        return self._wrap(self.coeffs * other, self.label)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, LaurentSeries):
            return series_div(self, other)
        return self._wrap(self.coeffs / other, self.label)

    def shifted(self, k: int = 1) -> "LaurentSeries":
        """Multiply by ``z**-k`` keeping the length."""
        c = np.zeros_like(self.coeffs)
        c[k:] = self.coeffs[:len(c) - k]
        return self._wrap(c, f"z^-{k}{self.label}")

    def times_one_plus_x(self) -> "LaurentSeries":
        """Multiply by ``1 + 1/z``."""
        return self + self.shifted(1)


def constant(value: Number, N: int, label: str = "") -> LaurentSeries:
    c = np.zeros(N + 1, dtype=complex)
    c[0] = complex(value)
    return LaurentSeries(c, label or str(value))


def binomial_coeffs(gamma: Number, N: int) -> np.ndarray:
    """``binom(gamma, p)`` for ``p = 0..N`` via the ratio recurrence."""
    g = float(gamma)
    out = np.empty(N + 1)
    out[0] = 1.0
    for p in range(N):
        out[p + 1] = out[p] * (g - p) / (p + 1)
    return out


def binomial_series(gamma: Number, sign: str, N: int) -> LaurentSeries:
    """Expansion of ``(1 - 1/z)**gamma`` (sign ``'-'``) or ``(1 + 1/z)**gamma``."""
    if N < 0:
        raise ValueError("N must be >= 0")
    coeffs = binomial_coeffs(gamma, N)
    if sign == "-":
        coeffs = coeffs * (-1.0) ** np.arange(N + 1)
    elif sign != "+":
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return LaurentSeries(coeffs, f"(1{sign}1/z)^{gamma}")


def mobius_series(N: int, power: Number = 1) -> LaurentSeries:
    """``p(z)**power`` with ``p(z) = (1 - 1/z)/(1 + 1/z)``, principal branch."""
    return LaurentSeries(
        np.convolve(binomial_series(power, "-", N).coeffs,
                    binomial_series(-float(power), "+", N).coeffs)[:N + 1],
        f"p^{power}")


def series_div(num: LaurentSeries, den: LaurentSeries) -> LaurentSeries:
    n = min(len(num), len(den))
    a, b = num.coeffs[:n], den.coeffs[:n]
    if b[0] == 0:
        raise ZeroDivisionError("series division by a series with zero leading term")
    q = np.zeros(n, dtype=complex)
    for l in range(n):
        q[l] = (a[l] - np.dot(b[1:l + 1], q[l - 1::-1][:l])) / b[0]
    return LaurentSeries(q, f"{num.label}/{den.label}")


def series_power(g: LaurentSeries, gamma: Number, lead=None) -> LaurentSeries:
    """``g**gamma`` from ``g * f' = gamma * g' * f``.

    ``lead`` fixes the branch of ``g[0]**gamma``; the principal branch is used
    when omitted.
    """
    G = g.coeffs
    if G[0] == 0:
        raise ZeroDivisionError("series power needs a nonzero leading coefficient")
    gam = float(gamma)
    n = len(G)
    F = np.zeros(n, dtype=complex)
    F[0] = complex(G[0]) ** gam if lead is None else complex(lead)
    k = np.arange(1, n)
    for m in range(1, n):
        kk = k[:m]
        F[m] = np.dot((gam * kk - (m - kk)) * G[1:m + 1], F[m - 1::-1][:m]) / (m * G[0])
    return LaurentSeries(F, f"({g.label})^{gamma}")
