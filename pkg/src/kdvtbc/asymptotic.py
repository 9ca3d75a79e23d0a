"""Small-``dx`` asymptotic boundary kernels.

As ``dx -> 0`` the stable quartic roots behave like ``1 + dx * lambda1`` where
``lambda1`` is the decaying root of a cubic in which ``p(z)`` plays the role
of the Laplace variable.  Expanding every ingredient as a power series in
``x = 1/z`` gives kernels whose cost does not depend on the conditioning of
the exact recurrence.

Two variants are provided:

* ``lkdv`` (``alpha = c = 0``): closed-form series through ``dx**3``.
* ``general``: ``lambda1`` is obtained as a series root of its cubic, through
  ``dx**1`` (``order=1``) or ``dx**2`` (``order=2``).
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from .continuous import cubic_roots
from .kernels import KernelError, Kernels
from .model import ModelParams, ParameterError, ratios_from
from .series import LaurentSeries, binomial_series, constant, mobius_series, series_div, series_power

IMAG_TOL = 1e-10
RESIDUAL_TOL = 1e-9


class DegenerateExpansionError(KernelError):
    """A series expansion point makes a division or root branch singular."""


def sigma_series_lkdv(eps: float, dt: float, N: int):
    """Series of ``lambda1 = -(2p/(eps dt))**(1/3)`` and of ``lambda1**2``."""
    if eps <= 0 or dt <= 0:
        raise ParameterError("eps" if eps <= 0 else "dt", "must be > 0")
    k = 2.0 / (eps * dt)
    third = Fraction(1, 3)
    p13 = np.convolve(binomial_series(third, "-", N).coeffs,
                      binomial_series(-third, "+", N).coeffs)[:N + 1]
    p23 = np.convolve(binomial_series(2 * third, "-", N).coeffs,
                      binomial_series(-2 * third, "+", N).coeffs)[:N + 1]
    sigma1 = LaurentSeries(-k ** (1 / 3) * p13, "sigma1")
    sigma2 = LaurentSeries(k ** (2 / 3) * p23, "sigma2")
    return sigma1, sigma2


def _pair(L, first, second=None):
    """Sequence with ``first`` at index 0 and ``second`` at index 1."""
    out = np.zeros(L)
    out[0] = first
    out[1] = first if second is None else second
    return out


def _real(series: LaurentSeries, L: int, name: str) -> np.ndarray:
    c = series.coeffs[:L]
    if np.max(np.abs(c.imag), initial=0.0) > IMAG_TOL * max(1.0, np.max(np.abs(c.real))):
        raise KernelError(f"asymptotic kernel {name} is not real")
    return c.real.copy()


def _check_lengths(dt, dx, N):
    if dt <= 0:
        raise ParameterError("dt", "must be > 0")
    if dx <= 0:
        raise ParameterError("dx", "must be > 0")
    if N < 0:
        raise ParameterError("N", "must be >= 0")


def assemble_lkdv_kernels(params: ModelParams, dt: float, dx: float, N: int,
                          order: int = 3) -> Kernels:
    """Kernels of length ``N + 2`` for the pure lKdV model.

    ``order`` is the highest power of ``dx`` kept (1, 2 or 3).
    """
    if params.alpha != 0:
        raise ParameterError("alpha", "lkdv asymptotic kernels need alpha = 0; use the general variant")
    if params.c != 0:
        raise ParameterError("c", "lkdv asymptotic kernels need c = 0; use the general variant")
    if order not in (1, 2, 3):
        raise ParameterError("order", f"must be 1, 2 or 3, got {order}")
    _check_lengths(dt, dx, N)
    L = N + 2
    eps = params.eps
    sigma1, sigma2 = sigma_series_lkdv(eps, dt, L - 1)
    t1 = sigma1.times_one_plus_x().real * dx
    t2 = sigma2.times_one_plus_x().real * dx**2 / 2 if order >= 2 else np.zeros(L)
    k3 = _pair(L, 1.0, -1.0) * dx**3 / (3 * eps * dt) if order >= 3 else np.zeros(L)
    one = _pair(L, 1.0)
    ss = t1 + t2 + k3
    ps = -one - t1 - t2 + 2 * k3
    su = 2 * one - t1 - t2 - k3
    pu = one - t1 + t2 + 2 * k3
    return Kernels(ss, ps, su, pu, provenance="asymptotic", variant="lkdv", order=order,
                   ratios=ratios_from(params, dx, dt))


# -- general KdV-BBM ---------------------------------------------------------

def _u_series(eps, dt, N) -> LaurentSeries:
    """``u = 4 p(z) / (eps dt)``."""
    return mobius_series(N) * (4.0 / (eps * dt))


def _cubic_series(params: ModelParams, dt: float, N: int):
    """Coefficient series ``C0..C3`` of the shifted cubic in ``lambda``."""
    a, c, eps = params.alpha, params.c, params.eps
    u = _u_series(eps, dt, N)
    u2 = u * u
    u3 = u2 * u
    C3 = constant(1.0, N)
    C2 = u * (-2 * a)
    C1 = u2 * (1.25 * a * a) + c / eps
    C0 = u * (0.5 - a * c / (2 * eps)) - u3 * (a**3 / 4)
    return [C0, C1, C2, C3], u


def seed_lambda1(params: ModelParams, dt: float) -> complex:
    """Leading coefficient of ``lambda1`` (the value at ``p = 1``).

    This is the decaying continuous root at ``s = 2/dt`` shifted by
    ``2 alpha / (eps dt)``; for ``alpha > 0`` it may have positive real part.
    """
    s = 2.0 / dt
    nu = cubic_roots(s, params).lambda1
    return nu + 2 * params.alpha / (params.eps * dt)


def lambda1_cubic_general(params: ModelParams, dt: float, N: int) -> LaurentSeries:
    """Series of ``lambda1(z)`` by matching powers of ``1/z`` in its cubic.

    Each new coefficient solves a linear equation whose slope is the cubic's
    derivative at the seed root, so the cost is ``O(N**2)``.
    """
    if dt <= 0:
        raise ParameterError("dt", "must be > 0")
    C, _ = _cubic_series(params, dt, N)
    Cc = [ci.coeffs for ci in C]
    lam0 = seed_lambda1(params, dt)
    slope = sum(m * Cc[m][0] * lam0 ** (m - 1) for m in range(1, 4))
    if abs(slope) < 1e-12 * max(1.0, abs(lam0)) ** 2:
        raise DegenerateExpansionError("lambda1 is a multiple root at p = 1")
    L = N + 1
    lam = np.zeros(L, dtype=complex)
    lam2 = np.zeros(L, dtype=complex)
    lam3 = np.zeros(L, dtype=complex)
    lam[0], lam2[0], lam3[0] = lam0, lam0**2, lam0**3
    for l in range(1, L):
        # coefficient l with lam[l] = 0, then correct linearly
        lam2[l] = np.dot(lam[1:l], lam[l - 1:0:-1])
        lam3[l] = np.dot(lam2[1:l + 1], lam[l - 1::-1][:l])
        powers = (None, lam, lam2, lam3)
        rest = Cc[0][l] + sum(np.dot(Cc[m][:l + 1], powers[m][l::-1]) for m in range(1, 4))
        lam[l] = -rest / slope
        lam2[l] += 2 * lam0 * lam[l]
        lam3[l] += 3 * lam0**2 * lam[l]
    return LaurentSeries(lam, "lambda1")


def cubic_residual_series(lam: LaurentSeries, params: ModelParams, dt: float) -> np.ndarray:
    """Coefficients of the cubic evaluated on the series ``lam``."""
    C, _ = _cubic_series(params, dt, lam.N)
    lam2 = lam * lam
    return (C[0] + C[1] * lam + C[2] * lam2 + C[3] * (lam2 * lam)).coeffs


def lambda_roots_cardano(params: ModelParams, dt: float, N: int) -> list:
    """The three root series from the closed-form cubic solution.

    Series powers replace the composition sums.  The intermediate series can
    have a radius of convergence below 1, so this route is accurate only for
    the first coefficients; it serves as a cross-check.
    """
    a, c, eps = params.alpha, params.c, params.eps
    p = mobius_series(N)
    p2 = p * p
    u2 = p2 * (16.0 / (eps * dt) ** 2)
    P = u2 * (-a * a / 12) + c / eps
    A = 2.0 / (eps * dt) + 2 * a * c / (3 * eps**2 * dt)
    B = -16 * a**3 / (27 * eps**3 * dt**3)
    Q = p * A + p2 * p * B
    Delta = Q * Q + P * P * P * (4.0 / 27)
    if Delta[0] == 0:
        delta = constant(0.0, N)
        if np.any(Delta.coeffs != 0):
            raise DegenerateExpansionError("discriminant vanishes at the expansion point")
    else:
        delta = series_power(Delta, Fraction(1, 2))
    zeta = (delta - Q) * 0.5
    if abs(zeta[0]) < abs((-Q - delta)[0]) / 2:
        zeta = (delta + Q) * -0.5
    if abs(zeta[0]) == 0:
        raise DegenerateExpansionError("degenerate expansion point (zeta_0 = 0)")
    m13 = series_power(zeta, Fraction(1, 3))
    m_13 = series_power(zeta, Fraction(-1, 3), lead=1.0 / m13[0])
    shift = p * (8 * a / (3 * eps * dt))
    j = np.exp(2j * np.pi / 3)
    roots = []
    for k in range(3):
        w = j**k
        roots.append(LaurentSeries((shift + m13 * w - (P * m_13) * (1 / (3 * w))).coeffs,
                                   f"lambda_{k + 1}"))
    return roots


def lambda1_cardano(params: ModelParams, dt: float, N: int) -> LaurentSeries:
    """Pick the Cardano branch whose leading coefficient matches the seed root."""
    lam0 = seed_lambda1(params, dt)
    roots = lambda_roots_cardano(params, dt, N)
    return min(roots, key=lambda r: abs(r[0] - lam0))


def a2_series(lam: LaurentSeries, params: ModelParams, dt: float) -> LaurentSeries:
    """Series of the ``dx**2`` coefficient of the stable sum."""
    a, c, eps = params.alpha, params.c, params.eps
    u = _u_series(eps, dt, lam.N)
    u2 = u * u
    u3 = u2 * u
    u4 = u2 * u2
    l2 = lam * lam
    num = (u4 * (a**4 * eps) - (lam * u3) * (3 * a**3 * eps) + (l2 * u2) * (2 * a * a * eps)
           + u2 * (2 * a * a * c) - (lam * u) * (6 * a * c) - u2 * (2 * a * eps)
           + l2 * (8 * c) + (lam * u) * (6 * eps))
    den = l2 * (12 * eps) - (u * lam) * (16 * a * eps) + u2 * (5 * a * a * eps) + 4 * c
    if abs(den[0]) == 0:
        raise DegenerateExpansionError("second-order coefficient is singular")
    return series_div(num, den) * -0.5


def assemble_general_kernels(params: ModelParams, dt: float, dx: float, N: int,
                             order: int = 2, method: str = "series") -> Kernels:
    """Kernels of length ``N + 2`` for the KdV-BBM model with ``alpha >= 0``.

    ``order`` is the highest power of ``dx`` kept (1 or 2).  ``method`` picks
    how ``lambda1`` is expanded: ``"series"`` (power matching, robust) or
    ``"cardano"`` (closed form, accurate only for short sequences).
    """
    if order not in (1, 2):
        raise ParameterError("order", f"must be 1 or 2, got {order}")
    _check_lengths(dt, dx, N)
    L = N + 2
    eps, a = params.eps, params.alpha
    if method == "series":
        lam = lambda1_cubic_general(params, dt, L - 1)
    elif method == "cardano":
        lam = lambda1_cardano(params, dt, L - 1)
        res = cubic_residual_series(lam, params, dt)
        scale = max(1.0, abs(lam[0])) ** 3
        if np.max(np.abs(res)) > RESIDUAL_TOL * scale:
            raise KernelError("closed-form expansion lost accuracy; use method='series'")
    else:
        raise ParameterError("method", f"unknown method {method!r}")

    # (1 + x) * 4 alpha p / (eps dt) = 4 alpha (1 - x) / (eps dt)
    au = np.zeros(L, dtype=complex)
    au[0], au[1] = 1.0, -1.0
    au = LaurentSeries(au * (4 * a / (eps * dt)), "alpha u (1+x)")
    lam1 = lam.times_one_plus_x()
    one = LaurentSeries(_pair(L, 1.0), "1+x")
    first = (au - lam1) * dx
    ss = lam1 * dx
    su = one * 2 + first
    ps = one * -1 + first
    pu = one + first
    if order == 2:
        u = _u_series(eps, dt, L - 1)
        a2 = a2_series(lam, params, dt)
        lu = lam * u
        g = u * u * (a * a / 2)
        ss = ss + a2.times_one_plus_x() * dx**2
        su = su - (a2 + params.c / eps).times_one_plus_x() * dx**2
        ps = ps - (a2 - lu * (a / 2) + g).times_one_plus_x() * dx**2
        pu = pu + (lam * lam - lu * (1.5 * a) + g - a2).times_one_plus_x() * dx**2
    return Kernels(_real(ss, L, "ss"), _real(ps, L, "ps"), _real(su, L, "su"), _real(pu, L, "pu"),
                   provenance="asymptotic", variant="general", order=order,
                   ratios=ratios_from(params, dx, dt))


def asymptotic_kernels(params: ModelParams, dt: float, dx: float, N: int,
                       order=None) -> Kernels:
    """Pick the lkdv variant when ``alpha = c = 0``, otherwise the general one."""
    if params.alpha == 0 and params.c == 0:
        return assemble_lkdv_kernels(params, dt, dx, N, order=order or 3)
    return assemble_general_kernels(params, dt, dx, N, order=order or 2)
