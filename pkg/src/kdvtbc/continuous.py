"""Roots of the continuous dispersion relation and the stability functional.

For a Laplace variable ``s`` the exterior solutions behave like
``exp(lambda x)`` where ``lambda`` solves

    eps lambda^3 - alpha s lambda^2 + c lambda + s = 0.

For ``Re s > 0`` exactly one root has negative real part.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams

SEPARATION_TOL = 1e-12
AXIS_TOL = 1e-9


class RootSeparationError(RuntimeError):
    """The cubic does not have exactly one root with negative real part."""


@dataclass(frozen=True)
class ContinuousRoots:
    lambda1: complex
    lambda2: complex
    lambda3: complex
    s: complex

    @property
    def roots(self) -> np.ndarray:
        return np.array([self.lambda1, self.lambda2, self.lambda3])


def cubic_coefficients(s, params: ModelParams) -> np.ndarray:
    """Monic coefficients (highest first) of the dispersion cubic."""
    s = complex(s)
    return np.array([1.0, -params.alpha * s / params.eps, params.c / params.eps,
                     s / params.eps], dtype=complex)


def residual(lam, s, params: ModelParams):
    return s + params.c * lam - params.alpha * s * lam**2 + params.eps * lam**3


def boundary_shift(xi: float) -> float:
    """Size of the real part used to decide root labels at ``s = i xi``."""
    return 1e-8 * max(1.0, abs(xi))


def _polish(coeffs, roots):
    dcoeffs = np.polyder(coeffs)
    out = roots.copy()
    for i, r in enumerate(roots):
        d = np.polyval(dcoeffs, r)
        if d != 0:
            out[i] = r - np.polyval(coeffs, r) / d
    return out


def _limit_real_parts(roots, s, params: ModelParams) -> np.ndarray:
    """Real parts of the roots after moving ``s`` to ``s + eta``.

    Roots off the imaginary axis keep their real part.  Roots on it are
    moved to first order with ``dlambda/ds``, so the roots themselves stay
    exact at ``s``.
    """
    eta = boundary_shift(s.imag)
    lam = roots
    on_axis = np.abs(lam.real) <= AXIS_TOL * np.abs(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        dP_dlam = 3 * params.eps * lam**2 - 2 * params.alpha * s * lam + params.c
        dP_ds = 1 - params.alpha * lam**2
        moved = (lam - eta * dP_ds / dP_dlam).real
    return np.where(on_axis, moved, lam.real)


def cubic_roots(s, params: ModelParams) -> ContinuousRoots:
    """Roots labeled so that ``lambda1`` is the decaying one.

    For purely imaginary ``s`` the roots are those at ``s`` itself, labeled
    by where they move for ``s + eta`` with ``eta -> 0+``.  The two remaining
    roots are ordered by real part, then imaginary part.
    """
    s = complex(s)
    if s.real < 0:
        raise ValueError(f"need Re(s) >= 0, got {s!r}")
    if s == 0 and params.c == 0:
        # triple root at zero; every root tends to 0 as s -> 0
        return ContinuousRoots(0j, 0j, 0j, s)
    coeffs = cubic_coefficients(s, params)
    roots = _polish(coeffs, np.roots(coeffs))
    key = _limit_real_parts(roots, s, params) if s.real == 0 else roots.real
    order = np.lexsort((roots.imag, key))
    roots, key = roots[order], key[order]
    # per-root relative tolerance: near s = 0 the roots shrink like |s|^(1/3)
    tol = SEPARATION_TOL * np.abs(roots)
    if not (key[0] < -tol[0] and key[1] > -tol[1]):
        raise RootSeparationError(
            f"no unique decaying root at s={s!r}: real parts {roots.real}")
    return ContinuousRoots(complex(roots[0]), complex(roots[1]), complex(roots[2]), s)


def stability_functional(xi: float, params: ModelParams) -> float:
    """``c/2 + eps (Re lambda1^2 - |lambda1|^2/2) - alpha Re(i xi lambda1)``.

    ``lambda1`` is the decaying root at ``s = i xi``; the value is
    nonnegative up to roundoff for admissible parameters.
    """
    lam = cubic_roots(complex(0.0, xi), params).lambda1
    return float(params.c / 2 + params.eps * ((lam * lam).real - abs(lam) ** 2 / 2)
                 - params.alpha * (1j * xi * lam).real)


def cardano_roots(s, params: ModelParams) -> np.ndarray:
    """Closed-form roots, in the ordering ``k = 1, 2, 3`` of the cube-root branch.

    Used only as a cross-check of :func:`cubic_roots`; which ``k`` gives the
    decaying root depends on the branch and must be searched.
    """
    s = complex(s)
    a = -params.alpha * s / params.eps
    b = params.c / params.eps
    d = s / params.eps
    P = b - a * a / 3
    Q = 2 * a**3 / 27 - a * b / 3 + d
    disc = np.sqrt(complex(Q * Q + 4 * P**3 / 27))
    zeta = (-Q + disc) / 2
    if abs(zeta) < abs((-Q - disc) / 2):
        zeta = (-Q - disc) / 2
    if zeta == 0:
        return np.full(3, -a / 3, dtype=complex)
    w = zeta ** (1 / 3)
    j = np.exp(2j * np.pi / 3)
    return np.array([-a / 3 + j**k * w - P / (3 * j**k * w) for k in range(3)])
