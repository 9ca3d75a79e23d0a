"""Whole-line reference solutions.

Pure lKdV (``alpha = c = 0``) has the Airy fundamental solution
``E(t, x) = (3 eps t)^(-1/3) Ai(x (3 eps t)^(-1/3))``.  The general model is
propagated exactly in Fourier space with the symbol
``exp(i (eps xi^3 - c xi) t / (1 + alpha xi^2))`` on a zero-padded periodic
domain.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.special

from .model import GHOSTS, PROFILES, Grid, ModelParams, ParameterError

AIRY_CUTOFF = 50.0
QUAD_REFINE = 4
SUPPORT_TOL = 1e-18


class WrapAroundError(RuntimeError):
    """The padded periodic domain is too small for the requested time."""


def airy(x):
    """Airy function ``Ai``; exactly zero beyond ``x = 50``."""
    x = np.asarray(x, dtype=float)
    out = scipy.special.airy(np.minimum(x, AIRY_CUTOFF))[0]
    return np.where(x > AIRY_CUTOFF, 0.0, out)


def airy_kernel(t: float, x, eps: float):
    scale = (3.0 * eps * t) ** (1.0 / 3.0)
    return airy(np.asarray(x) / scale) / scale


def _profile(u0) -> Optional[Callable]:
    if callable(u0):
        return u0
    if isinstance(u0, str):
        try:
            return PROFILES[u0]
        except KeyError:
            raise ParameterError("initial", f"unknown profile {u0!r}") from None
    return None


def reference_airy(u0: Union[str, Callable, np.ndarray], t: float, params: ModelParams,
                   grid: Grid, refine: int = QUAD_REFINE) -> np.ndarray:
    """Airy convolution evaluated at the interior nodes.

    With a profile (name or callable) the trapezoidal quadrature uses a grid
    ``refine`` times finer than ``grid``; with sampled values it uses the grid
    nodes themselves.
    """
    if params.alpha != 0 or params.c != 0:
        raise ParameterError("alpha" if params.alpha != 0 else "c",
                             "the Airy reference needs alpha = c = 0")
    if t < 0:
        raise ParameterError("t", "must be >= 0")
    profile = _profile(u0)
    if profile is not None:
        h = grid.dx / refine
        y = grid.x_left + h * np.arange(grid.J * refine + 1)
        f = np.asarray(profile(y), dtype=float)
    else:
        f = np.asarray(u0, dtype=float)
        if len(f) == grid.size:
            f = f[GHOSTS:-GHOSTS]
        h, y = grid.dx, grid.x
    if t == 0:
        return profile(grid.x) if profile is not None else f.copy()
    keep = np.abs(f) > SUPPORT_TOL * np.max(np.abs(f))
    w = np.full(len(f), h)
    w[0] = w[-1] = h / 2
    y, fw = y[keep], (f * w)[keep]
    x = grid.x
    out = np.empty(len(x))
    chunk = max(1, 2_000_000 // max(len(y), 1))
    for i in range(0, len(x), chunk):
        xs = x[i:i + chunk]
        out[i:i + chunk] = airy_kernel(t, xs[:, None] - y[None, :], params.eps) @ fw
    return out


@dataclass(frozen=True)
class SpectralConfig:
    """``domain_factor`` is the padded length over the interval length; it
    doubles up to ``max_domain_factor`` when the solution reaches the padded
    edges.  ``edge_tol`` is relative to the max norm.
    """

    domain_factor: float = 8.0
    max_domain_factor: float = 1024.0
    min_modes: int = 1024
    edge_tol: float = 1e-10
    edge_fraction: float = 0.02

    def __post_init__(self):
        if self.domain_factor < 4:
            raise ParameterError("domain_factor", "must be >= 4")
        if self.max_domain_factor < self.domain_factor:
            raise ParameterError("max_domain_factor", "must be >= domain_factor")


def spectral_symbol(xi, t: float, params: ModelParams):
    return np.exp(1j * (params.eps * xi**3 - params.c * xi) * t / (1 + params.alpha * xi**2))


class SpectralPropagator:
    """Exact Fourier propagation of interior data on a padded periodic grid.

    The padded grid keeps the spacing ``dx`` and centers the interval.
    """

    def __init__(self, u0, params: ModelParams, grid: Grid, factor: float,
                 min_modes: int = 1024):
        values = np.asarray(u0, dtype=float)
        if len(values) == grid.size:
            values = values[GHOSTS:-GHOSTS]
        if len(values) != grid.J + 1:
            raise ParameterError("u0", "length does not match the grid")
        n = max(int(min_modes), int(np.ceil(factor * (grid.J + 1))))
        self.modes = 1 << (n - 1).bit_length()
        self.offset = (self.modes - (grid.J + 1)) // 2
        self.params, self.grid = params, grid
        padded = np.zeros(self.modes)
        padded[self.offset:self.offset + grid.J + 1] = values
        self.xi = 2 * np.pi * np.fft.rfftfreq(self.modes, d=grid.dx)
        self.u_hat = np.fft.rfft(padded)

    def padded(self, t: float) -> np.ndarray:
        # rfft keeps xi >= 0; real data makes the negative half conjugate
        return np.fft.irfft(self.u_hat * spectral_symbol(self.xi, t, self.params), n=self.modes)

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return full[self.offset:self.offset + self.grid.J + 1].copy()

    def __call__(self, t: float) -> np.ndarray:
        return self.restrict(self.padded(t))

    def edge_ratio(self, t: float, fraction: float = 0.02) -> float:
        full = self.padded(t)
        k = max(1, int(fraction * self.modes))
        edge = max(np.max(np.abs(full[:k])), np.max(np.abs(full[-k:])))
        top = np.max(np.abs(full))
        return float(edge / top) if top > 0 else 0.0


def spectral_propagator(u0, params: ModelParams, grid: Grid, t_max: float,
                        cfg: SpectralConfig = SpectralConfig()) -> SpectralPropagator:
    """Propagator whose padding is large enough up to ``t_max``."""
    factor = cfg.domain_factor
    while True:
        prop = SpectralPropagator(u0, params, grid, factor, cfg.min_modes)
        if t_max <= 0 or prop.edge_ratio(t_max, cfg.edge_fraction) <= cfg.edge_tol:
            return prop
        if factor * 2 > cfg.max_domain_factor:
            raise WrapAroundError(
                f"solution reaches the padded edges at t={t_max} even with domain_factor="
                f"{factor}; increase domain_factor")
        factor *= 2


def reference_spectral(u0, t: float, params: ModelParams, grid: Grid,
                       cfg: SpectralConfig = SpectralConfig()) -> np.ndarray:
    """Interior values of the whole-line solution at time ``t``."""
    if t < 0:
        raise ParameterError("t", "must be >= 0")
    return spectral_propagator(u0, params, grid, t, cfg)(t)


def scheme_amplification(theta, ratios) -> np.ndarray:
    """Per-step Fourier multiplier of the interior scheme at ``theta = xi dx``."""
    e1, e2 = np.exp(1j * theta), np.exp(2j * theta)
    cm, c0, cp = ratios.c_minus, ratios.c_zero, ratios.c_plus
    lhs = -1 / e2 + cm / e1 + c0 + cp * e1 + e2
    rhs = 1 / e2 + cp / e1 + c0 + cm * e1 - e2
    return rhs / lhs


class DiscreteWholeLine:
    """The interior scheme run on the whole line, evaluated by FFT.

    Transparent boundary rows are exact for this solution, so a run with
    exact kernels must reproduce it on the interval.
    """

    def __init__(self, u0, params: ModelParams, grid: Grid, factor: float, min_modes: int = 1024):
        from .model import derive_ratios
        self._prop = SpectralPropagator(u0, params, grid, factor, min_modes)
        self.modes = self._prop.modes
        theta = self._prop.xi * grid.dx
        self.gain = scheme_amplification(theta, derive_ratios(params, grid))

    def padded(self, n: int) -> np.ndarray:
        return np.fft.irfft(self._prop.u_hat * self.gain ** n, n=self.modes)

    def __call__(self, n: int) -> np.ndarray:
        return self._prop.restrict(self.padded(n))

    def edge_ratio(self, n: int, fraction: float = 0.02) -> float:
        full = self.padded(n)
        k = max(1, int(fraction * self.modes))
        edge = max(np.max(np.abs(full[:k])), np.max(np.abs(full[-k:])))
        top = np.max(np.abs(full))
        return float(edge / top) if top > 0 else 0.0


def discrete_whole_line(u0, params: ModelParams, grid: Grid, n_max: int,
                        cfg: SpectralConfig = SpectralConfig()) -> DiscreteWholeLine:
    factor = cfg.domain_factor
    while True:
        sol = DiscreteWholeLine(u0, params, grid, factor, cfg.min_modes)
        if n_max <= 0 or sol.edge_ratio(n_max, cfg.edge_fraction) <= cfg.edge_tol:
            return sol
        if factor * 2 > cfg.max_domain_factor:
            raise WrapAroundError(f"discrete solution reaches the padded edges at step {n_max}")
        factor *= 2
