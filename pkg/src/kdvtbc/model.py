"""Physical parameters, grids and field layout for the linearized KdV-BBM problem.

The equation is ``d/dt (u - alpha u_xx) + c u_x + eps u_xxx = 0``.  A field
carries two ghost nodes on each side of the interior nodes ``0..J`` so that
vector index ``i`` corresponds to grid index ``j = i - 2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

GHOSTS = 2
DECAY_TOL = 1e-12


class ParameterError(ValueError):
    """Invalid physical or discretization parameter."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ModelParams:
    c: float = 0.0
    alpha: float = 0.0
    eps: float = 1e-3

    def __post_init__(self):
        for name in ("c", "alpha", "eps"):
            if not np.isfinite(getattr(self, name)):
                raise ParameterError(name, "must be finite")
        if self.eps <= 0:
            raise ParameterError("eps", f"must be > 0, got {self.eps!r}")
        if self.alpha < 0:
            raise ParameterError("alpha", f"must be >= 0, got {self.alpha!r}")


@dataclass(frozen=True)
class Grid:
    """Uniform space-time grid on ``[x_left, x_right]``.

    ``J`` is the number of cells; ``N`` the number of time steps.  The cell
    count is obtained by rounding and the step ``dx`` is never adjusted, so a
    length that is not a multiple of ``dx`` is rejected.
    """

    x_left: float
    x_right: float
    dx: float
    dt: float
    N: int = 0

    def __post_init__(self):
        if not self.x_left < self.x_right:
            raise ParameterError("x_right", "must exceed x_left")
        if not self.dx > 0:
            raise ParameterError("dx", f"must be > 0, got {self.dx!r}")
        if not self.dt > 0:
            raise ParameterError("dt", f"must be > 0, got {self.dt!r}")
        if self.N < 0:
            raise ParameterError("N", "must be >= 0")
        length = self.x_right - self.x_left
        J = int(round(length / self.dx))
        if abs(J * self.dx - length) > 1e-12 * length:
            raise ParameterError(
                "dx", f"interval length {length!r} is not a multiple of dx={self.dx!r}")
        if J < 5:
            raise ParameterError("dx", f"need at least 5 cells, got J={J}")
        object.__setattr__(self, "J", J)

    @classmethod
    def from_final_time(cls, x_left, x_right, dx, dt, T):
        N = int(round(T / dt))
        if abs(N * dt - T) > 1e-9 * T:
            raise ParameterError("dt", f"final time {T!r} is not a multiple of dt={dt!r}")
        return cls(x_left, x_right, dx, dt, N)

    @property
    def size(self) -> int:
        """Length of a field vector including ghosts."""
        return self.J + 1 + 2 * GHOSTS

    @property
    def x(self) -> np.ndarray:
        """Interior node coordinates ``x_left + j*dx`` for ``j = 0..J``."""
        return self.x_left + self.dx * np.arange(self.J + 1)

    @property
    def x_full(self) -> np.ndarray:
        """Coordinates for every field entry, ghosts included."""
        return self.x_left + self.dx * np.arange(-GHOSTS, self.J + 1 + GHOSTS)

    @property
    def T(self) -> float:
        return self.N * self.dt


@dataclass(frozen=True)
class SchemeRatios:
    lambda_H: float
    lambda_D: float
    lambda_B: float
    a: float
    mu: float

    @property
    def c_minus(self) -> float:
        return 2.0 - self.a - self.mu

    @property
    def c_zero(self) -> float:
        # 4a/lambda_H written as 4/lambda_D so that c = 0 stays finite.
        return 4.0 / self.lambda_D + 2.0 * self.mu

    @property
    def c_plus(self) -> float:
        return self.a - 2.0 - self.mu


def derive_ratios(params: ModelParams, grid: Grid) -> SchemeRatios:
    return ratios_from(params, grid.dx, grid.dt)


def ratios_from(params: ModelParams, dx: float, dt: float) -> SchemeRatios:
    if params.eps <= 0:
        raise ParameterError("eps", "must be > 0")
    lambda_H = params.c * dt / dx
    lambda_D = params.eps * dt / dx**3
    lambda_B = params.alpha / dx**2
    a = params.c * dx**2 / params.eps
    mu = 4.0 * params.alpha * dx / (params.eps * dt)
    return SchemeRatios(lambda_H, lambda_D, lambda_B, a, mu)


def gaussian(x):
    return np.exp(-400.0 * (np.asarray(x, dtype=float) - 0.5) ** 2)


def wavepacket(x):
    x = np.asarray(x, dtype=float)
    return gaussian(x) * np.sin(20.0 * np.pi * x)


PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "gaussian": gaussian,
    "wavepacket": wavepacket,
}


def new_field(grid: Grid) -> np.ndarray:
    return np.zeros(grid.size)


def interior(u: np.ndarray) -> np.ndarray:
    """View of the interior nodes ``0..J`` of a field vector."""
    return u[GHOSTS:-GHOSTS]


def sample_initial(kind: Union[str, Callable], grid: Grid) -> np.ndarray:
    """Sample an initial profile on the interior nodes; ghosts are zero.

    The transparent conditions assume the data vanish outside the interval,
    so profiles larger than ``DECAY_TOL`` at either end are rejected.
    """
    if callable(kind):
        profile = kind
    else:
        try:
            profile = PROFILES[kind]
        except KeyError:
            raise ParameterError("initial", f"unknown profile {kind!r}") from None
    u = new_field(grid)
    values = np.asarray(profile(grid.x), dtype=float)
    if values.shape != (grid.J + 1,):
        raise ParameterError("initial", "profile must map node array to same shape")
    if not np.all(np.isfinite(values)):
        raise ParameterError("initial", "profile is not finite")
    edge = max(abs(values[0]), abs(values[-1]))
    if edge >= DECAY_TOL:
        raise ParameterError(
            "initial", f"profile is {edge:.3e} at the boundary; must decay below {DECAY_TOL}")
    interior(u)[:] = values
    return u
