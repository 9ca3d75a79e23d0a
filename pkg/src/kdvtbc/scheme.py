"""Crank-Nicolson centered scheme closed by discrete transparent boundary rows.

Each step solves ``A u^{n+1} = B u^n + s^n`` where ``A`` and ``B`` are
pentadiagonal of size ``J + 5``.  The first two and last two rows of ``A``
carry the index-0 kernel values; the older kernel values enter through the
convolution source ``s^n``, which only touches those four rows.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import lapack

from .diagnostics import RunReport, discrete_energy, relative_l2_error
from .kernels import KernelError, Kernels, extend_kernels
from .model import GHOSTS, Grid, ModelParams, SchemeRatios, derive_ratios, interior

BANDS = 2


class SchemeError(RuntimeError):
    """Assembly or time stepping failed."""


@dataclass(frozen=True)
class SchemeMatrices:
    """Banded storage of ``A`` and ``B`` plus the cached LU factors of ``A``.

    ``A_band`` and ``B_band`` use the LAPACK layout ``band[BANDS + i - j, j]``.
    """

    A_band: np.ndarray
    B_band: np.ndarray
    lu: np.ndarray = field(repr=False)
    piv: np.ndarray = field(repr=False)
    c_minus: float
    c_zero: float
    c_plus: float
    head: tuple

    @property
    def size(self) -> int:
        return self.A_band.shape[1]

    def dense(self):
        """Dense ``(A, B)``; meant for tests and small grids."""
        return _band_to_dense(self.A_band), _band_to_dense(self.B_band)

    def apply_A(self, v):
        return _band_matvec(self.A_band, v)

    def apply_B(self, v):
        return _band_matvec(self.B_band, v)

    def solve(self, rhs):
        x, info = lapack.dgbtrs(self.lu, BANDS, BANDS, rhs, self.piv)
        if info != 0:
            raise SchemeError(f"banded solve failed (info={info})")
        return x


def _band_to_dense(band):
    n = band.shape[1]
    out = np.zeros((n, n))
    for k in range(-BANDS, BANDS + 1):
        d = band[BANDS - k, max(k, 0):n + min(k, 0)]
        out += np.diag(d, k)
    return out


def _band_matvec(band, v):
    n = len(v)
    out = band[BANDS] * v
    for k in range(1, BANDS + 1):
        out[:n - k] += band[BANDS - k, k:] * v[k:]
        out[k:] += band[BANDS + k, :n - k] * v[:n - k]
    return out


def _set(band, i, j, value):
    band[BANDS + i - j, j] = value


def assemble(ratios: SchemeRatios, kernels: Kernels, J: int) -> SchemeMatrices:
    if J < 5:
        raise SchemeError(f"need J >= 5, got {J}")
    n = J + 1 + 2 * GHOSTS
    cm, c0, cp = ratios.c_minus, ratios.c_zero, ratios.c_plus
    ss0, ps0, su0, pu0 = kernels.head()
    A = np.zeros((2 * BANDS + 1, n))
    B = np.zeros((2 * BANDS + 1, n))
    for k, (a_val, b_val) in zip(range(-2, 3), [(-1.0, 1.0), (cm, cp), (c0, c0), (cp, cm), (1.0, -1.0)]):
        # interior rows i = 2..J+2, column i + k
        rows = np.arange(2, J + 3)
        A[BANDS - k, rows + k] = a_val
        B[BANDS - k, rows + k] = b_val
    for r in (0, 1):
        _set(A, r, r, pu0)
        _set(A, r, r + 1, -su0)
        _set(A, r, r + 2, 1.0)
        _set(B, r, r + 2, -1.0)
    for r in (n - 2, n - 1):
        _set(A, r, r - 2, ps0)
        _set(A, r, r - 1, -ss0)
        _set(A, r, r, 1.0)
        _set(B, r, r, -1.0)
    ab = np.zeros((3 * BANDS + 1, n))
    ab[BANDS:] = A
    lu, piv, info = lapack.dgbtrf(ab, BANDS, BANDS)
    if info != 0:
        raise SchemeError(f"system matrix is singular (dgbtrf info={info}); "
                          "check the kernels and step sizes")
    return SchemeMatrices(A, B, lu, piv, cm, c0, cp, kernels.head())


# Trace positions inside a field vector (ghosts included).
TRACE_NAMES = ("u_m2", "u_m1", "u_0", "u_1", "u_Jm1", "u_J", "u_Jp1", "u_Jp2")


def trace_indices(size: int) -> np.ndarray:
    return np.array([0, 1, 2, 3, size - 4, size - 3, size - 2, size - 1])


class BoundaryHistory:
    """Append-only time traces of the eight boundary-adjacent unknowns."""

    def __init__(self, size: int, capacity: int = 16):
        self.idx = trace_indices(size)
        self._data = np.zeros((max(capacity, 1), len(self.idx)))
        self._len = 0

    def __len__(self):
        return self._len

    def append(self, u: np.ndarray):
        if self._len == len(self._data):
            grown = np.zeros((2 * len(self._data), self._data.shape[1]))
            grown[:self._len] = self._data
            self._data = grown
        self._data[self._len] = u[self.idx]
        self._len += 1

    @property
    def traces(self) -> np.ndarray:
        """Array of shape ``(n + 1, 8)``, columns ordered as ``TRACE_NAMES``."""
        return self._data[:self._len]

    def trace(self, name: str) -> np.ndarray:
        return self.traces[:, TRACE_NAMES.index(name)]


def convolution_source(kernels: Kernels, history: BoundaryHistory, n: int,
                       size: Optional[int] = None) -> np.ndarray:
    """Source ``s^n`` built from the traces of steps ``0..n``."""
    if len(kernels) < n + 2:
        raise KernelError(f"kernels have {len(kernels)} entries, step {n} needs {n + 2}; "
                          "extend kernels first")
    if len(history) != n + 1:
        raise SchemeError(f"history has {len(history)} entries, expected {n + 1}")
    size = size or (history.idx[-1] + 1)
    tr = history.traces
    # weights k_{n+1-k} for k = 0..n
    su, pu = kernels.su[n + 1:0:-1], kernels.pu[n + 1:0:-1]
    ss, ps = kernels.ss[n + 1:0:-1], kernels.ps[n + 1:0:-1]
    s = np.zeros(size)
    s[0] = su @ tr[:, 1] - pu @ tr[:, 0]
    s[1] = su @ tr[:, 2] - pu @ tr[:, 1]
    s[-2] = ss @ tr[:, 5] - ps @ tr[:, 4]
    s[-1] = ss @ tr[:, 6] - ps @ tr[:, 5]
    return s


@dataclass
class SolverState:
    u: np.ndarray
    history: BoundaryHistory
    n: int = 0
    last_residual: float = 0.0

    @classmethod
    def start(cls, u0: np.ndarray, capacity: int = 16) -> "SolverState":
        u = np.array(u0, dtype=float)
        h = BoundaryHistory(len(u), capacity)
        h.append(u)
        return cls(u, h, 0)


def step(state: SolverState, matrices: SchemeMatrices, kernels: Kernels) -> SolverState:
    """Advance one time step in place and return the state."""
    n = state.n
    s = convolution_source(kernels, state.history, n, len(state.u))
    rhs = matrices.apply_B(state.u) + s
    u_new = matrices.solve(rhs)
    if not np.all(np.isfinite(u_new)):
        raise SchemeError(f"non-finite solution at step {n + 1}")
    state.last_residual = float(np.max(np.abs(matrices.apply_A(u_new) - rhs)))
    state.u = u_new
    state.history.append(u_new)
    state.n = n + 1
    return state


def snapshot_steps(N: int, count: int) -> np.ndarray:
    """Step indices of ``count`` evenly spaced snapshots in ``1..N`` plus step 0."""
    if N == 0 or count <= 0:
        return np.array([0])
    count = min(count, N)
    return np.unique(np.concatenate([[0], np.round(np.linspace(0, N, count + 1)[1:]).astype(int)]))


def run(params: ModelParams, grid: Grid, kernels: Kernels, u0: np.ndarray,
        reference: Optional[Callable[[float], np.ndarray]] = None,
        snapshots: int = 100, config: Optional[dict] = None) -> RunReport:
    """Advance ``grid.N`` steps from ``u0``.

    ``reference(t)`` returns the exact solution on the interior nodes; when
    given, relative errors are recorded at the snapshot steps.
    """
    if len(u0) != grid.size:
        raise SchemeError(f"initial field has length {len(u0)}, grid needs {grid.size}")
    ratios = derive_ratios(params, grid)
    N = grid.N
    if len(kernels) < N + 2:
        if kernels.provenance == "exact" and kernels.ratios is not None:
            kernels = extend_kernels(kernels, N + 2)
        else:
            raise KernelError(f"kernels have {len(kernels)} entries, run needs {N + 2}")
    t_start = time.perf_counter()
    matrices = assemble(ratios, kernels, grid.J)
    state = SolverState.start(u0, capacity=N + 1)
    record = set(snapshot_steps(N, snapshots).tolist())
    energy = np.empty(N + 1)
    energy[0] = discrete_energy(state.u, grid, params)
    residuals = np.empty(N)
    u_norms = np.empty(N)
    snaps, snap_steps, errors, error_steps = [], [], [], []

    def observe(k):
        if k not in record:
            return
        snap_steps.append(k)
        snaps.append(interior(state.u).copy())
        if reference is not None and k > 0:
            errors.append(relative_l2_error(state.u, reference(k * grid.dt), grid))
            error_steps.append(k)

    observe(0)
    for k in range(N):
        u_norms[k] = np.max(np.abs(state.u))
        try:
            step(state, matrices, kernels)
        except (SchemeError, KernelError) as exc:
            raise SchemeError(f"step {k + 1} of {N}: {exc}") from exc
        residuals[k] = state.last_residual
        energy[k + 1] = discrete_energy(state.u, grid, params)
        observe(k + 1)
    wall = time.perf_counter() - t_start
    return RunReport(
        errors=np.array(errors), error_steps=np.array(error_steps, dtype=int),
        energy=energy, residuals=residuals, u_norms=u_norms,
        snapshot_steps=np.array(snap_steps, dtype=int), snapshots=np.array(snaps),
        x=grid.x, dt=grid.dt, wall_time=wall, config=dict(config or {}),
        final=state.u.copy(), kernel_provenance=kernels.provenance)



def _clear_row(band, r):
    n = band.shape[1]
    for j in range(max(0, r - BANDS), min(n, r + BANDS + 1)):
        band[BANDS + r - j, j] = 0.0


def assemble_dirichlet(ratios: SchemeRatios, J: int) -> SchemeMatrices:
    """Interior rows of the scheme with the four ghost values pinned to zero."""
    zero = Kernels(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1))
    m = assemble(ratios, zero, J)
    A, B = m.A_band.copy(), m.B_band.copy()
    n = m.size
    for r in (0, 1, n - 2, n - 1):
        _clear_row(A, r)
        _clear_row(B, r)
        _set(A, r, r, 1.0)
    ab = np.zeros((3 * BANDS + 1, n))
    ab[BANDS:] = A
    lu, piv, info = lapack.dgbtrf(ab, BANDS, BANDS)
    if info != 0:
        raise SchemeError(f"Dirichlet system is singular (dgbtrf info={info})")
    return SchemeMatrices(A, B, lu, piv, m.c_minus, m.c_zero, m.c_plus, (0.0, 0.0, 0.0, 0.0))


def run_dirichlet(params: ModelParams, grid: Grid, u0: np.ndarray, steps) -> dict:
    """Interior fields ``{n: u^n}`` at the requested steps, ghost-zero closure."""
    matrices = assemble_dirichlet(derive_ratios(params, grid), grid.J)
    wanted = set(int(s) for s in steps)
    u = np.array(u0, dtype=float)
    out = {}
    for n in range(max(wanted, default=-1) + 1):
        if n > 0:
            u = matrices.solve(matrices.apply_B(u))
        if n in wanted:
            out[n] = interior(u).copy()
    return out
