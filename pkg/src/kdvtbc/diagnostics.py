"""Error functionals, discrete energy, boundary dissipativity and fits."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .model import GHOSTS, Grid, ModelParams, SchemeRatios

ENERGY_RTOL = 1e-12


class DiagnosticsError(ValueError):
    pass


def _interior(u, grid: Grid) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if len(u) == grid.size:
        return u[GHOSTS:-GHOSTS]
    if len(u) == grid.J + 1:
        return u
    raise DiagnosticsError(f"field of length {len(u)} does not match grid (J={grid.J})")


def trapezoid_weights(J: int, dx: float) -> np.ndarray:
    w = np.full(J + 1, dx)
    w[0] = w[-1] = dx / 2
    return w


def l2_norm(u, grid: Grid) -> float:
    v = _interior(u, grid)
    return float(np.sqrt(np.sum(trapezoid_weights(grid.J, grid.dx) * v * v)))


def relative_l2_error(u, u_ref, grid: Grid) -> float:
    """``||u_ref - u|| / ||u_ref||`` with trapezoidal norms on nodes ``0..J``.

    Either argument may be a full field (with ghosts) or interior values.
    """
    ref = _interior(u_ref, grid)
    den = l2_norm(ref, grid)
    if den == 0:
        raise DiagnosticsError("reference has zero norm")
    return l2_norm(ref - _interior(u, grid), grid) / den


def discrete_energy(u, grid: Grid, params: ModelParams) -> float:
    """``sum_{j=1..J} u_j^2/2 + alpha sum_{j=0..J} (u_{j+1}-u_j)^2/(2 dx^2)``.

    ``u`` must be a full field, since the last difference uses ``u_{J+1}``.
    """
    u = np.asarray(u, dtype=float)
    if len(u) != grid.size:
        raise DiagnosticsError("discrete_energy needs a full field including ghosts")
    v = u[GHOSTS:-GHOSTS]
    e = 0.5 * float(np.dot(v[1:], v[1:]))
    if params.alpha:
        d = np.diff(u[GHOSTS:-GHOSTS + 1])
        e += params.alpha * float(np.dot(d, d)) / (2 * grid.dx**2)
    return e


def energy_increases(energy: Sequence[float], rtol: float = ENERGY_RTOL) -> np.ndarray:
    """Indices ``n`` where ``E[n+1] > E[n] (1 + rtol)``."""
    e = np.asarray(energy)
    return np.nonzero(e[1:] > e[:-1] * (1 + rtol))[0]


@dataclass
class RunReport:
    """Everything recorded by a run.

    ``errors[k]`` is the relative error at step ``error_steps[k]``;
    ``energy[n]`` covers every step; ``residuals[n]`` is the solve residual
    of step ``n+1`` and ``u_norms[n]`` the max norm of the state it starts from.
    """

    errors: np.ndarray
    error_steps: np.ndarray
    energy: np.ndarray
    residuals: np.ndarray
    u_norms: np.ndarray
    snapshot_steps: np.ndarray
    snapshots: np.ndarray
    x: np.ndarray
    dt: float
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    final: Optional[np.ndarray] = None
    kernel_provenance: str = "exact"
    slope_fit: Optional[tuple] = None

    @property
    def E_P(self) -> float:
        """Maximum recorded error; ``nan`` when nothing was recorded."""
        return float(np.max(self.errors)) if len(self.errors) else float("nan")

    @property
    def max_relative_residual(self) -> float:
        if len(self.residuals) == 0:
            return 0.0
        scale = np.where(self.u_norms > 0, self.u_norms, np.inf)
        rel = np.where(self.residuals == 0, 0.0, self.residuals / scale)
        return float(np.max(rel))

    def series_csv(self) -> str:
        """``step,t,err,energy`` rows; ``err`` is empty where not recorded."""
        errs = dict(zip(self.error_steps.tolist(), self.errors.tolist()))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "t", "err", "energy"])
        for n, e in enumerate(self.energy):
            err = errs.get(n)
            w.writerow([n, repr(n * self.dt), "" if err is None else repr(err), repr(float(e))])
        return buf.getvalue()

    def snapshots_csv(self) -> str:
        """Long-format ``t,x,u`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "u"])
        for n, snap in zip(self.snapshot_steps, self.snapshots):
            t = repr(int(n) * self.dt)
            for xv, uv in zip(self.x, snap):
                w.writerow([t, repr(float(xv)), repr(float(uv))])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "E_P": None if np.isnan(self.E_P) else self.E_P,
            "steps": int(len(self.energy) - 1),
            "energy_initial": float(self.energy[0]),
            "energy_final": float(self.energy[-1]),
            "energy_increases": int(len(energy_increases(self.energy))),
            "max_relative_residual": self.max_relative_residual,
            "kernel_provenance": self.kernel_provenance,
            "slope_fit": list(self.slope_fit) if self.slope_fit else None,
        }


# -- boundary dissipativity ----------------------------------------------------

def dissipativity_matrices(theta: float, symbols: tuple, ratios: SchemeRatios):
    """Hermitian boundary matrices on the unit circle.

    ``symbols`` are ``(s^s, p^s, s^u, p^u)`` at ``z = exp(i theta)`` (without
    the ``(1 + 1/z)`` factor).  Returns ``(A_s, A_u, min_eig_s, min_eig_u)``.
    """
    if min(abs(theta), abs(abs(theta) - np.pi)) < 1e-3:
        raise DiagnosticsError("theta must stay 1e-3 away from 0 and pi")
    ss, ps, su, pu = (complex(v) for v in symbols)
    z = np.exp(1j * theta)
    w = abs(z + 1) ** 2
    a, mu = ratios.a, ratios.mu
    sin_t = ((z - z.conjugate()) / 2j).real
    alpha_s = w / 2 * (-ps).real
    beta_s = w / 2 * (ss * ss - ps + (a - 2) * ss).real - mu * sin_t * ss.imag
    gamma_s = w / 4 * (ss.conjugate() - ss * ps - (a - 2) * ps) - mu * sin_t * ps / 2j
    alpha_u = w / 2 * pu.real
    beta_u = w / 2 * (pu - su * su - (a - 2) * su).real - mu * sin_t * su.imag
    gamma_u = w / 4 * (pu * su - su.conjugate() + (a - 2) * pu) + mu * sin_t * pu / 2j
    A_s = np.array([[alpha_s, gamma_s], [np.conj(gamma_s), beta_s]])
    A_u = np.array([[alpha_u, gamma_u], [np.conj(gamma_u), beta_u]])
    for m in (A_s, A_u):
        if np.max(np.abs(m - m.conj().T)) > 1e-10 * max(1.0, np.max(np.abs(m))):
            raise DiagnosticsError("boundary matrix is not Hermitian")
    return A_s, A_u, float(np.linalg.eigvalsh(A_s)[0]), float(np.linalg.eigvalsh(A_u)[0])


def dissipativity_sweep(kernels, ratios: SchemeRatios, thetas) -> np.ndarray:
    """Rows ``(theta, min_eig_s, min_eig_u)`` over a grid of angles."""
    rows = []
    for th in thetas:
        sym = tuple(np.asarray(v).item() for v in kernels.symbols(np.exp(1j * th)))
        _, _, es, eu = dissipativity_matrices(th, sym, ratios)
        rows.append((th, es, eu))
    return np.array(rows)


# -- fits and tables -----------------------------------------------------------

def decay_fit(seq, n_min: int, n_max: int) -> tuple:
    """Least-squares slope and r^2 of ``log|seq_n|`` against ``log n``."""
    seq = np.asarray(seq, dtype=float)
    n = np.arange(n_min, min(n_max, len(seq) - 1) + 1)
    if len(n) < 10:
        raise DiagnosticsError("decay_fit needs at least 10 points")
    y = np.abs(seq[n])
    if np.any(y == 0):
        raise DiagnosticsError("decay_fit needs nonzero entries")
    lx, ly = np.log(n), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(r2)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    E_P: float
    order: Optional[float]
    monotone: bool = True


def convergence_table(hs, errors) -> list:
    """Observed orders ``log2(E(h)/E(h/2))`` between consecutive sweep points.

    ``order`` uses the actual step ratio, so non-halving sweeps work too.
    Rows where the error does not decrease are flagged, not rejected.
    """
    hs = [float(h) for h in hs]
    errors = [float(e) for e in errors]
    if len(hs) != len(errors):
        raise DiagnosticsError("hs and errors differ in length")
    if len(hs) < 3:
        raise DiagnosticsError("convergence_table needs >= 3 values")
    rows = [ConvergenceRow(hs[0], errors[0], None)]
    for i in range(1, len(hs)):
        e0, e1 = errors[i - 1], errors[i]
        ok = np.isfinite(e0) and np.isfinite(e1) and e0 > 0 and e1 > 0
        order = float(np.log(e0 / e1) / np.log(hs[i - 1] / hs[i])) if ok else None
        rows.append(ConvergenceRow(hs[i], e1, order, bool(ok and e1 < e0)))
    return rows


def convergence_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["h", "E_P", "order"])
    for r in rows:
        w.writerow([repr(r.h), repr(r.E_P), "" if r.order is None else repr(r.order)])
    return buf.getvalue()
