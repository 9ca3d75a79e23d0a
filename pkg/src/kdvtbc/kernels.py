"""Exact discrete transparent-boundary kernels from the root relations.

For ``|z| > 1`` the characteristic quartic of the Z-transformed scheme has two
roots inside the unit disk (stable pair, superscript ``s``) and two outside
(unstable pair, ``u``).  With ``x = 1/z`` the boundary kernels are the Taylor
coefficients in ``x`` of

    (1 + x) * (r1 + r2),  (1 + x) * r1 r2,  (1 + x) * (r3 + r4),  (1 + x) * r3 r4.

Instead of an inverse Z-transform, the coefficients are generated by matching
powers of ``x`` in the four symmetric-function identities they satisfy.  Each
new index costs one 4x4 solve with a fixed matrix plus Cauchy-product history
sums.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg

from .model import SchemeRatios

KERNEL_NAMES = ("ss", "ps", "su", "pu")
SEPARATION_TOL = 1e-12
COND_WARN = 1e12


class SeparationError(RuntimeError):
    """Quartic roots are not split two inside / two outside the unit disk."""


class KernelError(RuntimeError):
    """Kernel generation failed (complex leading terms, singular recurrence)."""


class KernelConditionWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class QuarticRoots:
    r1: complex
    r2: complex
    r3: complex
    r4: complex
    z: complex

    @property
    def roots(self) -> np.ndarray:
        return np.array([self.r1, self.r2, self.r3, self.r4])

    @property
    def stable_sum(self):
        return self.r1 + self.r2

    @property
    def stable_product(self):
        return self.r1 * self.r2

    @property
    def unstable_sum(self):
        return self.r3 + self.r4

    @property
    def unstable_product(self):
        return self.r3 * self.r4


@dataclass(frozen=True)
class Kernels:
    """Four boundary convolution sequences and where they came from.

    ``provenance`` is ``"exact"`` or ``"asymptotic"``.  ``variant`` and
    ``order`` are only meaningful for asymptotic kernels.  ``cond_log`` holds
    the condition estimate of the 4x4 solve used for each index (``nan`` where
    no solve was needed).
    """

    ss: np.ndarray
    ps: np.ndarray
    su: np.ndarray
    pu: np.ndarray
    provenance: str = "exact"
    cond_log: np.ndarray = field(default=None, repr=False)
    variant: Optional[str] = None
    order: Optional[int] = None
    ratios: Optional[SchemeRatios] = field(default=None, repr=False)
    notes: tuple = ()

    def __post_init__(self):
        n = len(self.ss)
        for name in KERNEL_NAMES:
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1 or len(arr) != n:
                raise KernelError("kernel sequences must be 1-D of equal length")
            if not np.all(np.isfinite(arr)):
                raise KernelError(f"non-finite entries in {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.cond_log is None:
            object.__setattr__(self, "cond_log", np.full(n, np.nan))

    def __len__(self):
        return len(self.ss)

    def head(self) -> tuple:
        """Index-0 values ``(ss0, ps0, su0, pu0)``."""
        return tuple(float(getattr(self, name)[0]) for name in KERNEL_NAMES)

    def truncated(self, length: int) -> "Kernels":
        if length > len(self):
            raise KernelError(f"cannot truncate {len(self)} kernels to {length}")
        return replace(
            self, ss=self.ss[:length], ps=self.ps[:length], su=self.su[:length],
            pu=self.pu[:length], cond_log=self.cond_log[:length])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.ss, self.ps, self.su, self.pu])

    def symbols(self, z) -> tuple:
        """Truncated Laurent sums ``sum_n k_n z^-n`` for the four sequences.

        Returns the symbols with the ``(1 + 1/z)`` factor removed, i.e. the
        values of ``r1 + r2``, ``r1 r2``, ``r3 + r4``, ``r3 r4``.
        """
        z = np.asarray(z, dtype=complex)
        powers = z[..., None] ** (-np.arange(len(self)))
        factor = 1.0 + 1.0 / z
        return tuple((powers @ getattr(self, name)) / factor for name in KERNEL_NAMES)


def char_coefficients(p, ratios: SchemeRatios) -> np.ndarray:
    """Coefficients (highest degree first) of the characteristic quartic."""
    a, mu = ratios.a, ratios.mu
    return np.array([
        1.0,
        -(2.0 - a + mu * p),
        (4.0 / ratios.lambda_D + 2.0 * mu) * p,
        2.0 - a - mu * p,
        -1.0,
    ], dtype=complex)


def mobius(z) -> complex:
    """``p(z) = (z - 1)/(z + 1)``, with ``p(inf) = 1``."""
    if np.isinf(z):
        return 1.0 + 0.0j
    z = complex(z)
    return (z - 1.0) / (z + 1.0)


def _polish(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    d = np.polyder(coeffs)
    out = roots.copy()
    for i, r in enumerate(out):
        dp = np.polyval(d, r)
        if dp != 0:
            out[i] = r - np.polyval(coeffs, r) / dp
    return out


def quartic_roots_at(z, ratios: SchemeRatios) -> QuarticRoots:
    """Roots of the characteristic quartic at ``z`` (``np.inf`` allowed)."""
    if not np.isinf(z) and abs(z) <= 1.0:
        raise SeparationError(f"|z| must exceed 1, got |z|={abs(z)!r}")
    coeffs = char_coefficients(mobius(z), ratios)
    roots = _polish(coeffs, np.roots(coeffs))
    roots = roots[np.argsort(np.abs(roots), kind="stable")]
    mods = np.abs(roots)
    if mods[1] >= 1.0 - SEPARATION_TOL or mods[2] <= 1.0 + SEPARATION_TOL:
        raise SeparationError(
            f"roots not separated at z={z!r}: moduli {mods.tolist()}")
    return QuarticRoots(*(complex(r) for r in roots), z=complex(z))


def sigma_sequences(ratios: SchemeRatios) -> np.ndarray:
    """Right-hand sides of the four functional equations, shape (4, 3).

    Column ``k`` holds the coefficient of ``x**k``; higher powers vanish.
    """
    a, mu = ratios.a, ratios.mu
    c0 = 4.0 / ratios.lambda_D + 2.0 * mu
    return np.array([
        [2 - a + mu, 2 - a - mu, 0.0],
        [c0, 0.0, -c0],
        [-(2 - a - mu), -2 * (2 - a), -(2 - a + mu)],
        [-1.0, -2.0, -1.0],
    ])


def recurrence_matrix(head) -> np.ndarray:
    """Matrix of the linear system for index ``n >= 1``.

    Unknown ordering is ``(ss_n, ps_n, su_n, pu_n)``.
    """
    ss0, ps0, su0, pu0 = head
    return np.array([
        [1.0, 0.0, 1.0, 0.0],
        [su0, 1.0, ss0, 1.0],
        [pu0, su0, ps0, ss0],
        [0.0, pu0, 0.0, ps0],
    ])


def init_kernels(ratios: SchemeRatios) -> tuple:
    """Index-0 kernel values from the quartic roots at ``z = inf``."""
    try:
        roots = quartic_roots_at(np.inf, ratios)
    except SeparationError as exc:
        raise KernelError(f"{exc}; the exact recurrence cannot start at this dx, "
                          "use asymptotic kernels") from exc
    values = (roots.stable_sum, roots.stable_product,
              roots.unstable_sum, roots.unstable_product)
    for name, v in zip(KERNEL_NAMES, values):
        if abs(v.imag) > 1e-10 * max(1.0, abs(v)):
            raise KernelError(f"{name}_0 has imaginary part {v.imag:.3e}; "
                              "use asymptotic kernels")
    return tuple(float(v.real) for v in values)


def head_residuals(head, ratios: SchemeRatios) -> np.ndarray:
    """Residuals of the nonlinear index-0 system at the given head values."""
    ss0, ps0, su0, pu0 = head
    sig = sigma_sequences(ratios)[:, 0]
    return np.array([
        ss0 + su0 - sig[0],
        ps0 + pu0 + ss0 * su0 - sig[1],
        pu0 * ss0 + ps0 * su0 - sig[2],
        ps0 * pu0 - sig[3],
    ])


def _history(ss, ps, su, pu, n):
    """Known Cauchy-product terms entering the equations at index ``n``."""
    if n >= 2:
        r = slice(n - 1, 0, -1)
        s_su = np.dot(ss[1:n], su[r])
        s_pu = np.dot(ss[1:n], pu[r])
        p_su = np.dot(ps[1:n], su[r])
        p_pu = np.dot(ps[1:n], pu[r])
    else:
        s_su = s_pu = p_su = p_pu = 0.0
    return np.array([
        0.0,
        pu[n - 1] + ps[n - 1] + s_su,
        s_pu + p_su,
        p_pu,
    ])


class _Recurrence:
    def __init__(self, head, ratios):
        self.matrix = recurrence_matrix(head)
        try:
            self.lu = scipy.linalg.lu_factor(self.matrix, check_finite=True)
        except (ValueError, scipy.linalg.LinAlgError) as exc:  # pragma: no cover
            raise KernelError(f"recurrence matrix factorization failed: {exc}") from exc
        if not np.all(np.isfinite(self.lu[0])) or np.any(np.diag(self.lu[0]) == 0):
            raise KernelError(
                "recurrence matrix is singular; use asymptotic kernels for this dx")
        self.cond = float(np.linalg.cond(self.matrix))
        if not np.isfinite(self.cond):
            raise KernelError(
                "recurrence matrix is singular; use asymptotic kernels for this dx")
        self.sigma = sigma_sequences(ratios)

    def solve(self, rhs):
        x = scipy.linalg.lu_solve(self.lu, rhs)
        # one pass of iterative refinement
        x += scipy.linalg.lu_solve(self.lu, rhs - self.matrix @ x)
        return x

    def fill(self, arrays, start, stop, cond_log):
        ss, ps, su, pu = arrays
        for n in range(start, stop):
            sig = self.sigma[:, n] if n < 3 else np.zeros(4)
            x = self.solve(sig - _history(ss, ps, su, pu, n))
            ss[n], ps[n], su[n], pu[n] = x
            cond_log[n] = self.cond


def recurrence_condition(ratios: SchemeRatios) -> float:
    """Condition number of the 4x4 recurrence matrix (inf when singular)."""
    try:
        return float(np.linalg.cond(recurrence_matrix(init_kernels(ratios))))
    except (SeparationError, KernelError):
        return float("inf")


def _condition_notes(cond):
    if cond > COND_WARN:
        msg = (f"kernel recurrence matrix condition estimate {cond:.3e} exceeds "
               f"{COND_WARN:.0e}; consider asymptotic kernels")
        warnings.warn(msg, KernelConditionWarning, stacklevel=3)
        return (msg,)
    return ()


def exact_kernels(ratios: SchemeRatios, length: int) -> Kernels:
    """Generate ``length`` coefficients of each exact kernel sequence."""
    if length < 1:
        raise ValueError("length must be >= 1")
    head = init_kernels(ratios)
    arrays = [np.zeros(length) for _ in KERNEL_NAMES]
    for arr, v in zip(arrays, head):
        arr[0] = v
    cond_log = np.full(length, np.nan)
    rec = _Recurrence(head, ratios)
    rec.fill(arrays, 1, length, cond_log)
    return Kernels(*arrays, provenance="exact", cond_log=cond_log, ratios=ratios,
                   notes=_condition_notes(rec.cond))


def extend_kernels(kernels: Kernels, length: int) -> Kernels:
    """Continue the exact recurrence so that ``len(result) == length``."""
    if kernels.provenance != "exact" or kernels.ratios is None:
        raise KernelError("only exact kernels with known ratios can be extended")
    if length <= len(kernels):
        return kernels.truncated(length)
    start = len(kernels)
    arrays = []
    for name in KERNEL_NAMES:
        arr = np.zeros(length)
        arr[:start] = getattr(kernels, name)
        arrays.append(arr)
    cond_log = np.full(length, np.nan)
    cond_log[:start] = kernels.cond_log
    rec = _Recurrence(kernels.head(), kernels.ratios)
    rec.fill(arrays, start, length, cond_log)
    return Kernels(*arrays, provenance="exact", cond_log=cond_log, ratios=kernels.ratios,
                   notes=kernels.notes or _condition_notes(rec.cond))


def functional_residuals(kernels: Kernels, ratios: SchemeRatios) -> np.ndarray:
    """Coefficient residuals of the four functional equations, shape (4, n).

    Only indices ``0..len-1`` are checked, where truncation does not matter.
    """
    n = len(kernels)
    ss, ps, su, pu = (np.asarray(getattr(kernels, k)) for k in KERNEL_NAMES)

    def cauchy(f, g):
        return np.convolve(f, g)[:n]

    def shift_add(f):
        out = f.copy()
        out[1:] += f[:-1]
        return out

    rhs = np.zeros((4, n))
    sig = sigma_sequences(ratios)
    m = min(3, n)
    rhs[:, :m] = sig[:, :m]
    lhs = np.array([
        ss + su,
        shift_add(pu) + shift_add(ps) + cauchy(su, ss),
        cauchy(pu, ss) + cauchy(ps, su),
        cauchy(ps, pu),
    ])
    return lhs - rhs


# -- CSV interchange ---------------------------------------------------------

def _fmt(v: float) -> str:
    return repr(float(v))


def kernels_to_csv(kernels: Kernels, path=None) -> str:
    """Write ``n,ss,ps,su,pu,provenance`` rows; returns the text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *KERNEL_NAMES, "provenance"])
    for n in range(len(kernels)):
        w.writerow([n, *(_fmt(getattr(kernels, k)[n]) for k in KERNEL_NAMES),
                    kernels.provenance])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def kernels_from_csv(source) -> Kernels:
    """Read kernels written by :func:`kernels_to_csv` (path or text)."""
    if isinstance(source, str) and "\n" in source:
        rows = list(csv.DictReader(io.StringIO(source)))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.DictReader(fh))
    if not rows:
        raise KernelError("empty kernel CSV")
    idx = [int(r["n"]) for r in rows]
    if idx != list(range(len(rows))):
        raise KernelError("kernel CSV indices must be 0..n-1 in order")
    cols = {k: np.array([float(r[k]) for r in rows]) for k in KERNEL_NAMES}
    provenance = rows[0].get("provenance") or "exact"
    return Kernels(**cols, provenance=provenance)
