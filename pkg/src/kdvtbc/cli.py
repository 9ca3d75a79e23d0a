"""Experiment driver: single runs, refinement sweeps, kernel export and
boundary dissipativity sweeps.

A run is described by a TOML file with ``[model]``, ``[grid]``, ``[run]`` and
``[sweep]`` sections.  Presets ``case1``/``case2``/``case3`` give the standard
test cases; flags override individual fields.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .asymptotic import asymptotic_kernels
from .diagnostics import convergence_csv, convergence_table, dissipativity_sweep
from .kernels import KERNEL_NAMES, Kernels, exact_kernels, kernels_to_csv, recurrence_condition
from .model import PROFILES, Grid, ModelParams, ParameterError, ratios_from, sample_initial
from .reference import reference_airy, spectral_propagator
from .scheme import run

OUT_ENV = "TBC_OUT_DIR"
DEFAULT_OUT = "tbc_out"
KERNEL_MODES = ("exact", "asymptotic", "auto")
REFERENCE_MODES = ("spectral", "airy", "none")
COND_SWITCH = 1e10
RATIO_SWITCH = 1e-10

# field name -> TOML section
SECTIONS = {
    "c": "model", "alpha": "model", "eps": "model",
    "x_left": "grid", "x_right": "grid", "dx": "grid", "dt": "grid", "T": "grid",
    "initial": "run", "kernel_mode": "run", "kernel_order": "run", "reference": "run",
    "snapshots": "run", "cond_switch": "run", "ratio_switch": "run",
    "sweep_dx": "sweep", "sweep_dt": "sweep",
}
SWEEP_KEYS = {"sweep_dx": "dx", "sweep_dt": "dt"}


@dataclass(frozen=True)
class RunConfig:
    c: float = 0.0
    alpha: float = 0.0
    eps: float = 1e-3
    x_left: float = 0.0
    x_right: float = 1.0
    dx: float = 2.0**-8
    dt: float = 1e-3
    T: float = 4.0
    initial: str = "gaussian"
    kernel_mode: str = "auto"
    kernel_order: int = 0
    reference: str = "spectral"
    snapshots: int = 100
    cond_switch: float = COND_SWITCH
    ratio_switch: float = RATIO_SWITCH
    sweep_dx: tuple = ()
    sweep_dt: tuple = ()

    def __post_init__(self):
        for name in ("sweep_dx", "sweep_dt"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.T > 0:
            raise ParameterError("T", f"must be > 0, got {self.T!r}")
        if self.initial not in PROFILES:
            raise ParameterError("initial", f"unknown profile {self.initial!r}")
        if self.kernel_mode not in KERNEL_MODES:
            raise ParameterError("kernel_mode", f"must be one of {KERNEL_MODES}")
        if self.reference not in REFERENCE_MODES:
            raise ParameterError("reference", f"must be one of {REFERENCE_MODES}")
        if self.reference == "airy" and (self.alpha != 0 or self.c != 0):
            raise ParameterError("reference", "airy needs alpha = c = 0")
        if self.snapshots < 1:
            raise ParameterError("snapshots", "must be >= 1")
        if self.kernel_order < 0:
            raise ParameterError("kernel_order", "must be >= 0 (0 picks the default)")
        self.params

    @property
    def params(self) -> ModelParams:
        return ModelParams(self.c, self.alpha, self.eps)

    def grid(self) -> Grid:
        return Grid.from_final_time(self.x_left, self.x_right, self.dx, self.dt, self.T)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out.setdefault(SECTIONS[f.name], {})[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        flat = {}
        for section, values in data.items():
            if not isinstance(values, dict):
                raise ParameterError(section, "expected a table")
            for key, v in values.items():
                if SECTIONS.get(key) != section:
                    raise ParameterError(f"{section}.{key}", "unknown config key")
                flat[key] = v
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        for key, v in flat.items():
            if types[key] == "float":
                flat[key] = _number(key, v)
            elif types[key] == "int":
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ParameterError(key, f"expected an integer, got {v!r}")
        return cls(**flat)

    def to_toml(self) -> str:
        lines = []
        for section, values in self.to_dict().items():
            lines.append(f"[{section}]")
            for k, v in values.items():
                lines.append(f"{k} = {_toml_value(v)}")
            lines.append("")
        return "\n".join(lines)

    @classmethod
    def from_toml(cls, text: str) -> "RunConfig":
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ParameterError("config", str(exc)) from None
        return cls.from_dict(data)


def _number(key, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParameterError(key, f"expected a number, got {v!r}")
    return float(v)


def _toml_value(v) -> str:
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v) if np.isfinite(v) else ("nan" if np.isnan(v) else ("inf" if v > 0 else "-inf"))
    return repr(v)


PRESETS = {
    "case1": RunConfig(c=0.0, alpha=0.0, eps=1e-3, initial="gaussian", T=4.0,
                       dx=2.0**-8, dt=1e-3,
                       sweep_dx=(2.0**-7, 2.0**-8, 2.0**-9, 2.0**-10)),
    "case2": RunConfig(c=0.0, alpha=1e-3, eps=1e-3, initial="gaussian", T=4.0,
                       dx=2.0**-12, dt=1e-2,
                       sweep_dt=(4e-2, 2e-2, 1e-2, 5e-3)),
    "case3": RunConfig(c=2.0, alpha=1e-3, eps=1e-3, initial="wavepacket", T=4.0,
                       dx=2.0**-8, dt=1e-3),
}


# -- kernel selection ------------------------------------------------------------

def resolve_kernel_mode(cfg: RunConfig, dx: Optional[float] = None,
                        dt: Optional[float] = None) -> str:
    """Turn ``auto`` into ``exact`` or ``asymptotic``.

    Asymptotic kernels are used when the recurrence matrix condition estimate
    exceeds ``cond_switch`` or ``dx^3 / (eps dt)`` falls below ``ratio_switch``.
    """
    if cfg.kernel_mode != "auto":
        return cfg.kernel_mode
    dx = cfg.dx if dx is None else dx
    dt = cfg.dt if dt is None else dt
    if dx**3 / (cfg.eps * dt) < cfg.ratio_switch:
        return "asymptotic"
    if recurrence_condition(ratios_from(cfg.params, dx, dt)) > cfg.cond_switch:
        return "asymptotic"
    return "exact"


def make_kernels(cfg: RunConfig, mode: str, length: int,
                 dx: Optional[float] = None, dt: Optional[float] = None) -> Kernels:
    """Kernels with at least ``length`` entries."""
    dx = cfg.dx if dx is None else dx
    dt = cfg.dt if dt is None else dt
    if mode == "exact":
        return exact_kernels(ratios_from(cfg.params, dx, dt), length)
    order = cfg.kernel_order or None
    return asymptotic_kernels(cfg.params, dt, dx, max(length - 2, 1), order=order)


# -- single runs -----------------------------------------------------------------

def make_reference(cfg: RunConfig, grid: Grid, u0: np.ndarray):
    if cfg.reference == "none":
        return None
    if cfg.reference == "airy":
        return lambda t: reference_airy(cfg.initial, t, cfg.params, grid)
    return spectral_propagator(u0, cfg.params, grid, grid.T)


def run_case(cfg: RunConfig):
    """Run one configuration; returns ``(report, kernels)``."""
    grid = cfg.grid()
    u0 = sample_initial(cfg.initial, grid)
    mode = resolve_kernel_mode(cfg)
    kernels = make_kernels(cfg, mode, grid.N + 2)
    report = run(cfg.params, grid, kernels, u0, reference=make_reference(cfg, grid, u0),
                 snapshots=cfg.snapshots, config=cfg.to_dict())
    return report, kernels


def report_json(report, cfg: RunConfig, mode: str) -> str:
    data = {
        "config": cfg.to_dict(),
        "kernel_mode": mode,
        "summary": report.summary(),
        "errors": {"step": report.error_steps.tolist(), "err": report.errors.tolist()},
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_run(report, kernels: Kernels, cfg: RunConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "series.csv").write_text(report.series_csv())
    (out / "snapshots.csv").write_text(report.snapshots_csv())
    kernels_to_csv(kernels, out / "kernels.csv")
    (out / "report.json").write_text(report_json(report, cfg, kernels.provenance))
    (out / "config.toml").write_text(cfg.to_toml())


# -- sweeps ----------------------------------------------------------------------

def sweep_points(cfg: RunConfig) -> tuple:
    """``(key, values)`` for the one non-empty sweep list."""
    given = [(SWEEP_KEYS[k], getattr(cfg, k)) for k in SWEEP_KEYS if getattr(cfg, k)]
    if len(given) != 1:
        raise ParameterError("sweep", "give exactly one of sweep_dx, sweep_dt")
    key, values = given[0]
    if len(values) < 3:
        raise ParameterError(f"sweep_{key}", ">= 3 values required")
    return key, values


def _sweep_point(args):
    cfg_dict, key, value, out = args
    cfg = RunConfig.from_dict(cfg_dict).replace(**{key: value, "sweep_dx": (), "sweep_dt": ()})
    try:
        report, kernels = run_case(cfg)
    except Exception as exc:
        return {key: value, "E_P": float("nan"), "status": f"{type(exc).__name__}: {exc}"}
    if out is not None:
        write_run(report, kernels, cfg, Path(out))
    return {key: value, "E_P": report.E_P, "status": "ok", "kernel_mode": kernels.provenance}


def run_sweep(cfg: RunConfig, out: Optional[Path] = None, jobs: int = 1):
    """One run per sweep value; failures are recorded per row.

    Returns ``(key, rows, table)`` with ``table`` from ``convergence_table``.
    """
    key, values = sweep_points(cfg)
    tasks = [(cfg.to_dict(), key, v, None if out is None else str(out / f"{key}_{i}"))
             for i, v in enumerate(values)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    table = convergence_table(values, [r["E_P"] for r in rows])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.csv").write_text(convergence_csv(table))
        (out / "sweep.json").write_text(json.dumps(
            {"config": cfg.to_dict(), "key": key, "rows": rows}, indent=2, sort_keys=True) + "\n")
    return key, rows, table


# -- kernel export and dissipativity ---------------------------------------------

def export_kernels(cfg: RunConfig, N: int) -> str:
    """``n`` plus exact and asymptotic kernels side by side, ``N`` rows."""
    if N < 1:
        raise ParameterError("length", "must be >= 1")
    ex = exact_kernels(ratios_from(cfg.params, cfg.dx, cfg.dt), N)
    asy = make_kernels(cfg, "asymptotic", N + 2)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", *(f"{k}_exact" for k in KERNEL_NAMES), *(f"{k}_asym" for k in KERNEL_NAMES)])
    for n in range(N):
        w.writerow([n, *(repr(float(getattr(ex, k)[n])) for k in KERNEL_NAMES),
                    *(repr(float(getattr(asy, k)[n])) for k in KERNEL_NAMES)])
    return buf.getvalue()


def stability_sweep(cfg: RunConfig, count: int = 200, length: int = 4000) -> str:
    """``theta,min_eig_s,min_eig_u`` rows on ``count`` angles in (0, pi)."""
    mode = resolve_kernel_mode(cfg)
    kernels = make_kernels(cfg, mode, length)
    thetas = np.linspace(1e-2, np.pi - 1e-2, count)
    rows = dissipativity_sweep(kernels, ratios_from(cfg.params, cfg.dx, cfg.dt), thetas)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "min_eig_s", "min_eig_u"])
    for r in rows:
        w.writerow([repr(float(v)) for v in r])
    return buf.getvalue()


# -- command line ----------------------------------------------------------------

def _float_list(text: str) -> tuple:
    try:
        return tuple(float(eval_power(v)) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def eval_power(text: str) -> float:
    """Parse a float, also accepting ``2^-8`` style powers."""
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        return float(base) ** float(exp)
    return float(text)


def _float_arg(text: str) -> float:
    try:
        return eval_power(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kdvtbc", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="verb", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML run configuration")
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--kernel-mode", choices=KERNEL_MODES)
    common.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    for name in ("c", "alpha", "eps", "dx", "dt", "T", "x_left", "x_right"):
        common.add_argument(f"--{name.replace('_', '-')}", dest=name, type=_float_arg)
    common.add_argument("--initial", choices=sorted(PROFILES))
    common.add_argument("--reference", choices=REFERENCE_MODES)
    common.add_argument("--snapshots", type=int)
    common.add_argument("--kernel-order", type=int)
    sub.add_parser("run", parents=[common], help="single run")
    sw = sub.add_parser("sweep", parents=[common], help="dx or dt refinement sweep")
    sw.add_argument("--sweep-dx", type=_float_list)
    sw.add_argument("--sweep-dt", type=_float_list)
    sw.add_argument("--jobs", type=int, default=1)
    kn = sub.add_parser("kernels", parents=[common], help="export exact and asymptotic kernels")
    kn.add_argument("--length", type=int, default=1000)
    st = sub.add_parser("stability-sweep", parents=[common], help="boundary dissipativity on a theta grid")
    st.add_argument("--count", type=int, default=200)
    st.add_argument("--length", type=int, default=4000)
    return p


def config_from_args(args) -> RunConfig:
    cfg = PRESETS[args.preset] if args.preset else RunConfig()
    if args.config:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ParameterError("config", str(exc)) from None
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ParameterError("config", str(exc)) from None
        base = cfg.to_dict()
        for section, values in data.items():
            if not isinstance(values, dict):
                raise ParameterError(section, "expected a table")
            base.setdefault(section, {}).update(values)
        cfg = RunConfig.from_dict(base)
    changes = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            changes[f.name] = v
    return cfg.replace(**changes) if changes else cfg


def output_dir(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, DEFAULT_OUT))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        out = output_dir(args)
        if args.verb == "run":
            report, kernels = run_case(cfg)
            write_run(report, kernels, cfg, out)
            s = report.summary()
            print(f"E_P={s['E_P']} steps={s['steps']} kernels={kernels.provenance} "
                  f"energy {s['energy_initial']:.6g} -> {s['energy_final']:.6g} "
                  f"wall={report.wall_time:.2f}s -> {out}")
        elif args.verb == "sweep":
            if args.jobs < 1:
                raise ParameterError("jobs", "must be >= 1")
            key, rows, table = run_sweep(cfg, out, args.jobs)
            for row, t in zip(rows, table):
                order = "" if t.order is None else f" order={t.order:.3f}"
                print(f"{key}={t.h!r} E_P={t.E_P!r}{order} {row['status']}")
        elif args.verb == "kernels":
            out.mkdir(parents=True, exist_ok=True)
            (out / "kernels.csv").write_text(export_kernels(cfg, args.length))
            print(f"wrote {args.length} kernel rows -> {out / 'kernels.csv'}")
        elif args.verb == "stability-sweep":
            out.mkdir(parents=True, exist_ok=True)
            text = stability_sweep(cfg, args.count, args.length)
            (out / "stability.csv").write_text(text)
            mins = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)[:, 1:].min(axis=0)
            print(f"min eigenvalues: stable side {mins[0]:.3e}, unstable side {mins[1]:.3e}")
    except ParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
