"""Config-driven runs and sweeps with on-disk artifacts.

A run config is a JSON object; every section is optional and falls back to
the dataclass defaults below.  The same file drives ``sweep`` when it carries
a ``sweep`` section.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import diagnostics as diag
from . import model
from .errors import ConfigError, DyadicError, IntegrationError
from .integrator import StepControl, Trajectory, integrate
from .model import Closure, ModelParams, ShellState

SCHEMA_VERSION = 1
SWEEP_AXES = ("f0", "n_shells", "g", "seed")
INITIAL_KINDS = ("zero", "fixed_point", "perturbed", "explicit")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3


# --- config ---------------------------------------------------------------------


@dataclass
class ParamsConfig:
    f0: float = 1.0
    n_shells: int = 20
    g: float = model.DEFAULT_G
    closure: str = Closure.FIXED_POINT.value

    def build(self) -> ModelParams:
        return ModelParams(f0=self.f0, n_shells=self.n_shells, g=self.g, closure=self.closure)


@dataclass
class ControlConfig:
    rtol: float = 1e-8
    atol: float = 1e-12
    dt_init: Optional[float] = None
    dt_min: float = 1e-20
    dt_max: float = math.inf
    safety: float = 0.9
    max_steps: int = 2_000_000
    method: str = "auto"

    def build(self) -> StepControl:
        return StepControl(**dataclasses.asdict(self))


@dataclass
class InitialConfig:
    """zero | fixed_point | perturbed | explicit.

    ``perturbed`` multiplies the fixed point by 1 + amplitude * U(-1, 1), so
    amplitude must stay in [0, 1] to keep the data nonnegative.  Its seed
    falls back to the run seed.
    """

    kind: str = "zero"
    seed: Optional[int] = None
    amplitude: float = 0.1
    values: Optional[list[float]] = None

    def build(self, params: ModelParams, run_seed: int) -> ShellState:
        if self.kind == "zero":
            return ShellState(0.0, np.zeros(params.size))
        if self.kind == "fixed_point":
            return model.fixed_point(params)
        if self.kind == "perturbed":
            seed = run_seed if self.seed is None else self.seed
            rng = np.random.default_rng(seed)
            factor = 1.0 + self.amplitude * rng.uniform(-1.0, 1.0, params.size)
            return ShellState(0.0, model.fixed_point(params).a * factor)
        a = np.asarray(self.values, dtype=float)
        if a.shape != (params.size,):
            raise ConfigError(f"explicit initial data needs {params.size} values, got {a.size}", field="initial.values")
        return ShellState(0.0, a)

    def validate(self) -> None:
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial.kind must be one of {INITIAL_KINDS}, got {self.kind!r}", field="initial.kind")
        if self.kind == "perturbed" and not 0.0 <= self.amplitude <= 1.0:
            raise ConfigError("perturbation amplitude must lie in [0, 1] to keep data nonnegative",
                              field="initial.amplitude")
        if self.kind == "explicit":
            if self.values is None:
                raise ConfigError("explicit initial data needs 'values'", field="initial.values")
            a = np.asarray(self.values, dtype=float)
            if not np.all(np.isfinite(a)) or np.any(a < 0):
                raise ConfigError("explicit initial data must be finite and nonnegative", field="initial.values")


@dataclass
class DiagnosticsConfig:
    enabled: bool = True
    decay_window: Optional[list[float]] = None
    average_window: Optional[list[float]] = None
    fit_range: Optional[list[int]] = None
    stencil_points: int = 10
    max_pair_samples: int = 1500


@dataclass
class SweepConfig:
    axes: dict[str, list] = field(default_factory=dict)
    max_runs: int = 64

    def validate(self) -> None:
        for name, values in self.axes.items():
            if name not in SWEEP_AXES:
                raise ConfigError(f"cannot sweep over {name!r}; choose from {SWEEP_AXES}", field=f"sweep.axes.{name}")
            if not isinstance(values, list) or not values:
                raise ConfigError("sweep axis needs a non-empty list", field=f"sweep.axes.{name}")
        if self.max_runs < 1:
            raise ConfigError("max_runs must be positive", field="sweep.max_runs")
        if self.size > self.max_runs:
            raise ConfigError(f"sweep has {self.size} points, above max_runs={self.max_runs}", field="sweep.max_runs")

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def points(self) -> list[dict[str, Any]]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.axes[n] for n in names))]


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    params: ParamsConfig = field(default_factory=ParamsConfig)
    control: ControlConfig = field(default_factory=ControlConfig)
    t_end: float = 10.0
    sample_count: Optional[int] = 1001
    sample_times: Optional[list[float]] = None
    initial: InitialConfig = field(default_factory=InitialConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    output_dir: str = "runs/out"
    seed: int = 0
    sweep: Optional[SweepConfig] = None

    def validate(self) -> tuple[ModelParams, StepControl]:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}", field="schema_version")
        params = _build(self.params, "params")
        control = _build(self.control, "control")
        if not (isinstance(self.t_end, (int, float)) and math.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigError(f"t_end must be positive, got {self.t_end}", field="t_end")
        if self.sample_times is None:
            if self.sample_count is None or self.sample_count < 2:
                raise ConfigError("sample_count must be at least 2", field="sample_count")
        else:
            ts = np.asarray(self.sample_times, dtype=float)
            if ts.size < 2 or np.any(np.diff(ts) <= 0) or ts[0] < 0 or ts[-1] > self.t_end:
                raise ConfigError("sample_times must be increasing inside [0, t_end]", field="sample_times")
        self.initial.validate()
        if self.sweep is not None:
            self.sweep.validate()
        return params, control

    def grid(self) -> np.ndarray:
        if self.sample_times is not None:
            return np.asarray(self.sample_times, dtype=float)
        return np.linspace(0.0, self.t_end, self.sample_count)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["sweep"] is None:
            del d["sweep"]
        return d

    def to_json(self) -> str:
        # json writes inf as Infinity; a plain string keeps the file strict JSON
        return json.dumps(_encode_inf(self.to_dict()), indent=2, sort_keys=False) + "\n"


def _build(section, name: str):
    try:
        return section.build()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in {name!r}: {exc}", field=name) from None


def _encode_inf(x):
    if isinstance(x, dict):
        return {k: _encode_inf(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_encode_inf(v) for v in x]
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _section(cls, data: Any, name: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object", field=name)
    known = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"unknown key(s) {extra} in {name!r}", field=f"{name}.{extra[0]}")
    data = dict(data)
    if cls is ControlConfig and isinstance(data.get("dt_max"), str):
        data["dt_max"] = float(data["dt_max"])
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object", field="<root>")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"unknown key(s) {extra}", field=extra[0])
    nested = {"params": ParamsConfig, "control": ControlConfig, "initial": InitialConfig,
              "diagnostics": DiagnosticsConfig}
    kwargs = {k: v for k, v in data.items() if k not in nested and k != "sweep"}
    for key, cls in nested.items():
        kwargs[key] = _section(cls, data.get(key), key)
    if data.get("sweep") is not None:
        kwargs["sweep"] = _section(SweepConfig, data["sweep"], "sweep")
    cfg = RunConfig(**kwargs)
    try:
        cfg.validate()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config value: {exc}", field="<root>") from None
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", field="<file>") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", field="<file>") from None
    return config_from_dict(data)


# --- single run -----------------------------------------------------------------


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    report: Optional[diag.DiagnosticsReport]
    wall_time: float


def execute(cfg: RunConfig) -> RunResult:
    params, control = cfg.validate()
    initial = cfg.initial.build(params, cfg.seed)
    start = time.perf_counter()
    traj = integrate(initial, params, control, t_end=cfg.t_end, sample_times=cfg.grid())
    report = None
    d = cfg.diagnostics
    if d.enabled:
        report = diag.diagnose(
            traj,
            decay_window=d.decay_window,
            average_window=d.average_window,
            fit_range=tuple(d.fit_range) if d.fit_range else None,
            stencil_points=d.stencil_points,
            max_pair_samples=d.max_pair_samples,
        )
    return RunResult(cfg, traj, report, time.perf_counter() - start)


def _average_window(cfg: RunConfig, traj: Trajectory) -> tuple[float, float]:
    if cfg.diagnostics.average_window:
        return tuple(cfg.diagnostics.average_window)
    t0, t1 = float(traj.times[0]), float(traj.times[-1])
    return (t0 + 0.5 * (t1 - t0), t1)


def timeseries_table(traj: Trajectory) -> str:
    p = traj.params
    a = traj.amps
    b_sq = np.sum(model.deviation_array(a, p) ** 2, axis=1)
    h56 = model.sobolev_norm(a, 5.0 / 6.0)
    flux_mid = model.energy_flux(a, p.n_shells // 2, p)
    cols = [traj.times, a.T, traj.energy_sq, b_sq, h56, flux_mid, traj.dissipation]
    header = ["t", *(f"a_{j}" for j in range(p.size)), "energy_sq", "b_norm_sq", "h56_norm", "flux_mid", "dissipation"]
    data = np.column_stack([np.atleast_2d(c).T if np.ndim(c) == 1 else c.T for c in cols])
    return _csv(header, data)


def spectrum_table(traj: Trajectory, window: Sequence[float]) -> str:
    energy = diag.time_averaged_spectrum(traj, window)
    j = np.arange(energy.size)
    return _csv(["j", "k", "E_time_avg"], np.column_stack([j, np.exp2(j), energy]), int_cols=1)


def _csv(header: Sequence[str], data: np.ndarray, int_cols: int = 0) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in data:
        cells = [str(int(v)) for v in row[:int_cols]] + ["%.17g" % v for v in row[int_cols:]]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def environment_versions() -> dict[str, str]:
    import scipy

    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__, "dyadic": pkg}


def write_artifacts(result: RunResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    traj, cfg = result.trajectory, result.config
    (out / "config.resolved.json").write_text(cfg.to_json())
    (out / "timeseries.csv").write_text(timeseries_table(traj))
    (out / "spectrum.csv").write_text(spectrum_table(traj, _average_window(cfg, traj)))
    report = result.report or diag.DiagnosticsReport(frame_constant=traj.params.frame_constant,
                                                     n_shells=traj.params.n_shells)
    (out / "diagnostics.json").write_text(report.to_json() + "\n")
    meta = {
        "versions": environment_versions(),
        "wall_time_s": result.wall_time,
        "method": traj.method,
        "step_stats": traj.stats.as_dict(),
        "samples": len(traj),
    }
    (out / "metadata.json").write_text(json.dumps(meta, indent=2) + "\n")


def summarize(result: RunResult) -> dict[str, Any]:
    """One summary row: headline numbers and check counts."""
    traj = result.trajectory
    p = traj.params
    row: dict[str, Any] = {
        "final_b_norm_sq": float(np.sum(model.deviation_array(traj.amps[-1], p) ** 2)),
        "decay_rate": math.nan,
        "spectrum_slope": math.nan,
        "mean_dissipation": diag.mean_dissipation(traj, _average_window(result.config, traj)),
        "steady_h56_sq": diag.steady_sobolev_sq(traj, 5.0 / 6.0, _average_window(result.config, traj)),
        "checks_passed": 0,
        "checks_failed": 0,
    }
    if result.report is not None:
        for rec in result.report.records:
            if rec.check == "decay_fit" and isinstance(rec.measured, dict) and "rate" in rec.measured:
                row["decay_rate"] = rec.measured["rate"]
            if rec.check == "spectrum_fit":
                row["spectrum_slope"] = rec.measured["slope"]
        row["checks_passed"] = sum(r.passed is True for r in result.report.records)
        row["checks_failed"] = sum(r.passed is False for r in result.report.records)
    return row


def _say(quiet: bool, msg: str) -> None:
    if not quiet:
        print(msg)


def _out_dir(cfg: RunConfig, out: Optional[str]) -> Path:
    return Path(out if out is not None else cfg.output_dir)


def cmd_run(path: str | os.PathLike, out: Optional[str] = None, quiet: bool = False) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    target = _out_dir(cfg, out)
    try:
        result = execute(cfg)
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IntegrationError as exc:
        print(f"integration failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    write_artifacts(result, target)
    if result.report is not None and not quiet:
        for rec in result.report.records:
            if rec.passed is not None:
                _say(quiet, f"  {'pass' if rec.passed else 'FAIL'}  {rec.check}")
    _say(quiet, f"wrote {target} ({len(result.trajectory)} samples, {result.wall_time:.2f} s)")
    return EXIT_OK


# --- sweep ----------------------------------------------------------------------


def apply_point(cfg: RunConfig, point: dict[str, Any]) -> RunConfig:
    data = cfg.to_dict()
    data.pop("sweep", None)
    for name, value in point.items():
        if name == "seed":
            data["seed"] = value
        else:
            data["params"][name] = value
    return config_from_dict(data)


def _sweep_worker(cfg_dict: dict, run_dir: str) -> dict[str, Any]:
    try:
        cfg = config_from_dict(cfg_dict)
        result = execute(cfg)
        write_artifacts(result, Path(run_dir))
        return {"status": "ok", "error": "", **summarize(result)}
    except DyadicError as exc:
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def worker_count(n_runs: int) -> int:
    env = os.environ.get("DYADIC_THREADS")
    try:
        cap = int(env) if env else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"DYADIC_THREADS must be an integer, got {env!r}", field="DYADIC_THREADS") from None
    return max(1, min(cap, n_runs))


SUMMARY_COLUMNS = ("status", "final_b_norm_sq", "decay_rate", "spectrum_slope", "mean_dissipation",
                   "steady_h56_sq", "checks_passed", "checks_failed", "error")


def cmd_sweep(path: str | os.PathLike, out: Optional[str] = None, quiet: bool = False) -> int:
    try:
        cfg = load_config(path)
        sweep = cfg.sweep or SweepConfig()
        points = sweep.points()
        configs = [apply_point(cfg, pt).to_dict() for pt in points]
        workers = worker_count(len(points))
    except ConfigError as exc:
        print(f"config error [{exc.field}]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    root = _out_dir(cfg, out)
    root.mkdir(parents=True, exist_ok=True)
    dirs = [str(root / f"run_{i:03d}") for i in range(len(points))]
    if workers == 1:
        rows = [_sweep_worker(c, d) for c, d in zip(configs, dirs)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map yields in submission order, so rows follow the axis order
            rows = list(pool.map(_sweep_worker, configs, dirs))
    axes = list(sweep.axes)
    with open(root / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", *axes, *SUMMARY_COLUMNS])
        for i, (pt, row) in enumerate(zip(points, rows)):
            cells = [_cell(row.get(c, "")) for c in SUMMARY_COLUMNS]
            writer.writerow([f"run_{i:03d}", *(pt[a] for a in axes), *cells])
    failed = sum(r["status"] != "ok" for r in rows)
    _say(quiet, f"sweep: {len(rows) - failed}/{len(rows)} runs ok, summary at {root / 'summary.csv'}")
    if failed == len(rows):
        return EXIT_INTEGRATION
    return EXIT_OK


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)
