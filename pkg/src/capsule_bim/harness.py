"""Run configuration, simulation driver, convergence and stability studies.

Configuration files are flat ``key = value`` text with dotted keys; ``#``
starts a comment. Every key has a type and a default (see :data:`SCHEMA`), so
the resolved configuration written to the run manifest fully determines a run.

Output layout of :func:`simulate` (inside the run directory):

``snapshot_0000.csv`` ...
    one file per snapshot, columns ``t, j, x, y, theta, tension, alpha0``;
    ``theta`` is the full tangent angle ``W alpha + p`` and ``alpha0`` the full
    backward map ``alpha + a``.
``diagnostics.csv``
    one row per time step, columns :attr:`Diagnostics.FIELDS`.
``manifest.json``
    resolved parameters, tool version, status, failure and last good time.

Numbers are written with 17 significant digits so that they round-trip.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import spectral as sp
from .density import FlowConfig
from .evolution import (
    Diagnostics,
    FilterToggles,
    IntegratorConfig,
    SolverConfig,
    StabilityGateError,
    Trajectory,
    default_dt,
    run,
)
from .interface import (
    InterfaceState,
    InvalidShapeError,
    ResamplingError,
    ShapeSpec,
    reconstruct_tau,
    resample_equal_arclength,
)
from .membrane import MembraneParams

__all__ = [
    "ConfigError",
    "RunConfig",
    "SCHEMA",
    "OUTPUT_ROOT_ENV",
    "parse_config",
    "load_config",
    "output_directory",
    "simulate",
    "SimulationResult",
    "converge",
    "ConvergenceReport",
    "diagnose",
    "StabilityReport",
]

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "CAPSULE_BIM_OUTPUT_ROOT"
FLOAT_FMT = "%.17g"


class ConfigError(ValueError):
    """Invalid configuration, with the offending line and key when known."""

    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.key = key


# --------------------------------------------------------------------------
# schema


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean (on/off), got {text!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = text.strip().lower()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return t

    return parse


def _float_or_auto(text: str) -> float | None:
    t = text.strip().lower()
    return None if t == "auto" else float(t)


def _modes(text: str) -> tuple:
    """``"k:a:b; k:a:b"`` -> ``((k, a, b), ...)``."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(";"))):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"mode {item!r} is not of the form k:a:b")
        k = int(parts[0])
        if k < 1:
            raise ValueError(f"mode number must be >= 1, got {k}")
        out.append((k, float(parts[1]), float(parts[2])))
    return tuple(out)


def _sites(text: str) -> tuple:
    names = tuple(filter(None, (s.strip().lower() for s in text.split(","))))
    for n in names:
        if n not in ("forcing", "density", "tension"):
            raise ValueError(f"unknown filter site {n!r}")
    return names


def _positive(v):
    if v is not None and not v > 0:
        raise ValueError(f"must be positive, got {v}")
    return v


def _nonnegative(v):
    if not v >= 0:
        raise ValueError(f"must be nonnegative, got {v}")
    return v


def _grid_size(v):
    if v < 8 or v % 2:
        raise ValueError(f"must be an even integer >= 8, got {v}")
    return v


def _mu(v):
    if not 0.0 < v < 1.0:
        raise ValueError(f"must lie in (0, 1), got {v}")
    return v


def _orientation(v):
    if v not in (-1, 1):
        raise ValueError(f"must be -1 or 1, got {v}")
    return v


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    check: Callable[[Any], Any] | None = None
    doc: str = ""


SCHEMA: dict[str, _Key] = {
    "grid.n": _Key(int, 128, _grid_size, "number of nodes N"),
    "shape.kind": _Key(_choice("circle", "ellipse", "fourier"), "circle", None, "initial shape"),
    "shape.radius": _Key(float, 1.0, _positive, "circle radius / fourier base radius"),
    "shape.a": _Key(float, 1.0, _positive, "ellipse semi-axis along x"),
    "shape.b": _Key(float, 1.0, _positive, "ellipse semi-axis along y"),
    "shape.modes": _Key(_modes, (), None, "fourier polar modes 'k:a_k:b_k; ...'"),
    "shape.orientation": _Key(int, -1, _orientation, "-1 clockwise (native), 1 counterclockwise"),
    "shape.rotation": _Key(float, 0.0, None, "rotation angle of the shape"),
    "shape.center_x": _Key(float, 0.0, None, "shape center x"),
    "shape.center_y": _Key(float, 0.0, None, "shape center y"),
    "flow.q": _Key(float, 0.0, None, "strain rate Q"),
    "flow.b": _Key(float, 0.0, None, "far-field coefficient B"),
    "flow.g": _Key(float, 0.0, None, "vorticity coefficient G"),
    "flow.lambda": _Key(float, 1.0, _nonnegative, "viscosity ratio interior/exterior"),
    "membrane.kappa_b": _Key(float, 0.0, _nonnegative, "bending modulus"),
    "membrane.tension_mode": _Key(_choice("hookean", "constant"), "hookean", None, "tension law"),
    "membrane.s0": _Key(float, 0.0, None, "uniform initial Hookean tension S0"),
    "membrane.s0_modes": _Key(_modes, (), None, "S0 profile modes 'k:a_k:b_k; ...' added to s0"),
    "membrane.tension": _Key(float, 1.0, None, "tension for tension_mode = constant"),
    "filter.mu": _Key(float, 2.0 / 3.0, _mu, "filter cutoff mu"),
    "filter.forcing": _Key(_bool, True, None, "filtered bending term in g^p"),
    "filter.density": _Key(_bool, True, None, "omega^p in regular kernels and commutator"),
    "filter.tension": _Key(_bool, True, None, "D_h alpha0 in tension and transport"),
    "filter.regular": _Key(_choice("auto", "on", "off"), "auto", None, "filtered kernel geometry"),
    "filter.hilbert": _Key(_bool, False, None, "also filter the leading Hilbert term (non-analyzed)"),
    "solver.tol": _Key(float, 1e-13, _positive, "density residual tolerance"),
    "solver.max_iter": _Key(int, 200, _positive, "fixed-point iteration cap"),
    "solver.deflation": _Key(_bool, False, None, "rank-one deflation term"),
    "solver.method": _Key(_choice("auto", "fixed_point", "direct"), "auto", None, "density solver"),
    "integrator.scheme": _Key(_choice("rk4_explicit", "imex_bending"), "rk4_explicit", None, "time stepper"),
    "integrator.dt": _Key(_float_or_auto, None, _positive, "time step or auto"),
    "integrator.cfl": _Key(float, 0.25, _positive, "CFL factor for the automatic step"),
    "integrator.t_end": _Key(float, 1.0, _nonnegative, "final time"),
    "integrator.enforce_gate": _Key(_bool, True, None, "reject explicit steps above the bending gate"),
    "output.directory": _Key(str, "run", None, "run directory (relative to the output root)"),
    "output.snapshot_interval": _Key(_float_or_auto, None, _positive, "snapshot spacing or auto"),
    "output.formats": _Key(_choice("csv"), "csv", None, "output format"),
    "diagnose.disable": _Key(_sites, ("forcing", "density"), None, "sites disabled in the paired run"),
}


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "on" if v else "off"
    if v is None:
        return "auto"
    if isinstance(v, tuple) and all(isinstance(m, tuple) for m in v):
        return "; ".join(f"{int(k)}:{a!r}:{b!r}" for k, a, b in v)
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


# --------------------------------------------------------------------------
# resolved configuration


@dataclass(frozen=True)
class RunConfig:
    """A fully resolved run configuration (every schema key present)."""

    values: dict = field(default_factory=lambda: {k: s.default for k, s in SCHEMA.items()})
    source: str | None = None

    def __getitem__(self, key: str):
        return self.values[key]

    def with_values(self, **changes) -> "RunConfig":
        """Copy with keys overridden; dots in keys are written as ``__``."""
        vals = dict(self.values)
        for k, v in changes.items():
            key = k.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError("unknown key", key=key)
            vals[key] = v
        return RunConfig(vals, self.source)

    # -- builders -------------------------------------------------------

    @property
    def n(self) -> int:
        return self["grid.n"]

    def shape(self) -> ShapeSpec:
        return ShapeSpec(
            kind=self["shape.kind"],
            radius=self["shape.radius"],
            a=self["shape.a"],
            b=self["shape.b"],
            modes=self["shape.modes"],
            orientation=self["shape.orientation"],
            center=complex(self["shape.center_x"], self["shape.center_y"]),
            rotation=self["shape.rotation"],
        )

    def flow(self) -> FlowConfig:
        return FlowConfig(Q=self["flow.q"], B=self["flow.b"], G=self["flow.g"], lam=self["flow.lambda"])

    def filter_spec(self) -> sp.FilterSpec:
        return sp.FilterSpec(mu=self["filter.mu"])

    def toggles(self) -> FilterToggles:
        reg = {"auto": None, "on": True, "off": False}[self["filter.regular"]]
        return FilterToggles(
            forcing=self["filter.forcing"],
            density=self["filter.density"],
            tension=self["filter.tension"],
            regular=reg,
            hilbert=self["filter.hilbert"],
        )

    def solver(self, toggles: FilterToggles | None = None) -> SolverConfig:
        return SolverConfig(
            filt=self.filter_spec(),
            toggles=toggles or self.toggles(),
            tol=self["solver.tol"],
            max_iter=self["solver.max_iter"],
            deflation=self["solver.deflation"],
            method=self["solver.method"],
        )

    def initial_state(self, n: int | None = None) -> InterfaceState:
        return resample_equal_arclength(self.shape(), n or self.n)

    def membrane(self, initial: InterfaceState) -> MembraneParams:
        s0: float | np.ndarray = float(self["membrane.s0"])
        if self["membrane.s0_modes"]:
            x = initial.grid.nodes
            prof = np.full(initial.n, s0)
            for k, a, b in self["membrane.s0_modes"]:
                prof = prof + a * np.cos(k * x) + b * np.sin(k * x)
            s0 = prof
        return MembraneParams(
            kappa_b=self["membrane.kappa_b"],
            mode=self["membrane.tension_mode"],
            s0=s0,
            tension=self["membrane.tension"],
            sigma0=initial.sigma,
        )

    def integrator(self, dt: float | None = None) -> IntegratorConfig:
        return IntegratorConfig(
            scheme=self["integrator.scheme"],
            dt=dt if dt is not None else self["integrator.dt"],
            cfl=self["integrator.cfl"],
            t_end=self["integrator.t_end"],
            snapshot_interval=self["output.snapshot_interval"],
            enforce_gate=self["integrator.enforce_gate"],
        )

    def build(self, n: int | None = None):
        """Construct and validate ``(initial, membrane, flow, solver)``.

        Raises :class:`ConfigError` for anything that makes the run
        ill-posed before a single step is taken.
        """
        try:
            initial = self.initial_state(n)
            membrane = self.membrane(initial)
            flow = self.flow()
            solver = self.solver()
            self.integrator()
        except (InvalidShapeError, ResamplingError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return initial, membrane, flow, solver

    def to_text(self) -> str:
        return "".join(f"{k} = {_format_value(v)}\n" for k, v in self.values.items())

    def resolved(self, initial: InterfaceState, membrane: MembraneParams, flow: FlowConfig, dt: float) -> dict:
        """Parameter dictionary for the manifest, including derived values."""
        out = {k: _format_value(v) for k, v in self.values.items()}
        tg = self.toggles().resolve(membrane.kappa_b, flow)
        out.update(
            {
                "derived.beta": flow.beta,
                "derived.chi": flow.chi,
                "derived.sigma0": initial.sigma,
                "derived.filter.regular": tg.regular,
                "derived.dt": dt,
                "derived.analyzed_scheme": tg.analyzed,
            }
        )
        return out


def parse_config(text: str, source: str | None = None) -> RunConfig:
    """Parse flat ``key = value`` text into a :class:`RunConfig`.

    Raises
    ------
    ConfigError
        Unknown or duplicate keys, malformed lines, or invalid values; the
        message names the line number and key.
    """
    values = {k: s.default for k, s in SCHEMA.items()}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in SCHEMA:
            raise ConfigError("unknown key", line=lineno, key=key)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", line=lineno, key=key)
        seen[key] = lineno
        spec = SCHEMA[key]
        try:
            v = spec.parse(value)
            if spec.check is not None:
                v = spec.check(v)
        except ValueError as exc:
            raise ConfigError(str(exc), line=lineno, key=key) from None
        values[key] = v
    cfg = RunConfig(values, source)
    if cfg["shape.kind"] == "fourier" and not cfg["shape.modes"] and "shape.modes" in seen:
        raise ConfigError("fourier shape needs at least one mode", line=seen["shape.modes"], key="shape.modes")
    return cfg


def load_config(path: str | os.PathLike) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {p}: {exc.strerror}") from None
    return parse_config(text, source=str(p))


def output_directory(cfg: RunConfig, suffix: str = "") -> Path:
    """Run directory: ``output.directory`` under the output root.

    The root is the value of ``CAPSULE_BIM_OUTPUT_ROOT`` if set, else the
    current directory. An absolute ``output.directory`` is used as is unless
    the environment variable is set, in which case only its last component is
    kept under the root.
    """
    d = Path(cfg["output.directory"])
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root:
        d = Path(root) / (d.name if d.is_absolute() else d)
    return Path(str(d) + suffix)


# --------------------------------------------------------------------------
# file writers


def _write_snapshot(path: Path, snap) -> None:
    st = snap.state
    tau = reconstruct_tau(st)
    alpha = st.grid.nodes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "j", "x", "y", "theta", "tension", "alpha0"])
        for idx, j in enumerate(st.grid.indices):
            w.writerow(
                [
                    FLOAT_FMT % snap.time,
                    int(j),
                    FLOAT_FMT % tau[idx].real,
                    FLOAT_FMT % tau[idx].imag,
                    FLOAT_FMT % st.theta[idx],
                    FLOAT_FMT % snap.tension[idx],
                    FLOAT_FMT % (alpha[idx] + st.alpha0[idx]),
                ]
            )


def _write_diagnostics(path: Path, history: list[Diagnostics]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(Diagnostics.FIELDS)
        for d in history:
            w.writerow([FLOAT_FMT % v for v in d.row()])


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"not serializable: {type(v)}")


def _tool_info() -> dict:
    from . import __version__

    return {"name": "capsule-bim", "version": __version__, "numpy": np.__version__, "python": platform.python_version()}


# --------------------------------------------------------------------------
# simulate


@dataclass
class SimulationResult:
    directory: Path
    trajectory: Trajectory
    manifest: dict

    @property
    def ok(self) -> bool:
        return self.trajectory.completed

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 3


def _prepare(cfg: RunConfig, n: int | None = None, dt: float | None = None):
    initial, membrane, flow, solver = cfg.build(n)
    integ = cfg.integrator(dt)
    step = integ.dt or default_dt(initial, membrane, flow, integ.scheme, integ.cfl)
    try:
        IntegratorConfig(**{**integ.__dict__, "dt": step})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return initial, membrane, flow, solver, integ, step


def simulate(cfg: RunConfig, directory: str | os.PathLike | None = None) -> SimulationResult:
    """Run one configuration and write snapshots, diagnostics and a manifest.

    Everything that can be checked without time stepping (shape, membrane,
    step gate) is validated before the output directory is created, so a bad
    configuration leaves no files behind.

    Raises
    ------
    ConfigError
        Invalid configuration; nothing is written.
    """
    initial, membrane, flow, solver, integ, step = _prepare(cfg)
    out = Path(directory) if directory is not None else output_directory(cfg)
    try:
        traj = run(initial, membrane, flow, IntegratorConfig(**{**integ.__dict__, "dt": step}), solver)
    except StabilityGateError as exc:
        raise ConfigError(str(exc), key="integrator.dt") from exc

    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, snap in enumerate(traj.snapshots):
        name = f"snapshot_{i:04d}.csv"
        _write_snapshot(out / name, snap)
        files.append(name)
    _write_diagnostics(out / "diagnostics.csv", traj.history)
    files.append("diagnostics.csv")
    manifest = {
        "tool": _tool_info(),
        "config_source": cfg.source,
        "parameters": cfg.resolved(initial, membrane, flow, traj.dt or step),
        "status": "completed" if traj.completed else "failed",
        "failure": traj.failure,
        "last_good_time": traj.last_good_time if not traj.completed else traj.snapshots[-1].time,
        "steps": traj.steps,
        "snapshot_times": [s.time for s in traj.snapshots],
        "files": files + ["manifest.json"],
    }
    _write_json(out / "manifest.json", manifest)
    return SimulationResult(out, traj, manifest)


# --------------------------------------------------------------------------
# converge


@dataclass
class ConvergenceReport:
    """Successive-resolution differences and observed orders.

    ``rows[i]`` compares ``resolutions[i]`` with ``resolutions[i+1]``;
    ``order[q][i]`` is ``log2(diff[i] / diff[i+1])`` for quantity ``q``.
    """

    resolutions: list
    t_end: float
    dt: float
    rows: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    QUANTITIES = ("theta", "sigma", "alpha0", "tau")

    @property
    def complete(self) -> bool:
        return not self.failures

    def differences(self, q: str) -> list:
        return [r[f"diff_{q}"] for r in self.rows]

    def order(self, q: str) -> list:
        d = self.differences(q)
        return [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(d, d[1:])]

    def to_csv(self, path: Path) -> None:
        cols = ["n_coarse", "n_fine"] + [f"diff_{q}" for q in self.QUANTITIES] + [f"order_{q}" for q in self.QUANTITIES]
        orders = {q: [math.nan] + self.order(q) for q in self.QUANTITIES}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(cols)
            for i, r in enumerate(self.rows):
                vals = [r["n_coarse"], r["n_fine"]]
                vals += [FLOAT_FMT % r[f"diff_{q}"] for q in self.QUANTITIES]
                vals += [FLOAT_FMT % orders[q][i] for q in self.QUANTITIES]
                w.writerow(vals)


def _l2(f: np.ndarray) -> float:
    return float(np.sqrt(2 * np.pi / f.size * np.sum(np.abs(f) ** 2)))


def state_difference(fine: InterfaceState, coarse: InterfaceState) -> dict:
    """Discrete l2 differences after trigonometric restriction of ``fine``."""
    n = coarse.n
    return {
        "diff_theta": _l2(sp.restrict(fine.theta_periodic, n) - coarse.theta_periodic),
        "diff_sigma": abs(fine.sigma - coarse.sigma),
        "diff_alpha0": _l2(sp.restrict(fine.alpha0, n) - coarse.alpha0),
        "diff_tau": _l2(sp.restrict(reconstruct_tau(fine), n) - reconstruct_tau(coarse)),
    }


def _run_one(args):
    cfg, n, dt = args
    initial, membrane, flow, solver, integ, _ = _prepare(cfg, n, dt)
    traj = run(initial, membrane, flow, IntegratorConfig(**{**integ.__dict__, "dt": dt}), solver)
    return n, traj


def converge(
    cfg: RunConfig,
    resolutions: list[int],
    directory: str | os.PathLike | None = None,
    workers: int = 1,
) -> ConvergenceReport:
    """Self-refinement study over a doubling chain of resolutions.

    Every run uses the step of the finest grid (the configured ``dt`` if given,
    else the automatic step at the finest ``N``) so that successive
    differences measure the spatial error. If ``directory`` is given a CSV
    table ``convergence.csv`` and ``manifest.json`` are written there.

    Raises
    ------
    ConfigError
        Resolutions are not a doubling chain, or the configuration is invalid.
    """
    res = sorted(int(n) for n in resolutions)
    if len(res) < 2:
        raise ConfigError("need at least two resolutions")
    for a, b in zip(res, res[1:]):
        if b != 2 * a:
            raise ConfigError(f"resolutions must double, got {a} then {b}")
    *_, dt = _prepare(cfg, res[-1])
    for n in res:
        _prepare(cfg, n, dt)

    jobs = [(cfg, n, dt) for n in res]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_one, jobs))
    else:
        results = dict(map(_run_one, jobs))

    report = ConvergenceReport(res, cfg["integrator.t_end"], dt)
    for n, traj in results.items():
        if not traj.completed:
            report.failures[n] = {"failure": traj.failure, "last_good_time": traj.last_good_time}
    for a, b in zip(res, res[1:]):
        if a in report.failures or b in report.failures:
            continue
        row = {"n_coarse": a, "n_fine": b}
        row.update(state_difference(results[b].final, results[a].final))
        report.rows.append(row)

    if directory is not None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / "convergence.csv")
        initial, membrane, flow, *_ = _prepare(cfg, res[-1], dt)
        _write_json(
            out / "manifest.json",
            {
                "tool": _tool_info(),
                "config_source": cfg.source,
                "parameters": cfg.resolved(initial, membrane, flow, dt),
                "resolutions": res,
                "status": "completed" if report.complete else "partial",
                "failures": {str(k): v for k, v in report.failures.items()},
                "orders": {q: report.order(q) for q in ConvergenceReport.QUANTITIES},
            },
        )
    return report


# --------------------------------------------------------------------------
# diagnose


@dataclass
class StabilityReport:
    """Paired runs: as configured versus with selected filter sites disabled."""

    disabled: tuple
    analyzed: bool
    notes: list
    times: dict = field(default_factory=dict)
    tails: dict = field(default_factory=dict)
    failure: dict = field(default_factory=dict)
    blow_up_time: dict = field(default_factory=dict)

    def growth(self, name: str) -> float:
        """``max tail / initial tail`` for run ``name`` (``inf`` on failure)."""
        t = self.tails[name]
        if self.failure[name] is not None:
            return math.inf
        return max(t) / t[0] if t[0] > 0 else math.inf

    def to_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variant", "time", "high_mode_max"])
            for name in self.times:
                for t, v in zip(self.times[name], self.tails[name]):
                    w.writerow([name, FLOAT_FMT % t, FLOAT_FMT % v])


def _variant(tg: FilterToggles, disabled: tuple) -> FilterToggles:
    changes = {site: False for site in disabled}
    if disabled:
        changes["regular"] = False
    return FilterToggles(**{**tg.__dict__, **changes})


def _run_variant(args):
    cfg, toggles = args
    initial, membrane, flow, _, integ, step = _prepare(cfg)
    traj = run(initial, membrane, flow, IntegratorConfig(**{**integ.__dict__, "dt": step}), cfg.solver(toggles))
    return traj


def diagnose(cfg: RunConfig, directory: str | os.PathLike | None = None, workers: int = 1) -> StabilityReport:
    """Stability report for the configured run and its less filtered twin.

    The twin disables the sites listed in ``diagnose.disable`` (and the
    ``regular`` site whenever any site is disabled). Filtering the leading
    Hilbert term is outside the analyzed scheme; such configurations are run
    but flagged.
    """
    base = cfg.toggles()
    disabled = cfg["diagnose.disable"]
    notes = []
    if base.hilbert:
        notes.append("filter.hilbert = on filters the leading singular term: configuration is not the analyzed scheme")
    if not (base.forcing and base.density and base.tension):
        notes.append("reference run already has filter sites disabled")
    variants = {"configured": base, "disabled": _variant(base, disabled)}
    jobs = [(cfg, tg) for tg in variants.values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trajs = list(pool.map(_run_variant, jobs))
    else:
        trajs = list(map(_run_variant, jobs))

    rep = StabilityReport(disabled=disabled, analyzed=base.analyzed, notes=notes)
    for name, traj in zip(variants, trajs):
        rep.times[name] = [d.time for d in traj.history]
        rep.tails[name] = [d.high_mode_max for d in traj.history]
        rep.failure[name] = traj.failure
        rep.blow_up_time[name] = None if traj.completed else traj.last_good_time

    if directory is not None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        rep.to_csv(out / "stability.csv")
        _write_json(
            out / "report.json",
            {
                "tool": _tool_info(),
                "config_source": cfg.source,
                "analyzed_scheme": rep.analyzed,
                "notes": rep.notes,
                "disabled_sites": list(disabled),
                "variants": {
                    name: {
                        "failure": rep.failure[name],
                        "first_blow_up_time": rep.blow_up_time[name],
                        "initial_tail": rep.tails[name][0],
                        "max_tail": max(rep.tails[name]),
                        "growth": rep.growth(name),
                    }
                    for name in variants
                },
            },
        )
    return rep
