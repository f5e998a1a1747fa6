"""Command-line front end.

Every command writes one data file (CSV or JSON) and a ``<output>.meta.json``
sidecar holding the resolved configuration, library versions, the reference
checksum where one applies, wall time and any failed grid points.

Settings resolve as: command-line flags over config file over defaults.  The
config file is flat ``key = value`` lines with ``#`` comments.  Frequencies
are quoted in MHz and converted once, at the point of use.
"""
from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .adiabatic import compare_trajectories, stark_crossings
from .dynamics import IntegrationError, PositivityError, state_trajectory
from .experiments import (
    LeakageConfig,
    SweepConfig,
    leakage_scan,
    lifetime_baseline,
    reference_unitary,
    sweep_hyperfine,
    sweep_lifetime,
)
from .gate_compiler import (
    arbitrary_rotation_program,
    compile,
    dump_program,
    naive_cphase_program,
    not_gate_program,
    phase_insensitive_distance,
    program_unitary,
    qubit_block,
    render_table,
    robust_cphase_program,
    rotation_target,
)
from .ion_model import DIM, E, G0, G1, ConfigurationError, IonParams
from .pulse_engine import SechPulseParams, angular

log = logging.getLogger(__name__)

COMMANDS = ("bloch-traj", "leakage", "rotation-check", "not-check", "cphase-surface", "lifetime-sweep",
            "program-dump")
PROGRAMS = ("arbitrary_rotation", "not_gate", "naive_cphase", "robust_cphase", "robust_cphase_unrefocused")
FORMATS = ("csv", "json")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_POINT_FAILURES = 4

# inputs read as frequencies (MHz) and rescaled by apply_2pi
FREQUENCY_KEYS = ("omega0", "beta", "delta_opt", "delta_hf", "delta_c", "delta_t", "delta_dd",
                  "dc_min", "dc_max", "dt_min", "dt_max", "lifetime_dc")


@dataclass(frozen=True)
class RunConfig:
    command: str = "leakage"
    output: Optional[str] = None
    format: str = "csv"
    apply_2pi: bool = True
    tol: Optional[float] = None
    jobs: int = 1
    # pulse
    omega0: float = 4.0
    mu: float = 3.0
    beta: float = 1.28
    duration: float = 1.5
    gap: float = 0.0
    # single ion
    delta_opt: float = 0.1
    delta_hf: float = 0.03
    alpha: float = 0.0
    addressed: int = 0
    thetas: Tuple[float, ...] = (0.0, np.pi / 2, np.pi)
    n_points: int = 301
    frame: str = "accelerated"
    # two ions
    delta_c: float = 0.1
    delta_t: float = 0.08
    delta_dd: float = 20.0
    dc_min: float = -0.03
    dc_max: float = 0.03
    dc_count: int = 21
    dt_min: float = -0.03
    dt_max: float = 0.03
    dt_count: int = 21
    lifetime_dc: float = 0.0
    refocus: bool = True
    # decay
    decay: bool = False
    te: float = 100.0
    te_list: Tuple[float, ...] = (100.0, 500.0, 1000.0, 1e6)
    b0: float = 0.5
    b1: float = 0.5
    dump: bool = False
    # program-dump
    program: str = "robust_cphase"

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigurationError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}")
        if self.program not in PROGRAMS:
            raise ConfigurationError(f"program must be one of {PROGRAMS}")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be at least 1")
        if self.tol is not None and not self.tol > 0:
            raise ConfigurationError("tol must be positive")

    def w(self, value: float) -> float:
        return angular(value, self.apply_2pi)

    def pulse(self) -> SechPulseParams:
        return SechPulseParams(self.w(self.omega0), self.mu, self.w(self.beta), self.duration)

    def ion(self) -> IonParams:
        return IonParams(self.w(self.delta_opt), self.w(self.delta_hf), hf_bound=self.w(0.06))

    def sweep(self) -> SweepConfig:
        keys = {f.name for f in fields(SweepConfig)} - {"psi_in"}
        return SweepConfig(**{k: getattr(self, k) for k in keys})

    def leakage(self) -> LeakageConfig:
        keys = {f.name for f in fields(LeakageConfig)}
        kw = {k: getattr(self, k) for k in keys if k != "tol"}
        return LeakageConfig(**kw, **({"tol": self.tol} if self.tol else {}))

    def angular_values(self) -> Dict[str, float]:
        return {f"{k}_rad_per_us": self.w(getattr(self, k)) for k in FREQUENCY_KEYS}


# ---------------------------------------------------------------- parsing


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


def _parse_optional_str(text: str) -> Optional[str]:
    return None if text.strip().lower() in ("", "none") else text.strip()


_DEFAULTS = RunConfig()
_PARSERS = {}
for _f in fields(RunConfig):
    _d = getattr(_DEFAULTS, _f.name)
    if _f.name in ("tol",):
        _PARSERS[_f.name] = _parse_optional_float
    elif _f.name == "output":
        _PARSERS[_f.name] = _parse_optional_str
    elif isinstance(_d, bool):
        _PARSERS[_f.name] = _parse_bool
    elif isinstance(_d, int):
        _PARSERS[_f.name] = int
    elif isinstance(_d, float):
        _PARSERS[_f.name] = float
    elif isinstance(_d, tuple):
        _PARSERS[_f.name] = _parse_floats
    else:
        _PARSERS[_f.name] = str


def _convert(key: str, raw: str):
    if key not in _PARSERS:
        raise ConfigurationError(f"unknown key {key!r}")
    try:
        return _PARSERS[key](raw)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {raw!r}") from exc


def read_config_file(path: str) -> Dict[str, object]:
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        if key == "command":
            raise ConfigurationError(f"{path}:{lineno}: the command is given on the command line")
        values[key] = _convert(key, val.strip())
    return values


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sechgate", description="Sech-pulse gate simulations.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="flat key = value file")
    s = argparse.SUPPRESS
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        flag = "--" + f.name.replace("_", "-")
        default = getattr(_DEFAULTS, f.name)
        if isinstance(default, bool):
            parser.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=s)
        else:
            parser.add_argument(flag, dest=f.name, default=s, metavar=f.name.upper())
    return parser


def parse_config(argv: Sequence[str], require_output: bool = False) -> RunConfig:
    """Resolve a :class:`RunConfig` from ``argv`` (flags beat file beat defaults)."""
    try:
        ns = build_parser().parse_args(list(argv))
    except _UsageError as exc:
        raise ConfigurationError(str(exc)) from exc
    values = vars(ns)
    command = values.pop("command")
    path = values.pop("config", None)
    merged = read_config_file(path) if path else {}
    for key, val in values.items():
        merged[key] = val if isinstance(val, bool) else _convert(key, val)
    try:
        config = RunConfig(command=command, **merged)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    if require_output and not config.output:
        raise ConfigurationError("an output path is required (--output PATH)")
    return config


def config_from_dict(data: Dict[str, object]) -> RunConfig:
    """Rebuild a config from its echoed metadata form."""
    kw = dict(data)
    for key in ("thetas", "te_list"):
        if key in kw:
            kw[key] = tuple(float(x) for x in kw[key])
    unknown = set(kw) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigurationError(f"unknown keys {sorted(unknown)}")
    return RunConfig(**kw)


# ---------------------------------------------------------------- output


@dataclass
class Table:
    columns: Tuple[str, ...]
    rows: List[Tuple]
    meta: dict = field(default_factory=dict)
    failures: List[dict] = field(default_factory=list)
    text: Optional[str] = None  # verbatim payload for program-dump


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return "%.12g" % v


def write_table(table: Table, path: Path, fmt: str) -> None:
    if table.text is not None and fmt == "csv":
        path.write_text(table.text)
        return
    if fmt == "csv":
        lines = [",".join(table.columns)]
        lines += [",".join(_fmt(v) for v in row) for row in table.rows]
        path.write_text("\n".join(lines) + "\n")
        return
    if table.text is not None:
        payload = table.meta.get("table", {})
    else:
        payload = {"columns": list(table.columns),
                   "data": {c: [row[i] for row in table.rows] for i, c in enumerate(table.columns)}}
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def versions() -> Dict[str, str]:
    import scipy

    return {"sechgate": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# ---------------------------------------------------------------- commands


def cmd_bloch_traj(cfg: RunConfig) -> Table:
    pulse = cfg.pulse()
    detuning = cfg.w(cfg.delta_opt)
    comp = compare_trajectories(pulse, detuning, n_points=cfg.n_points, tol=cfg.tol or 1e-11)
    blochs = [comp.bloch(k, cfg.frame, pulse=pulse, detuning=detuning) for k in ("ode", "zeroth", "first")]
    d0, d1 = comp.distances()
    cols = ("t_us",) + tuple(f"{a}_{k}" for k in ("ode", "zeroth", "first") for a in "xyz")
    rows = [(t - pulse.t_start, *np.concatenate([b[i] for b in blochs])) for i, t in enumerate(comp.t)]
    crossings = stark_crossings(pulse, detuning, cfg.w(cfg.delta_hf))
    meta = {"max_distance_first": float(d1.max()), "max_distance_zeroth": float(d0.max()),
            "fraction_first_better": float(np.mean(d1 < d0)),
            "max_first_order_norm_defect": float(comp.first_defect.max()),
            "stark_crossings_us": {f"e_plus_{int(k)}_delta": v for k, v in crossings.items()}}
    return Table(cols, rows, meta)


def cmd_leakage(cfg: RunConfig) -> Table:
    scan = leakage_scan(cfg.leakage())
    rows = list(zip(scan.t_us, scan.numeric, scan.perturbative))
    meta = {"final_numeric": scan.final_numeric, "final_perturbative": scan.final_perturbative,
            "naive_bound": scan.naive_bound}
    return Table(("t_us", "p_leak_numeric", "p_leak_perturbative"), rows, meta)


def cmd_rotation_check(cfg: RunConfig) -> Table:
    ion = cfg.ion()
    rows = []
    for theta in cfg.thetas:
        prog = arbitrary_rotation_program(theta, cfg.alpha, cfg.pulse(), gap=cfg.gap)
        u = program_unitary(prog, ion, tol=cfg.tol or 1e-9)
        dist = phase_insensitive_distance(qubit_block(u), rotation_target(theta, cfg.alpha))
        leak = float(np.max(np.abs(u[E, [G0, G1]]) ** 2))
        rows.append((theta, cfg.alpha, dist, leak))
    return Table(("theta", "alpha", "distance", "p_excited_max"), rows)


def cmd_not_check(cfg: RunConfig) -> Table:
    ion = cfg.ion()
    prog = not_gate_program("control", cfg.pulse(), gap=cfg.gap)
    h = compile(prog, ion)
    rows = []
    for label, level in (("0", G0), ("1", G1)):
        psi0 = np.zeros(DIM, dtype=complex)
        psi0[level] = 1.0
        psi = state_trajectory(h, psi0, [0.0, prog.duration], tol=cfg.tol or 1e-9)[-1]
        p = np.abs(psi) ** 2
        rows.append((label, p[G0], p[G1], p[E]))
    return Table(("input", "p0", "p1", "pe"), rows)


def cmd_cphase_surface(cfg: RunConfig) -> Table:
    sweep = cfg.sweep()
    surf = sweep_hyperfine(sweep)
    meta = {"reference_checksum": surf.reference_checksum, "decay": sweep.decay, "refocus": sweep.refocus,
            "min_fidelity": float(np.nanmin(surf.values)), "max_fidelity": float(np.nanmax(surf.values))}
    return Table(surf.header, list(surf.rows()), meta, surf.failures)


def cmd_lifetime_sweep(cfg: RunConfig) -> Table:
    sweep = cfg.sweep()
    ref = reference_unitary(sweep)
    surf = sweep_lifetime(sweep, ref)
    base = lifetime_baseline(sweep, ref)
    meta = {"reference_checksum": surf.reference_checksum, "delta_c": sweep.lifetime_dc,
            "no_decay_baseline": {"delta_t": sweep.dt_grid(), "fidelity": base}}
    return Table(surf.header, list(surf.rows()), meta, surf.failures)


def _named_program(cfg: RunConfig):
    pulse = cfg.pulse()
    builders = {
        "arbitrary_rotation": lambda: arbitrary_rotation_program(cfg.thetas[0], cfg.alpha, pulse, gap=cfg.gap),
        "not_gate": lambda: not_gate_program("control", pulse, gap=cfg.gap),
        "naive_cphase": lambda: naive_cphase_program(pulse, gap=cfg.gap),
        "robust_cphase": lambda: robust_cphase_program(pulse, True, gap=cfg.gap),
        "robust_cphase_unrefocused": lambda: robust_cphase_program(pulse, False, gap=cfg.gap),
    }
    return builders[cfg.program]()


def cmd_program_dump(cfg: RunConfig) -> Table:
    prog = _named_program(cfg)
    return Table((), [], {"events": len(prog), "duration_us": prog.duration, "table": render_table(prog)},
                 text=dump_program(prog))


DISPATCH = {
    "bloch-traj": cmd_bloch_traj,
    "leakage": cmd_leakage,
    "rotation-check": cmd_rotation_check,
    "not-check": cmd_not_check,
    "cphase-surface": cmd_cphase_surface,
    "lifetime-sweep": cmd_lifetime_sweep,
    "program-dump": cmd_program_dump,
}


def run(cfg: RunConfig) -> int:
    """Execute one command, write its outputs and return the exit status."""
    if not cfg.output:
        raise ConfigurationError("an output path is required (--output PATH)")
    out = Path(cfg.output)
    start = time.time()
    try:
        table = DISPATCH[cfg.command](cfg)
    except (IntegrationError, PositivityError) as exc:
        log.error("integration failed: %s", exc)
        _write_meta(out, cfg, {"error": str(exc)}, [], time.time() - start)
        return EXIT_INTEGRATION
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    write_table(table, out, cfg.format)
    meta = {k: v for k, v in table.meta.items() if k != "table"}
    _write_meta(out, cfg, meta, table.failures, time.time() - start)
    return EXIT_POINT_FAILURES if table.failures else EXIT_OK


def _write_meta(out: Path, cfg: RunConfig, results: dict, failures: list, wall: float) -> None:
    meta = {
        "command": cfg.command,
        "config": asdict(cfg),
        "angular": cfg.angular_values(),
        "versions": versions(),
        "reference_checksum": results.get("reference_checksum"),
        "results": results,
        "failures": failures,
        "wall_time_s": wall,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    meta_path = out.with_name(out.name + ".meta.json")
    if meta_path.parent and not meta_path.parent.exists():
        meta_path.parent.mkdir(parents=True)
    meta_path.write_text(json.dumps(_jsonable(meta), indent=1, sort_keys=True) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv, require_output=True)
        return run(cfg)
    except ConfigurationError as exc:
        print(f"sechgate: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"sechgate: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
