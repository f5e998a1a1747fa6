"""Pulse tables, scheduled pulse programs and their Hamiltonians.

The four shipped tables (arbitrary rotation, naive controlled phase, NOT and
robust controlled phase) live in ``data/pulse_tables.json`` with symbolic
phase entries such as ``"pi+theta"``.  Rows are named ``phi_<level>`` for
one-ion tables and ``phi_<level><c|t>`` for two-ion tables; each column is one
pulse.

A carrier phase ``phi`` on the ``i <-> e`` transition multiplies the drive
coefficient of ``|e><i|`` by ``exp(-i phi)``.  Two-colour pulses split the
envelope equally, each colour carrying ``1/sqrt(2)`` of it, so the addressed
bar-state transition sees the full peak Rabi frequency.
"""
from __future__ import annotations

import ast
import cmath
import json
import math
import operator
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .dynamics import (
    MASTER_TOL,
    STATE_TOL,
    liouvillian,
    loss_operator,
    propagate_master,
    propagate_unitary,
    single_ion_collapse,
    two_ion_collapse,
)
from .ion_model import (
    DIM,
    E,
    G0,
    G1,
    QUBIT_INDICES,
    TRANSITIONS,
    BlockadeParams,
    ConfigurationError,
    IonParams,
    drive_operator,
    embed,
    static_hamiltonian,
    two_ion_static,
)
from .pulse_engine import SechPulseParams, complex_rabi

IONS = ("control", "target")
_ION_SUFFIX = {"c": "control", "t": "target"}
_SCHEDULE_EPS = 1e-9


# ---------------------------------------------------------------- phase expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def eval_phase(expr: str, **symbols: float) -> float:
    """Evaluate an arithmetic phase expression over ``pi`` and the given symbols."""
    env = {"pi": np.pi, **symbols}

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ValueError(f"unknown symbol {node.id!r} in {expr!r}")
            return float(env[node.id])
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ValueError(f"unsupported syntax in phase expression {expr!r}")

    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"malformed phase expression {expr!r}") from exc
    return ev(tree)


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class Color:
    transition: int
    phase: float
    expr: str = field(default="", compare=False)

    def __post_init__(self):
        if self.transition not in TRANSITIONS:
            raise ConfigurationError(f"unknown transition {self.transition!r}")


@dataclass(frozen=True)
class PulseEvent:
    """One sech pulse on one ion, with one or two colours sharing the envelope."""

    ion: str
    colors: Tuple[Color, ...]
    pulse: SechPulseParams

    def __post_init__(self):
        if self.ion not in IONS:
            raise ConfigurationError(f"unknown ion {self.ion!r}")
        if not 1 <= len(self.colors) <= 2:
            raise ConfigurationError("an event carries one or two colours")
        if len({c.transition for c in self.colors}) != len(self.colors):
            raise ConfigurationError("two colours on the same transition")

    @property
    def t_start(self) -> float:
        return self.pulse.t_start

    @property
    def t_end(self) -> float:
        return self.pulse.t_end

    @property
    def two_color(self) -> bool:
        return len(self.colors) == 2

    @property
    def color_factor(self) -> float:
        return 1 / np.sqrt(2) if self.two_color else 1.0


@dataclass(frozen=True)
class PulseProgram:
    events: Tuple[PulseEvent, ...]
    label: str = ""
    params: Tuple[Tuple[str, float], ...] = ()
    two_ion: bool = True
    staggered: bool = True

    @property
    def duration(self) -> float:
        return max((e.t_end for e in self.events), default=0.0)

    @property
    def ions(self) -> Tuple[str, ...]:
        return tuple(sorted({e.ion for e in self.events}))

    def __len__(self):
        return len(self.events)


def _overlap(a: PulseEvent, b: PulseEvent) -> bool:
    return a.t_start < b.t_end - _SCHEDULE_EPS and b.t_start < a.t_end - _SCHEDULE_EPS


def check_schedule(program: PulseProgram) -> None:
    """Reject overlapping pulses on one ion, and on both ions when staggering is required."""
    ev = program.events
    for i in range(len(ev)):
        for j in range(i + 1, len(ev)):
            if not _overlap(ev[i], ev[j]):
                continue
            if ev[i].ion == ev[j].ion:
                raise ConfigurationError(f"events {i + 1} and {j + 1} overlap on the {ev[i].ion} ion")
            if program.staggered:
                raise ConfigurationError(f"events {i + 1} and {j + 1} drive both ions simultaneously")


def load_tables() -> dict:
    text = resources.files("sechgate").joinpath("data/pulse_tables.json").read_text()
    return json.loads(text)


def _parse_row_label(label: str, two_ion: bool) -> Tuple[int, Optional[str]]:
    body = label[len("phi_"):]
    if not label.startswith("phi_") or not body or body[0] not in "01":
        raise ValueError(f"bad row label {label!r}")
    level = int(body[0])
    if two_ion:
        if body[1:] not in _ION_SUFFIX:
            raise ValueError(f"row {label!r} lacks an ion suffix")
        return level, _ION_SUFFIX[body[1:]]
    if body[1:]:
        raise ValueError(f"unexpected ion suffix in {label!r}")
    return level, None


def program_from_table(name: str, pulse: SechPulseParams, ion: str = "control", gap: float = 0.0,
                       drop_columns: Iterable[int] = (), staggered: bool = True, **symbols: float) -> PulseProgram:
    """Schedule a shipped table back to back (``gap`` between pulses).

    ``drop_columns`` lists 1-based table columns to omit; the remaining pulses
    are re-packed.  ``ion`` places one-ion tables.
    """
    if gap < 0:
        raise ValueError("gap must be non-negative")
    tables = load_tables()
    if name not in tables:
        raise KeyError(f"no table {name!r}; available: {sorted(tables)}")
    table = tables[name]
    rows = table["rows"]
    two_ion = any(label[-1] in _ION_SUFFIX for label in rows)
    ncol = {len(v) for v in rows.values()}
    if len(ncol) != 1:
        raise ValueError(f"table {name!r} has ragged rows")
    drop = set(drop_columns)
    events = []
    t = 0.0
    for col in range(ncol.pop()):
        if col + 1 in drop:
            continue
        colors, ions = [], set()
        for label, entries in rows.items():
            expr = entries[col].strip()
            if not expr:
                continue
            level, row_ion = _parse_row_label(label, two_ion)
            ions.add(row_ion or ion)
            colors.append(Color(level, eval_phase(expr, **symbols), expr))
        if len(ions) != 1:
            raise ValueError(f"table {name!r} column {col + 1} addresses {len(ions)} ions")
        if len(colors) != (2 if table["two_color"] else 1):
            raise ValueError(f"table {name!r} column {col + 1} has {len(colors)} colours")
        colors.sort(key=lambda c: c.transition)
        events.append(PulseEvent(ions.pop(), tuple(colors), pulse.shifted(t)))
        t += pulse.duration + gap
    return PulseProgram(tuple(events), name, tuple(sorted(symbols.items())), two_ion, staggered)


def arbitrary_rotation_program(theta: float, alpha: float, pulse: SechPulseParams, ion: str = "control",
                               gap: float = 0.0) -> PulseProgram:
    return program_from_table("arbitrary_rotation", pulse, ion=ion, gap=gap, theta=theta, alpha=alpha)


def not_gate_program(ion: str, pulse: SechPulseParams, gap: float = 0.0) -> PulseProgram:
    return program_from_table("not_gate", pulse, ion=ion, gap=gap)


def naive_cphase_program(pulse: SechPulseParams, gap: float = 0.0) -> PulseProgram:
    return program_from_table("naive_cphase", pulse, gap=gap)


def robust_cphase_program(pulse: SechPulseParams, refocus: bool = True, gap: float = 0.0) -> PulseProgram:
    """24-pulse controlled phase; ``refocus=False`` drops both double-NOT blocks."""
    drop = () if refocus else load_tables()["robust_cphase"]["refocus_columns"]
    prog = program_from_table("robust_cphase", pulse, gap=gap, drop_columns=drop)
    return prog if refocus else replace(prog, label="robust_cphase_unrefocused")


def _format_phase(c: Color) -> str:
    return c.expr if c.expr else repr(float(c.phase))


def render_table(program: PulseProgram) -> dict:
    """Inverse of :func:`program_from_table`, in the shipped JSON layout."""
    n = len(program.events)
    rows: Dict[str, List[str]] = {}
    for k, ev in enumerate(program.events):
        for c in ev.colors:
            label = f"phi_{c.transition}" + (ev.ion[0] if program.two_ion else "")
            rows.setdefault(label, [""] * n)[k] = _format_phase(c)
    two_color = any(ev.two_color for ev in program.events)
    return {"two_color": two_color, "rows": rows}


# ---------------------------------------------------------------- serialization


def dump_program(program: PulseProgram) -> str:
    """Line format ``index ion transition phase t_start duration``.

    Two-colour events carry two ``transition phase`` pairs (8 fields).  The
    shared envelope goes in a ``# pulse`` header; floats use ``repr`` so a
    round trip is exact.
    """
    shapes = {replace(e.pulse, t_start=0.0, duration=1.0) for e in program.events}
    if len(shapes) > 1:
        raise ValueError("events use different envelopes; cannot share a header")
    lines = [f"# program {program.label or '-'}"]
    if shapes:
        p = program.events[0].pulse
        lines.append(f"# pulse omega0={p.omega0!r} mu={p.mu!r} beta={p.beta!r} phase={p.phase!r}")
    if program.params:
        lines.append("# params " + " ".join(f"{k}={v!r}" for k, v in program.params))
    lines.append(f"# layout two_ion={program.two_ion} staggered={program.staggered}")
    for k, ev in enumerate(program.events, start=1):
        pairs = " ".join(f"{c.transition} {c.phase!r}" for c in ev.colors)
        lines.append(f"{k} {ev.ion} {pairs} {ev.t_start!r} {ev.pulse.duration!r}")
    return "\n".join(lines) + "\n"


def _header_fields(text: str) -> dict:
    out = {}
    for item in text.split():
        key, _, val = item.partition("=")
        if not _:
            raise ValueError(f"malformed header field {item!r}")
        out[key] = val
    return out


def load_program(text: str) -> PulseProgram:
    label, shape, params, layout = "", None, {}, {"two_ion": "True", "staggered": "True"}
    events = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            kind, _, rest = line[1:].strip().partition(" ")
            if kind == "program":
                label = "" if rest.strip() == "-" else rest.strip()
            elif kind == "pulse":
                shape = {k: float(v) for k, v in _header_fields(rest).items()}
            elif kind == "params":
                params = {k: float(v) for k, v in _header_fields(rest).items()}
            elif kind == "layout":
                layout.update(_header_fields(rest))
            continue
        tok = line.split()
        if len(tok) not in (6, 8):
            raise ValueError(f"line {lineno}: expected 6 or 8 fields, got {len(tok)}")
        if shape is None:
            raise ValueError("missing '# pulse' header before events")
        if int(tok[0]) != len(events) + 1:
            raise ValueError(f"line {lineno}: event index {tok[0]} out of order")
        pairs = tok[2:-2]
        colors = tuple(Color(int(pairs[i]), float(pairs[i + 1])) for i in range(0, len(pairs), 2))
        pulse = SechPulseParams(duration=float(tok[-1]), t_start=float(tok[-2]), **shape)
        events.append(PulseEvent(tok[1], colors, pulse))
    return PulseProgram(tuple(events), label, tuple(sorted(params.items())),
                        layout["two_ion"] == "True", layout["staggered"] == "True")


# ---------------------------------------------------------------- Hamiltonians


_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class _Term:
    """One colour of one event, flattened for fast scalar evaluation."""

    t_start: float
    t_end: float
    t_center: float
    omega0: float
    mu: float
    beta: float
    carrier: complex  # colour factor * exp(i (pulse phase - carrier phase)) / 2
    op_index: int

    def coefficient(self, t: float) -> complex:
        s = self.beta * (t - self.t_center)
        a = abs(s)
        log_cosh = a + math.log1p(math.exp(-2.0 * a)) - _LOG2
        return self.carrier * (self.omega0 / math.cosh(s)) * cmath.exp(1j * self.mu * log_cosh)


class ProgramHamiltonian:
    """``H(t) = H_static + sum_active (c(t) K + conj(c(t)) K^dag)``.

    ``breakpoints`` lists every event edge so integrators restart there.
    """

    def __init__(self, program: PulseProgram, control: IonParams, target: Optional[IonParams],
                 blockade: Optional[BlockadeParams]):
        self.program = program
        self.control = control
        self.target = target
        self.blockade = blockade
        if target is None:
            self.dim = DIM
            self.static = static_hamiltonian(control)
        else:
            self.dim = DIM * DIM
            self.static = two_ion_static(control, target, blockade)
        ops: Dict[Tuple[str, int], int] = {}
        self.operators: List[np.ndarray] = []
        terms = []
        for ev in program.events:
            for c in ev.colors:
                key = (ev.ion, c.transition)
                if key not in ops:
                    k = drive_operator(c.transition)
                    ops[key] = len(self.operators)
                    self.operators.append(k if target is None else embed(k, ev.ion))
                p = ev.pulse
                carrier = 0.5 * ev.color_factor * cmath.exp(1j * (p.phase - c.phase))
                terms.append(_Term(p.t_start, p.t_end, p.t_center, p.omega0, p.mu, p.beta, carrier, ops[key]))
        self.terms = tuple(terms)
        self.breakpoints = tuple(sorted({e.t_start for e in program.events} | {e.t_end for e in program.events}))

    def active(self, t: float):
        """``(coefficient, operator index)`` for every drive on at time ``t``."""
        return [(term.coefficient(t), term.op_index) for term in self.terms if term.t_start <= t <= term.t_end]

    def __call__(self, t: float) -> np.ndarray:
        h = self.static.copy()
        for coef, idx in self.active(t):
            k = self.operators[idx]
            h += coef * k + np.conj(coef) * k.T
        return h


def compile(program: PulseProgram, control: IonParams, target: Optional[IonParams] = None,
            blockade: Optional[BlockadeParams] = None) -> ProgramHamiltonian:
    """Hamiltonian of a program.

    With ``target=None`` the program must address a single ion and is run in
    three dimensions with ``control`` as that ion's parameters, whatever its
    ion tag.
    """
    check_schedule(program)
    if target is None:
        if len(program.ions) > 1:
            raise ConfigurationError("a two-ion program needs target parameters")
        return ProgramHamiltonian(program, control, None, None)
    return ProgramHamiltonian(program, control, target, blockade or BlockadeParams())


# ---------------------------------------------------------------- fast propagation


@lru_cache(maxsize=4096)
def _driven_block(pulse: SechPulseParams, transitions: Tuple[int, ...], factor: float,
                  delta_e: float, delta_hf: float, tol: float) -> np.ndarray:
    """One-ion propagator over a pulse with all carrier phases zero."""
    static = np.diag([0.0, -delta_hf, delta_e]).astype(complex)
    ks = [drive_operator(level) for level in transitions]

    def h(t):
        c = 0.5 * factor * complex_rabi(pulse, t)
        out = static.copy()
        for k in ks:
            out += c * k + np.conj(c) * k.T
        return out

    u = propagate_unitary(h, pulse.t_start, pulse.t_end, tol=tol, breakpoints=())
    u.setflags(write=False)
    return u


def _event_block(ev: PulseEvent, ion: IonParams, extra_e: float, tol: float) -> np.ndarray:
    """Driven-ion propagator for one event, optionally with |e> shifted by ``extra_e``."""
    base = _driven_block(ev.pulse.shifted(0.0), tuple(c.transition for c in ev.colors), ev.color_factor,
                         ion.delta_opt + extra_e, ion.delta_hf, tol)
    d = np.ones(DIM, dtype=complex)
    for c in ev.colors:
        d[c.transition] = np.exp(1j * c.phase)
    return (d[:, None] * base) * np.conj(d)[None, :]


def _free(static_diag: np.ndarray, tau: float) -> np.ndarray:
    return np.diag(np.exp(-1j * static_diag * tau))


def program_unitary(program: PulseProgram, control: IonParams, target: Optional[IonParams] = None,
                    blockade: Optional[BlockadeParams] = None, tol: float = STATE_TOL) -> np.ndarray:
    """Exact propagator over the whole program.

    While one ion is driven the other only picks up diagonal energies, so each
    event splits into three one-ion blocks (one per spectator level, with the
    blockade shift on the excited spectator).  Carrier phases are pulled out
    as diagonal conjugations, so blocks are cached per envelope and detuning.
    Programs with simultaneous pulses on both ions fall back to direct
    integration in the full space.
    """
    h = compile(program, control, target, blockade)
    events = sorted(program.events, key=lambda e: e.t_start)
    if any(_overlap(a, b) for i, a in enumerate(events) for b in events[i + 1:]):
        return propagate_unitary(h, 0.0, program.duration, tol=tol)
    static_diag = np.real(np.diag(h.static))
    u = np.eye(h.dim, dtype=complex)
    t = 0.0
    for ev in events:
        if ev.t_start > t:
            u = _free(static_diag, ev.t_start - t) @ u
        if target is None:
            block = _event_block(ev, control, 0.0, tol)
        else:
            driven, spectator = (control, target) if ev.ion == "control" else (target, control)
            spec_diag = np.real(np.diag(static_hamiltonian(spectator)))
            block = np.zeros((h.dim, h.dim), dtype=complex)
            tau = ev.pulse.duration
            for s in range(DIM):
                extra = h.blockade.delta_dd if s == E else 0.0
                b = np.exp(-1j * spec_diag[s] * tau) * _event_block(ev, driven, extra, tol)
                proj = np.zeros((DIM, DIM))
                proj[s, s] = 1.0
                block += np.kron(b, proj) if ev.ion == "control" else np.kron(proj, b)
        u = block @ u
        t = ev.t_end
    return u


def program_master(program: PulseProgram, control: IonParams, target: Optional[IonParams], rho0,
                   blockade: Optional[BlockadeParams] = None, tol: float = MASTER_TOL) -> np.ndarray:
    """Lindblad evolution over the program using each ion's ``decay`` settings."""
    h = compile(program, control, target, blockade)
    if target is None:
        channels = single_ion_collapse(control.decay)
        losses = [loss_operator(control.decay)]
    else:
        channels = two_ion_collapse(control.decay, target.decay)
        losses = [loss_operator(control.decay, "control"), loss_operator(target.decay, "target")]
    losses = [k for k in losses if k is not None]
    loss = sum(losses) if losses else None
    l_static = liouvillian(h.static, channels, loss)
    n = h.dim

    def rhs(t, y):
        drive = np.zeros((n, n), dtype=complex)
        for coef, idx in h.active(t):
            k = h.operators[idx]
            drive += coef * k + np.conj(coef) * k.T
        r = y.reshape(n, n)
        return l_static @ y - 1j * (drive @ r - r @ drive).ravel()

    return propagate_master(h, rho0, channels, 0.0, program.duration, tol=tol, loss=loss, rhs=rhs)


# ---------------------------------------------------------------- qubit-space helpers


def qubit_block(u: np.ndarray) -> np.ndarray:
    """Restrict a 3- or 9-dim operator to the computational subspace."""
    idx = (G0, G1) if u.shape[0] == DIM else QUBIT_INDICES
    return u[np.ix_(idx, idx)]


def rotation_target(theta: float, alpha: float) -> np.ndarray:
    """Qubit rotation by ``theta`` about the equatorial axis at angle ``alpha``, up to global phase."""
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.exp(0.5j * theta) * np.array(
        [[c, -1j * np.exp(-1j * alpha) * s], [-1j * np.exp(1j * alpha) * s, c]]
    )


def phase_insensitive_distance(a: np.ndarray, b: np.ndarray) -> float:
    """``min_phi ||a - e^{i phi} b||_2``, aligning phases through the trace overlap."""
    ov = np.trace(b.conj().T @ a)
    ph = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.linalg.norm(a - ph * b, 2))


def controlled_phase_invariant(u: np.ndarray) -> float:
    """``arg<11> - arg<10> - arg<01> + arg<00>`` wrapped to ``(-pi, pi]``."""
    d = np.diag(qubit_block(u) if u.shape[0] != 4 else u)
    return float(np.angle(d[0] * d[3] / (d[1] * d[2])))
