"""Gate fidelity and parameter sweeps.

Configs hold frequencies as quoted numbers (MHz); ``apply_2pi`` decides
whether they are read as cycles (multiplied by 2*pi) or taken as rad/us.
Lifetimes are in microseconds and never rescaled.
"""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import polar

from .adiabatic import leakage_amplitude
from .dynamics import MASTER_TOL, STATE_TOL, state_trajectory
from .gate_compiler import (
    Color,
    PulseEvent,
    PulseProgram,
    compile,
    program_master,
    program_unitary,
    qubit_block,
    robust_cphase_program,
)
from .ion_model import DIM, QUBIT_INDICES, BarBasis, BlockadeParams, DecayChannel, IonParams
from .pulse_engine import SechPulseParams, angular

log = logging.getLogger(__name__)

FIDELITY_SLACK = 1e-9


class ReferenceMismatchError(ValueError):
    """Surfaces scored against different reference unitaries were combined."""


def equal_superposition() -> np.ndarray:
    return np.full(4, 0.5, dtype=complex)


def _qubit_vector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape == (4,):
        q = psi
    elif psi.shape == (DIM * DIM,):
        mask = np.ones(psi.size, dtype=bool)
        mask[list(QUBIT_INDICES)] = False
        if np.any(np.abs(psi[mask]) > 1e-12):
            raise ValueError("input state has support outside the qubit subspace")
        q = psi[list(QUBIT_INDICES)]
    else:
        raise ValueError(f"input state has dimension {psi.size}, expected 4 or 9")
    if abs(np.linalg.norm(q) - 1) > 1e-9:
        raise ValueError("input state is not normalized")
    return q


def _clip(f: float) -> float:
    if f < -FIDELITY_SLACK or f > 1 + FIDELITY_SLACK:
        raise ValueError(f"fidelity {f} outside [0, 1]")
    return min(max(f, 0.0), 1.0)


def gate_fidelity(result: np.ndarray, u0: np.ndarray, psi_in=None, density: Optional[bool] = None) -> float:
    """``|<psi|U0^dag U|psi>|^2`` for a propagator, ``<psi|U0^dag rho U0|psi>`` for a state.

    ``result`` is a 4x4 or 9x9 propagator, or a 4x4 / 9x9 density matrix
    (``density=None`` detects a unit-trace Hermitian matrix).  ``u0`` acts on
    the qubit subspace.
    """
    result = np.asarray(result, dtype=complex)
    u0 = np.asarray(u0, dtype=complex)
    if u0.shape != (4, 4):
        raise ValueError(f"reference must be 4x4, got {u0.shape}")
    if result.shape not in ((4, 4), (9, 9)):
        raise ValueError(f"result must be 4x4 or 9x9, got {result.shape}")
    psi = _qubit_vector(equal_superposition() if psi_in is None else psi_in)
    if density is None:
        density = np.allclose(result, result.conj().T, atol=1e-10) and abs(np.trace(result) - 1) < 1e-6
    ideal = u0 @ psi
    if density:
        phi = ideal
        if result.shape[0] == 9:
            phi = np.zeros(9, dtype=complex)
            phi[list(QUBIT_INDICES)] = ideal
        return _clip(float(np.real(phi.conj() @ result @ phi)))
    uq = qubit_block(result) if result.shape[0] == 9 else result
    return _clip(float(abs(ideal.conj() @ uq @ psi) ** 2))


def checksum(u: np.ndarray) -> str:
    """Stable digest of a matrix (rounded to 12 decimals)."""
    arr = np.round(np.asarray(u, dtype=complex), 12) + 0.0  # drop negative zeros
    return hashlib.sha256(arr.tobytes()).hexdigest()[:16]


# ---------------------------------------------------------------- configuration


@dataclass(frozen=True)
class SweepConfig:
    """Controlled-phase sweep settings; frequencies in quoted MHz."""

    omega0: float = 4.0
    mu: float = 3.0
    beta: float = 1.28
    duration: float = 1.5
    delta_c: float = 0.1  # control optical detuning
    delta_t: float = 0.08  # target optical detuning
    delta_dd: float = 20.0
    dc_min: float = -0.03
    dc_max: float = 0.03
    dc_count: int = 21
    dt_min: float = -0.03
    dt_max: float = 0.03
    dt_count: int = 21
    lifetime_dc: float = 0.0
    te_list: Tuple[float, ...] = (100.0, 500.0, 1000.0, 1e6)
    decay: bool = False
    te: float = 100.0
    b0: float = 0.5
    b1: float = 0.5
    dump: bool = False
    refocus: bool = True
    gap: float = 0.0
    psi_in: Optional[Tuple[complex, ...]] = None
    apply_2pi: bool = True
    tol: Optional[float] = None
    jobs: int = 1

    def __post_init__(self):
        if self.dc_count < 1 or self.dt_count < 1:
            raise ValueError("grid counts must be positive")
        if self.dc_min > self.dc_max or self.dt_min > self.dt_max:
            raise ValueError("empty grid range")
        if not self.te_list or min(self.te_list) <= 0:
            raise ValueError("lifetimes must be positive and non-empty")
        if self.te <= 0:
            raise ValueError("lifetime must be positive")

    def w(self, value: float) -> float:
        return angular(value, self.apply_2pi)

    def pulse(self) -> SechPulseParams:
        return SechPulseParams(self.w(self.omega0), self.mu, self.w(self.beta), self.duration)

    def blockade(self) -> BlockadeParams:
        return BlockadeParams(self.w(self.delta_dd))

    def decay_channel(self, te: Optional[float] = None) -> DecayChannel:
        return DecayChannel.from_lifetime(self.te if te is None else te, self.b0, self.b1, self.dump)

    def ions(self, dc: float, dt: float, te: Optional[float] = None, decay: Optional[bool] = None,
             delta_c: Optional[float] = None, delta_t: Optional[float] = None):
        on = self.decay if decay is None else decay
        channel = self.decay_channel(te) if on else None
        bound = self.w(0.06)
        c = IonParams(self.w(self.delta_c if delta_c is None else delta_c), self.w(dc), channel, bound)
        t = IonParams(self.w(self.delta_t if delta_t is None else delta_t), self.w(dt), channel, bound)
        return c, t

    def dc_grid(self) -> np.ndarray:
        return np.linspace(self.dc_min, self.dc_max, self.dc_count)

    def dt_grid(self) -> np.ndarray:
        return np.linspace(self.dt_min, self.dt_max, self.dt_count)

    def input_state(self) -> np.ndarray:
        return equal_superposition() if self.psi_in is None else np.asarray(self.psi_in, dtype=complex)

    def program(self, refocus: Optional[bool] = None) -> PulseProgram:
        return robust_cphase_program(self.pulse(), self.refocus if refocus is None else refocus, self.gap)

    def state_tol(self) -> float:
        return self.tol or STATE_TOL

    def master_tol(self) -> float:
        return self.tol or MASTER_TOL


@dataclass(frozen=True)
class Reference:
    unitary: np.ndarray
    checksum: str
    raw: np.ndarray  # qubit block before unitarization


def reference_unitary(config: SweepConfig, refocus: Optional[bool] = None) -> Reference:
    """Ideal operator: the program at zero hyperfine shift without decay, unitarized."""
    c, t = config.ions(0.0, 0.0, decay=False)
    u = program_unitary(config.program(refocus), c, t, config.blockade(), tol=config.state_tol())
    raw = qubit_block(u)
    u0 = polar(raw)[0]
    return Reference(u0, checksum(u0), raw)


# ---------------------------------------------------------------- surfaces


@dataclass
class FidelitySurface:
    """Fidelities on a rectangular grid; axes are ``(name, unit, values)``."""

    axes: Tuple[Tuple[str, str, np.ndarray], Tuple[str, str, np.ndarray]]
    values: np.ndarray
    reference_checksum: str
    metadata: dict = field(default_factory=dict)
    failures: List[dict] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = tuple(len(a[2]) for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} does not match axes {shape}")
        ok = self.values[np.isfinite(self.values)]
        if ok.size and (ok.min() < 0 or ok.max() > 1 + FIDELITY_SLACK):
            raise ValueError("fidelity values outside [0, 1]")

    def rows(self):
        (_, _, a), (_, _, b) = self.axes
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                yield float(x), float(y), float(self.values[i, j])

    @property
    def header(self) -> Tuple[str, str, str]:
        return self.axes[0][0], self.axes[1][0], "fidelity"

    def check_compatible(self, other: "FidelitySurface") -> None:
        if self.reference_checksum != other.reference_checksum:
            raise ReferenceMismatchError(
                f"reference {self.reference_checksum} differs from {other.reference_checksum}"
            )

    def minus(self, other: "FidelitySurface") -> np.ndarray:
        self.check_compatible(other)
        if self.values.shape != other.values.shape:
            raise ValueError("grid shapes differ")
        return self.values - other.values

    def variation(self, axis: int) -> float:
        """Largest spread of values along ``axis`` over all lines of the other axis."""
        v = np.moveaxis(self.values, axis, -1)
        return float(np.max(np.nanmax(v, axis=-1) - np.nanmin(v, axis=-1)))


def _evaluate(task):
    fn, args = task
    try:
        return True, fn(*args)
    except Exception as exc:  # recorded per point, the sweep goes on
        return False, f"{type(exc).__name__}: {exc}"


def run_grid(fn: Callable, arglist: Sequence[tuple], jobs: int = 1):
    """Evaluate ``fn(*args)`` for every entry; results come back in input order.

    Returns ``(values, failures)`` with ``nan`` at failed points.
    """
    tasks = [(fn, args) for args in arglist]
    if jobs > 1 and len(tasks) > 1:
        chunk = max(1, len(tasks) // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate, tasks, chunksize=chunk))
    else:
        outcomes = [_evaluate(t) for t in tasks]
    values, failures = [], []
    for k, (ok, out) in enumerate(outcomes):
        if ok:
            values.append(out)
        else:
            values.append(np.nan)
            failures.append({"index": k, "args": [repr(a) for a in arglist[k][1:]], "error": out})
            log.warning("point %d failed: %s", k, out)
    return np.array(values, dtype=float), failures


def _score(config: SweepConfig, u0: np.ndarray, control: IonParams, target: IonParams,
           refocus: Optional[bool] = None) -> float:
    prog = config.program(refocus)
    psi = _qubit_vector(config.input_state())
    if control.decay is None and target.decay is None:
        u = program_unitary(prog, control, target, config.blockade(), tol=config.state_tol())
        return gate_fidelity(u, u0, psi, density=False)
    full = np.zeros(DIM * DIM, dtype=complex)
    full[list(QUBIT_INDICES)] = psi
    rho = program_master(prog, control, target, np.outer(full, full.conj()), config.blockade(),
                         tol=config.master_tol())
    return gate_fidelity(rho, u0, psi, density=True)


def cphase_point(config: SweepConfig, u0: np.ndarray, dc: float, dt: float, decay: bool,
                 te: Optional[float] = None, refocus: Optional[bool] = None) -> float:
    """Fidelity of the robust sequence at one hyperfine pair (quoted units)."""
    c, t = config.ions(dc, dt, te=te, decay=decay)
    return _score(config, u0, c, t, refocus)


def _metadata(config: SweepConfig, **extra) -> dict:
    meta = {"config": asdict(config), "pulse_rad_per_us": asdict(config.pulse())}
    meta.update(extra)
    return meta


def sweep_hyperfine(config: SweepConfig, reference: Optional[Reference] = None,
                    decay: Optional[bool] = None, refocus: Optional[bool] = None) -> FidelitySurface:
    """Fidelity over the (delta_c, delta_t) grid against a fixed reference."""
    decay = config.decay if decay is None else decay
    refocus = config.refocus if refocus is None else refocus
    ref = reference or reference_unitary(config, refocus)
    dcs, dts = config.dc_grid(), config.dt_grid()
    args = [(config, ref.unitary, dc, dt, decay, None, refocus) for dc in dcs for dt in dts]
    values, failures = run_grid(cphase_point, args, config.jobs)
    return FidelitySurface(
        (("delta_c", "MHz", dcs), ("delta_t", "MHz", dts)),
        values.reshape(len(dcs), len(dts)),
        ref.checksum,
        _metadata(config, decay=decay, refocus=refocus, te_us=config.te if decay else None),
        failures,
    )


def sweep_lifetime(config: SweepConfig, reference: Optional[Reference] = None) -> FidelitySurface:
    """One fidelity curve over delta_t per lifetime, at ``delta_c = lifetime_dc``."""
    ref = reference or reference_unitary(config)
    tes, dts = np.asarray(config.te_list, dtype=float), config.dt_grid()
    args = [(config, ref.unitary, config.lifetime_dc, dt, True, te, None) for te in tes for dt in dts]
    values, failures = run_grid(cphase_point, args, config.jobs)
    return FidelitySurface(
        (("te_us", "us", tes), ("delta_t", "MHz", dts)),
        values.reshape(len(tes), len(dts)),
        ref.checksum,
        _metadata(config, decay=True, delta_c=config.lifetime_dc),
        failures,
    )


def lifetime_baseline(config: SweepConfig, reference: Optional[Reference] = None) -> np.ndarray:
    """Decay-free fidelity along delta_t at ``delta_c = lifetime_dc``."""
    ref = reference or reference_unitary(config)
    return np.array([cphase_point(config, ref.unitary, config.lifetime_dc, dt, False) for dt in config.dt_grid()])


def unrefocused_comparison(config: SweepConfig) -> Tuple[FidelitySurface, FidelitySurface]:
    """Decay-free surfaces with and without the double-NOT blocks.

    Each variant is scored against its own reference operator.
    """
    with_refocus = sweep_hyperfine(config, decay=False, refocus=True)
    without = sweep_hyperfine(config, decay=False, refocus=False)
    return with_refocus, without


def detuning_grid(control_values: Sequence[float], target_values: Sequence[float],
                  dc: float = 0.0, dt: float = 0.0) -> List[Tuple[float, float, float, float]]:
    """Samples ``(Delta_c, delta_c, Delta_t, delta_t)`` over a grid of optical detunings."""
    return [(a, dc, b, dt) for a in control_values for b in target_values]


def ensemble_point(config: SweepConfig, u0: np.ndarray, sample) -> float:
    opt_c, dc, opt_t, dt = sample
    c, t = config.ions(dc, dt, delta_c=opt_c, delta_t=opt_t)
    return _score(config, u0, c, t)


def ensemble_average_fidelity(config: SweepConfig, samples: Sequence[Tuple[float, float, float, float]],
                              reference: Optional[Reference] = None) -> float:
    """Mean fidelity over per-ion samples ``(Delta_c, delta_c, Delta_t, delta_t)`` (quoted MHz).

    Every sample is scored against the nominal reference operator.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("empty sample set")
    ref = reference or reference_unitary(config)
    values, failures = run_grid(ensemble_point, [(config, ref.unitary, s) for s in samples], config.jobs)
    if failures:
        raise RuntimeError(f"{len(failures)} ensemble samples failed: {failures[0]['error']}")
    return float(np.mean(values))


# ---------------------------------------------------------------- leakage


@dataclass(frozen=True)
class LeakageConfig:
    """Single-ion bar-state leakage during one two-colour pulse (quoted MHz)."""

    omega0: float = 4.0
    mu: float = 3.0
    beta: float = 1.28
    duration: float = 1.5
    delta_opt: float = 0.1
    delta_hf: float = 0.03
    alpha: float = 0.0
    addressed: int = 0  # 0 drives |0bar> <-> |e>, 1 drives |1bar> <-> |e>
    n_points: int = 301
    apply_2pi: bool = True
    tol: float = 1e-10

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError("need at least two time points")
        if self.addressed not in (0, 1):
            raise ValueError("addressed must be 0 or 1")

    def pulse(self) -> SechPulseParams:
        w = lambda v: angular(v, self.apply_2pi)  # noqa: E731
        return SechPulseParams(w(self.omega0), self.mu, w(self.beta), self.duration)

    def ion(self) -> IonParams:
        w = lambda v: angular(v, self.apply_2pi)  # noqa: E731
        return IonParams(w(self.delta_opt), w(self.delta_hf), hf_bound=w(0.06))


@dataclass
class LeakageScan:
    t_us: np.ndarray  # from pulse start
    numeric: np.ndarray
    perturbative: np.ndarray
    naive_bound: float

    @property
    def final_numeric(self) -> float:
        return float(self.numeric[-1])

    @property
    def final_perturbative(self) -> float:
        return float(self.perturbative[-1])


def addressing_program(pulse: SechPulseParams, alpha: float, addressed: int = 0) -> PulseProgram:
    """One two-colour pulse coupling only the chosen bar state to |e>."""
    phase1 = alpha if addressed == 0 else alpha + np.pi
    event = PulseEvent("control", (Color(0, 0.0), Color(1, phase1)), pulse)
    return PulseProgram((event,), f"address_{addressed}bar", (("alpha", alpha),), two_ion=False)


def leakage_scan(config: LeakageConfig) -> LeakageScan:
    """Population moved into the unaddressed bar state, numerically and perturbatively."""
    pulse = config.pulse()
    ion = config.ion()
    bar = BarBasis(config.alpha)
    t = np.linspace(pulse.t_start, pulse.t_end, config.n_points)
    h = compile(addressing_program(pulse, config.alpha, config.addressed), ion)
    psi0 = bar.state(config.addressed)
    other = bar.state(1 - config.addressed)
    states = state_trajectory(h, psi0, t, tol=config.tol)
    numeric = np.abs(states @ other.conj()) ** 2
    perturbative = np.abs(leakage_amplitude(pulse, ion, bar, t)) ** 2
    naive = abs(config.delta_hf) * config.duration
    return LeakageScan(t - pulse.t_start, numeric, perturbative, naive)

