"""Hamiltonians for one three-level ion and for two dipole-coupled ions.

Basis per ion is ``(|0>, |1>, |e>)``; in two-ion products the control ion is
the first tensor factor, so ``|c t>`` has index ``3*c + t``.

All Hamiltonians are written in the fixed frame rotating at the channel
centre, with each drive's full complex (chirped) amplitude ``a`` entering as
``a/2 |e><i| + h.c.``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from .pulse_engine import TWO_PI

G0, G1, E = 0, 1, 2
TRANSITIONS = (G0, G1)
DIM = 3
# qubit subspace indices inside the 9-dim two-ion space
QUBIT_INDICES = (0, 1, 3, 4)

DEFAULT_HF_BOUND = 0.06 * TWO_PI


class ConfigurationError(ValueError):
    """Inconsistent drive or schedule configuration."""


@dataclass(frozen=True)
class DecayChannel:
    """Spontaneous decay of |e> with total rate ``gamma = 1/T_e``.

    ``b0`` and ``b1`` are the branching ratios into |0> and |1>.  With
    ``dump=True`` the remaining ``1 - b0 - b1`` leaves the model entirely
    (trace is then not conserved); otherwise the ratios must sum to one.
    """

    gamma: float
    b0: float = 0.5
    b1: float = 0.5
    dump: bool = False

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.b0 < 0 or self.b1 < 0:
            raise ValueError("branching ratios must be non-negative")
        total = self.b0 + self.b1
        if total > 1 + 1e-12:
            raise ValueError(f"b0 + b1 = {total} exceeds 1")
        if not self.dump and abs(total - 1) > 1e-12:
            raise ValueError("b0 + b1 < 1 requires dump=True")

    @classmethod
    def from_lifetime(cls, te_us: float, b0: float = 0.5, b1: float = 0.5, dump: bool = False):
        if te_us <= 0:
            raise ValueError("lifetime must be positive")
        return cls(1.0 / te_us, b0, b1, dump)

    @property
    def dump_fraction(self) -> float:
        return max(0.0, 1.0 - self.b0 - self.b1)


@dataclass(frozen=True)
class IonParams:
    """One ion: optical detuning from the channel centre and hyperfine shift (rad/us)."""

    delta_opt: float = 0.0
    delta_hf: float = 0.0
    decay: Optional[DecayChannel] = None
    hf_bound: float = DEFAULT_HF_BOUND

    def __post_init__(self):
        if abs(self.delta_hf) > self.hf_bound:
            warnings.warn(
                f"hyperfine shift {self.delta_hf:.4g} outside +-{self.hf_bound:.4g}",
                stacklevel=3,
            )

    def transition_detuning(self, level: int) -> float:
        """Detuning of ``level <-> e`` in the channel frame."""
        return self.delta_opt + (self.delta_hf if level == G1 else 0.0)


@dataclass(frozen=True)
class BarBasis:
    """``|0bar>, |1bar> = (|0> +- e^{i alpha}|1>)/sqrt(2)``, |e> untouched."""

    alpha: float = 0.0

    def matrix(self) -> np.ndarray:
        """Columns are |0bar>, |1bar>, |e> expressed in the logical basis."""
        ph = np.exp(1j * self.alpha)
        s = 1 / np.sqrt(2)
        return np.array([[s, s, 0], [s * ph, -s * ph, 0], [0, 0, 1]], dtype=complex)

    def to_bar(self, op: np.ndarray) -> np.ndarray:
        """Express a logical-basis operator in the ordered basis (|e>, |0bar>, |1bar>)."""
        w = self.matrix()[:, [2, 0, 1]]
        return w.conj().T @ op @ w

    def state(self, which: int) -> np.ndarray:
        return self.matrix()[:, which]


@dataclass(frozen=True)
class BlockadeParams:
    delta_dd: float = 20.0 * TWO_PI

    def __post_init__(self):
        if self.delta_dd < 0:
            raise ValueError("delta_dd must be non-negative")


Drive = Tuple[int, complex]


def _check_drives(drives: Iterable[Drive]) -> list:
    drives = list(drives)
    seen = set()
    for level, _ in drives:
        if level not in TRANSITIONS:
            raise ConfigurationError(f"unknown transition {level!r}")
        if level in seen:
            raise ConfigurationError(f"two simultaneous drives on transition {level}<->e")
        seen.add(level)
    return drives


def drive_operator(level: int) -> np.ndarray:
    """``|e><level|`` for one ion."""
    k = np.zeros((DIM, DIM), dtype=complex)
    k[E, level] = 1.0
    return k


def static_hamiltonian(ion: IonParams) -> np.ndarray:
    return np.diag([0.0, -ion.delta_hf, ion.delta_opt]).astype(complex)


def drive_hamiltonian(drives: Iterable[Drive]) -> np.ndarray:
    h = np.zeros((DIM, DIM), dtype=complex)
    for level, amp in _check_drives(drives):
        h[E, level] += 0.5 * amp
        h[level, E] += 0.5 * np.conj(amp)
    return h


def single_ion_hamiltonian(ion: IonParams, drives: Iterable[Drive] = (), t=None) -> np.ndarray:
    """``Delta|e><e| - delta|1><1| + sum_i (a_i/2 |e><i| + h.c.)``.

    ``drives`` holds ``(level, amplitude)`` pairs already evaluated at the
    time of interest; ``t`` is accepted for signature symmetry only.
    """
    return static_hamiltonian(ion) + drive_hamiltonian(drives)


def bar_basis_hamiltonian(ion: IonParams, bar: BarBasis, drives: Iterable[Drive] = (), t=None):
    """Hamiltonian in the ordered basis ``(|e>, |0bar>, |1bar>)`` (closed form)."""
    drives = _check_drives(drives)
    amp = {G0: 0.0, G1: 0.0}
    amp.update(dict(drives))
    s = 1 / (2 * np.sqrt(2))
    ph = np.exp(1j * bar.alpha)
    c0 = s * (amp[G0] + ph * amp[G1])
    c1 = s * (amp[G0] - ph * amp[G1])
    d = ion.delta_hf
    return np.array(
        [
            [ion.delta_opt, c0, c1],
            [np.conj(c0), -d / 2, d / 2],
            [np.conj(c1), d / 2, -d / 2],
        ],
        dtype=complex,
    )


def split_h0_v(ion: IonParams, bar: BarBasis, drives: Iterable[Drive] = (), t=None):
    """Split the bar-basis Hamiltonian into the driven part and the hyperfine coupling."""
    h = bar_basis_hamiltonian(ion, bar, drives, t)
    d = ion.delta_hf / 2
    v = np.array([[0, 0, 0], [0, -d, d], [0, d, -d]], dtype=complex)
    return h - v, v


def two_ion_static(control: IonParams, target: IonParams, blockade: BlockadeParams) -> np.ndarray:
    i3 = np.eye(DIM)
    pe = np.zeros((DIM, DIM))
    pe[E, E] = 1.0
    return (
        np.kron(static_hamiltonian(control), i3)
        + np.kron(i3, static_hamiltonian(target))
        + blockade.delta_dd * np.kron(pe, pe)
    )


def embed(op: np.ndarray, ion: str) -> np.ndarray:
    """Lift a single-ion operator to the two-ion space."""
    i3 = np.eye(DIM)
    if ion == "control":
        return np.kron(op, i3)
    if ion == "target":
        return np.kron(i3, op)
    raise ConfigurationError(f"unknown ion {ion!r}")


def two_ion_hamiltonian(
    control: IonParams,
    target: IonParams,
    blockade: BlockadeParams,
    drives: Mapping[str, Sequence[Drive]] | None = None,
    t=None,
) -> np.ndarray:
    """``H_c x 1 + 1 x H_t + delta_dd |ee><ee|`` with drives keyed by ``"control"``/``"target"``."""
    drives = drives or {}
    unknown = set(drives) - {"control", "target"}
    if unknown:
        raise ConfigurationError(f"unknown ion tags {sorted(unknown)}")
    h = two_ion_static(control, target, blockade)
    for ion, ds in drives.items():
        h = h + embed(drive_hamiltonian(ds), ion)
    return h


def accelerated_hamiltonian(detuning: float, omega_r: float, chirp: float) -> np.ndarray:
    """Two-level block in the frame co-rotating with the chirp, basis ``(|e>, |i>)``."""
    return np.array([[detuning + chirp, omega_r / 2], [omega_r / 2, 0.0]], dtype=complex)
