"""Dressed states and low-order perturbation theory for a single sech pulse.

Two-level quantities live in the frame co-rotating with the chirp, where the
driven block is ``[[x, W/2], [W/2, 0]]`` in the basis ``(|e>, |i>)`` with
``x = Delta + chirp(t)`` and ``W`` the real envelope.  Dressed states are
parametrised by the mixing angle ``theta = atan2(W, x)``:

    |+> = ( cos(theta/2), sin(theta/2) )
    |-> = (-sin(theta/2), cos(theta/2) )

which are the normalized forms of ``(2E|e> + W|i>)`` and stay finite when
``W -> 0``.  With this choice the diabatic coupling ``<-|d/dt|+>`` equals
``theta'/2``, the closed form evaluated by :func:`diabatic_coupling_xi`.

Dynamical phases are accumulated from the pulse centre.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .ion_model import G0, BarBasis, IonParams
from .pulse_engine import (
    SechPulseParams,
    chirp_phase,
    chirp_rate,
    envelope_rate,
    instantaneous_detuning,
)

QUAD_TOL = 1e-12


class DegenerateInputError(ValueError):
    pass


def dressed_energies(x, omega_r):
    """``E_-, E_+ = (x -+ sqrt(x^2 + W^2)) / 2``."""
    x = np.asarray(x, dtype=float)
    root = np.hypot(x, omega_r)
    return 0.5 * (x - root), 0.5 * (x + root)


@dataclass(frozen=True)
class DressedPoint:
    e_minus: float
    e_plus: float
    minus: np.ndarray = field(repr=False)  # components over (|e>, |i>)
    plus: np.ndarray = field(repr=False)


def mixing_angle(x, omega_r):
    return np.arctan2(omega_r, x)


def dressed_states(x: float, omega_r: float) -> DressedPoint:
    if x == 0 and omega_r == 0:
        raise DegenerateInputError("dressed states undefined at x = W = 0")
    em, ep = dressed_energies(x, omega_r)
    half = 0.5 * mixing_angle(x, omega_r)
    c, s = np.cos(half), np.sin(half)
    return DressedPoint(float(em), float(ep), np.array([-s, c]), np.array([c, s]))


def _effective_rabi(pulse: SechPulseParams, t):
    # untruncated envelope; callers stay inside the window
    return pulse.omega0 / np.cosh(pulse.beta * (np.asarray(t, dtype=float) - pulse.t_center))


def _detuning(ion, transition: int) -> float:
    if isinstance(ion, IonParams):
        return ion.transition_detuning(transition)
    return float(ion)


def diabatic_coupling_xi(pulse: SechPulseParams, ion, t, transition: int = G0):
    """``(W'(x) - phi'' W) / (2 (x^2 + W^2))`` with analytic derivatives.

    ``ion`` may be an :class:`IonParams` or a bare detuning.
    """
    delta = _detuning(ion, transition)
    x = delta + instantaneous_detuning(pulse, t)
    w = _effective_rabi(pulse, t)
    return (envelope_rate(pulse, t) * x - chirp_rate(pulse, t) * w) / (2.0 * (x * x + w * w))


def _energies_at(pulse, delta, t):
    x = delta + instantaneous_detuning(pulse, t)
    return dressed_energies(x, _effective_rabi(pulse, t))


def _phase_from_center(pulse, delta, t, which: int) -> float:
    val, _ = quad(lambda s: _energies_at(pulse, delta, s)[which], pulse.t_center, t,
                  epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=200)
    return val


def _check_grid(pulse, t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise ValueError("empty time grid")
    if np.any(np.diff(t) < 0):
        raise ValueError("time grid must be monotone")
    eps = 1e-12
    if t[0] < pulse.t_start - eps or t[-1] > pulse.t_end + eps:
        raise ValueError("time grid leaves the pulse window")
    return t


@dataclass
class PerturbativeTrajectory:
    t: np.ndarray
    phase_plus: np.ndarray  # integral of E_+ from the pulse centre
    phase_minus: np.ndarray
    c_plus: np.ndarray  # zeroth-order amplitudes exp(-i phase)
    c_minus: np.ndarray
    first_order: Optional[np.ndarray] = None  # U_I(t) in basis (|->, |+>)
    leakage: Optional[np.ndarray] = None


def _integrate(rhs, y0, t, tol):
    if t.size == 1:
        return np.asarray(y0, dtype=float)[:, None]
    sol = solve_ivp(rhs, (t[0], t[-1]), y0, method="DOP853", rtol=tol, atol=tol * 1e-2, t_eval=t)
    if sol.status != 0:
        raise RuntimeError(sol.message)
    return sol.y


def zeroth_order(pulse: SechPulseParams, ion, transition: int, t_grid, tol: float = QUAD_TOL):
    """Adiabatic amplitudes ``exp(-i int_{t_center}^t E_pm)`` on ``t_grid``."""
    t = _check_grid(pulse, t_grid)
    delta = _detuning(ion, transition)
    y0 = [_phase_from_center(pulse, delta, t[0], 1), _phase_from_center(pulse, delta, t[0], 0)]

    def rhs(s, y):
        em, ep = _energies_at(pulse, delta, s)
        return [ep, em]

    ph = _integrate(rhs, y0, t, tol)
    return PerturbativeTrajectory(t, ph[0], ph[1], np.exp(-1j * ph[0]), np.exp(-1j * ph[1]))


def first_order_propagator(pulse: SechPulseParams, ion, transition: int, t_grid, tol: float = QUAD_TOL):
    """First-order interaction-picture propagator from ``t_grid[0]``.

    Returns a :class:`PerturbativeTrajectory` whose ``first_order`` field has
    shape ``(N, 2, 2)`` in the basis ``(|->, |+>)``:

        U_I = [[1, -J], [conj(J), 1]],  J(t) = int xi exp(i(Phi_- - Phi_+))

    The matrix is not re-unitarized; see :func:`unitarity_defect`.
    """
    t = _check_grid(pulse, t_grid)
    delta = _detuning(ion, transition)
    y0 = [_phase_from_center(pulse, delta, t[0], 1), _phase_from_center(pulse, delta, t[0], 0), 0.0, 0.0]

    def rhs(s, y):
        em, ep = _energies_at(pulse, delta, s)
        xi = diabatic_coupling_xi(pulse, delta, s)
        arg = y[1] - y[0]
        return [ep, em, xi * np.cos(arg), xi * np.sin(arg)]

    y = _integrate(rhs, y0, t, tol)
    j = y[2] + 1j * y[3]
    u = np.empty((t.size, 2, 2), dtype=complex)
    u[:, 0, 0] = 1.0
    u[:, 1, 1] = 1.0
    u[:, 0, 1] = -j
    u[:, 1, 0] = np.conj(j)
    return PerturbativeTrajectory(t, y[0], y[1], np.exp(-1j * y[0]), np.exp(-1j * y[1]), first_order=u)


def unitarity_defect(u: np.ndarray) -> np.ndarray:
    """``max |U^dag U - 1|`` per time point for a stack of 2x2 matrices."""
    u = np.asarray(u)
    prod = np.einsum("nji,njk->nik", u.conj(), u)
    return np.max(np.abs(prod - np.eye(u.shape[-1])), axis=(1, 2))


def leakage_amplitude(pulse: SechPulseParams, ion: IonParams, bar: Optional[BarBasis], t_grid,
                      tol: float = QUAD_TOL):
    """First-order amplitude transferred between the bar states during one pulse.

        U = -(i delta / 2) int_{t_start}^t W / sqrt(W^2 + 4 E_+^2) exp(-i int_{t_center}^{t'} E_+) dt'

    ``pulse.omega0`` is the Rabi frequency on the addressed bar transition and
    the two-level detuning is ``ion.delta_opt``.  The same expression holds for
    either addressed bar state; ``bar`` only fixes which pair is meant.
    """
    t = _check_grid(pulse, t_grid)
    delta = ion.delta_opt
    if ion.delta_hf == 0:
        return np.zeros(t.size, dtype=complex)
    start = pulse.t_start
    phi0 = _phase_from_center(pulse, delta, start, 1)

    def rhs(s, y):
        w = _effective_rabi(pulse, s)
        _, ep = _energies_at(pulse, delta, s)
        weight = w / np.sqrt(w * w + 4 * ep * ep)
        return [ep, weight * np.cos(y[0]), -weight * np.sin(y[0])]

    grid = t if t[0] == start else np.concatenate([[start], t])
    y = _integrate(rhs, [phi0, 0.0, 0.0], grid, tol)
    if grid is not t:
        y = y[:, 1:]
    return -0.5j * ion.delta_hf * (y[1] + 1j * y[2])


# ---------------------------------------------------------------- Bloch sphere

FRAMES = ("accelerated", "channel", "ion")


def to_frame(amps, t, pulse: SechPulseParams, detuning: float = 0.0, frame: str = "accelerated"):
    """Re-express accelerated-frame amplitudes ``(c_e, c_i)`` in another frame.

    ``channel``: fixed frame rotating at the channel centre frequency.
    ``ion``: frame rotating at the ion's own (shifted) resonance, i.e. the
    channel frame with the free precession at ``detuning`` removed.
    """
    if frame not in FRAMES:
        raise ValueError(f"unknown frame {frame!r}; choose from {FRAMES}")
    a = np.array(amps, dtype=complex, copy=True)
    if frame == "accelerated":
        return a
    phase = chirp_phase(pulse, t)
    if frame == "ion":
        phase = phase + detuning * (np.asarray(t) - pulse.t_center)
    a[..., 0] = a[..., 0] * np.exp(1j * phase)
    return a


def bloch_coordinates(amps, frame: str = "accelerated", *, t=None, pulse: Optional[SechPulseParams] = None,
                      detuning: float = 0.0) -> np.ndarray:
    """Bloch vector(s) of normalized two-level amplitudes ``(c_e, c_i)``.

    North pole is |e>: ``z = |c_e|^2 - |c_i|^2`` and ``x + i y = 2 c_e conj(c_i)``.
    Non-accelerated frames need ``t`` and ``pulse``.
    """
    a = np.asarray(amps, dtype=complex)
    norms = np.sum(np.abs(a) ** 2, axis=-1)
    if np.any(np.abs(norms - 1) > 1e-6):
        raise ValueError("amplitudes are not normalized")
    if frame != "accelerated":
        if t is None or pulse is None:
            raise ValueError(f"frame {frame!r} needs t and pulse")
        a = to_frame(a, t, pulse, detuning, frame)
    ce, ci = a[..., 0], a[..., 1]
    coh = 2 * ce * np.conj(ci)
    return np.stack([coh.real, coh.imag, np.abs(ce) ** 2 - np.abs(ci) ** 2], axis=-1)


@dataclass
class BlochComparison:
    t: np.ndarray
    ode: np.ndarray  # amplitudes (c_e, c_i), accelerated frame
    zeroth: np.ndarray
    first: np.ndarray  # first-order amplitudes, not normalized
    first_defect: np.ndarray

    def bloch(self, which: str, frame: str = "accelerated", pulse=None, detuning=0.0):
        amps = getattr(self, which)
        if which == "first":
            amps = amps / np.linalg.norm(amps, axis=1)[:, None]
        return bloch_coordinates(amps, frame, t=self.t, pulse=pulse, detuning=detuning)

    def distances(self):
        """Bloch-vector distances of the zeroth- and first-order curves from the ODE."""
        ode = self.bloch("ode")
        return (np.linalg.norm(self.bloch("zeroth") - ode, axis=1),
                np.linalg.norm(self.bloch("first") - ode, axis=1))


def compare_trajectories(pulse: SechPulseParams, detuning: float, t_grid=None, n_points: int = 2001,
                         tol: float = 1e-11) -> BlochComparison:
    """ODE, adiabatic and first-order trajectories for a pulse starting in |i>.

    Both approximations start from the initial projections onto the dressed
    states: zeroth order keeps those coefficients fixed (pure adiabatic
    following), first order propagates them with :func:`first_order_propagator`.
    """
    from .dynamics import state_trajectory
    from .ion_model import accelerated_hamiltonian

    t = np.linspace(pulse.t_start, pulse.t_end, n_points) if t_grid is None else _check_grid(pulse, t_grid)

    def h(s):
        return accelerated_hamiltonian(detuning, float(_effective_rabi(pulse, s)),
                                       float(instantaneous_detuning(pulse, s)))

    psi0 = np.array([0.0, 1.0], dtype=complex)
    ode = state_trajectory(h, psi0, t, tol=tol)

    theta = mixing_angle(detuning + instantaneous_detuning(pulse, t), _effective_rabi(pulse, t))
    plus = np.stack([np.cos(theta / 2), np.sin(theta / 2)], axis=1)
    minus = np.stack([-np.sin(theta / 2), np.cos(theta / 2)], axis=1)

    traj = first_order_propagator(pulse, detuning, G0, t)
    b0 = np.array([minus[0] @ psi0 / traj.c_minus[0], plus[0] @ psi0 / traj.c_plus[0]])
    b = traj.first_order @ b0
    zeroth = (b0[0] * traj.c_minus)[:, None] * minus + (b0[1] * traj.c_plus)[:, None] * plus
    first = (b[:, 0] * traj.c_minus)[:, None] * minus + (b[:, 1] * traj.c_plus)[:, None] * plus
    defect = np.abs(np.linalg.norm(first, axis=1) - 1)
    return BlochComparison(t, ode, zeroth, first, defect)


def stark_crossings(pulse: SechPulseParams, detuning: float, delta_hf: float, ratios=(10.0, 100.0)):
    """Earliest times (from pulse start) where ``E_+`` reaches ``ratio * |delta_hf|``."""
    t = np.linspace(pulse.t_start, pulse.t_end, 4001)
    ep = _energies_at(pulse, detuning, t)[1]
    out = {}
    for r in ratios:
        level = r * abs(delta_hf)
        idx = np.nonzero(ep >= level)[0]
        if idx.size == 0 or idx[0] == 0:
            out[r] = None
            continue
        k = idx[0]
        root = brentq(lambda s: _energies_at(pulse, detuning, s)[1] - level, t[k - 1], t[k], xtol=1e-12)
        out[r] = root - pulse.t_start
    return out
