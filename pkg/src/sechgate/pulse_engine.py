"""Complex hyperbolic secant pulses.

A pulse is centred at ``t_start + duration / 2`` and hard-truncated outside
``[t_start, t_start + duration]``.  Every function accepts scalar or array
times and returns the same shape.

Frequencies are angular (rad/us) at this layer.  Values quoted in MHz are
converted with :func:`angular`, which multiplies by 2*pi unless the caller
asks for the bare-number convention.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * np.pi


def angular(value, apply_2pi: bool = True):
    """Convert a quoted frequency (MHz, kHz already divided by 1000) to rad/us."""
    return value * TWO_PI if apply_2pi else value


@dataclass(frozen=True)
class SechPulseParams:
    """Envelope and chirp of one sech pulse.

    Parameters
    ----------
    omega0 : float
        Peak Rabi frequency (rad/us).
    mu : float
        Dimensionless chirp parameter.
    beta : float
        Envelope rate (1/us).
    duration : float
        Length of the truncation window (us).
    phase : float
        Constant phase added to the chirp phase (rad).
    t_start : float
        Start of the window in program time (us).
    """

    omega0: float
    mu: float
    beta: float
    duration: float
    phase: float = 0.0
    t_start: float = 0.0

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError(f"omega0 must be positive, got {self.omega0}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.duration > 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        if self.mu < 0:
            raise ValueError(f"mu must be non-negative, got {self.mu}")

    @property
    def t_center(self) -> float:
        return self.t_start + 0.5 * self.duration

    @property
    def t_end(self) -> float:
        return self.t_start + self.duration

    @property
    def max_chirp(self) -> float:
        """Asymptotic chirp frequency mu*beta."""
        return self.mu * self.beta

    def shifted(self, t_start: float) -> "SechPulseParams":
        return replace(self, t_start=t_start)

    def window(self, t):
        t = np.asarray(t, dtype=float)
        return (t >= self.t_start) & (t <= self.t_end)


def _scaled_time(p: SechPulseParams, t):
    return p.beta * (np.asarray(t, dtype=float) - p.t_center)


def _log_cosh(x):
    # stable for large |x|
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - np.log(2.0)


def rabi_envelope(p: SechPulseParams, t):
    """Real Rabi envelope ``omega0 * sech(beta (t - t_center))``, zero outside the window."""
    s = _scaled_time(p, t)
    val = p.omega0 / np.cosh(s)
    return np.where(p.window(t), val, 0.0)


def instantaneous_detuning(p: SechPulseParams, t):
    """Chirp frequency ``mu beta tanh(beta (t - t_center))``.

    Not truncated: the chirp law is defined for all t, only the amplitude is windowed.
    """
    return p.mu * p.beta * np.tanh(_scaled_time(p, t))


def chirp_phase(p: SechPulseParams, t):
    """Integral of the chirp from the pulse centre, ``mu ln cosh(beta (t - t_center))``."""
    return p.mu * _log_cosh(_scaled_time(p, t))


def complex_rabi(p: SechPulseParams, t):
    """Complex amplitude ``rabi_envelope * exp(i (phase + chirp_phase))``."""
    return rabi_envelope(p, t) * np.exp(1j * (p.phase + chirp_phase(p, t)))


def envelope_rate(p: SechPulseParams, t):
    """Analytic time derivative of the (untruncated) envelope."""
    s = _scaled_time(p, t)
    return -p.omega0 * p.beta * np.tanh(s) / np.cosh(s)


def chirp_rate(p: SechPulseParams, t):
    """Analytic second derivative of the chirp phase, ``mu beta^2 sech^2``."""
    s = _scaled_time(p, t)
    return p.mu * p.beta**2 / np.cosh(s) ** 2


def pulse_energy(p: SechPulseParams) -> float:
    """Integral of the squared envelope over the window (closed form)."""
    half = 0.5 * p.beta * p.duration
    return 2.0 * p.omega0**2 * np.tanh(half) / p.beta


def reference_pulse(apply_2pi: bool = True, **overrides) -> SechPulseParams:
    """Standard gate pulse: 4 MHz peak, mu = 3, beta = 1.28 MHz, 1.5 us window."""
    kw = dict(omega0=angular(4.0, apply_2pi), mu=3.0, beta=angular(1.28, apply_2pi), duration=1.5)
    kw.update(overrides)
    return SechPulseParams(**kw)
