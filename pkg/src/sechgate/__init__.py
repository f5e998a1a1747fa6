"""Sech-pulse gates on three-level ions: pulses, dynamics, perturbation theory and sweeps."""

__version__ = "0.1.0"

from .pulse_engine import SechPulseParams, angular, complex_rabi, rabi_envelope, reference_pulse  # noqa: E402
from .ion_model import BarBasis, BlockadeParams, DecayChannel, IonParams  # noqa: E402
