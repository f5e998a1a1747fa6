"""Adaptive propagation of states, unitaries and density matrices.

Hamiltonians are callables ``h(t) -> (n, n) ndarray``.  A callable may carry
a ``breakpoints`` attribute (sorted times where ``h`` is discontinuous, e.g.
truncated pulse edges); integration restarts at each breakpoint so the
adaptive stepper never straddles a jump.

The master equation is ``drho/dt = i[rho, H] + L(rho)``, i.e. the usual
``-i[H, rho]``; with no collapse operators it reduces to ``i dpsi/dt = H psi``.
"""
from __future__ import annotations

import logging
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .ion_model import DIM, E, G0, G1, DecayChannel, embed

log = logging.getLogger(__name__)

METHOD = "DOP853"
STATE_TOL = 1e-9
MASTER_TOL = 1e-8
POSITIVITY_LIMIT = 1e-6


class IntegrationError(RuntimeError):
    """The adaptive integrator gave up; ``t`` is where it stopped."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} (at t = {t:.6g} us)")
        self.t = t


class PositivityError(RuntimeError):
    pass


def _segments(h, t0: float, t1: float, breakpoints: Optional[Iterable[float]] = None):
    if breakpoints is None:
        breakpoints = getattr(h, "breakpoints", ())
    inner = sorted({float(b) for b in breakpoints if t0 < b < t1})
    edges = [t0, *inner, t1]
    return list(zip(edges[:-1], edges[1:]))


def _solve(f, y0, t0, t1, tol, t_eval=None):
    sol = solve_ivp(f, (t0, t1), y0, method=METHOD, rtol=tol, atol=tol * 1e-3, t_eval=t_eval)
    if sol.status != 0:
        raise IntegrationError(sol.message, float(sol.t[-1]))
    return sol


def _check_time(t0, t1):
    if t1 < t0:
        raise ValueError(f"t1 = {t1} precedes t0 = {t0}")


def propagate_state(h: Callable, psi0, t0: float, t1: float, tol: float = STATE_TOL,
                    breakpoints=None) -> np.ndarray:
    """Solve ``i dpsi/dt = H(t) psi`` from ``t0`` to ``t1``."""
    _check_time(t0, t1)
    psi = np.asarray(psi0, dtype=complex).copy()
    norm0 = np.linalg.norm(psi)
    if abs(norm0 - 1) > 1e-9:
        raise ValueError(f"initial state not normalized (norm {norm0})")
    for a, b in _segments(h, t0, t1, breakpoints):
        psi = _solve(lambda t, y: -1j * (h(t) @ y), psi, a, b, tol).y[:, -1]
    drift = abs(np.linalg.norm(psi) - 1)
    if drift > 100 * tol:
        log.warning("norm drift %.3g after propagation", drift)
    return psi


def state_trajectory(h: Callable, psi0, t_eval: Sequence[float], tol: float = STATE_TOL,
                     breakpoints=None) -> np.ndarray:
    """States at every time in ``t_eval`` (shape ``(len(t_eval), n)``)."""
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.size == 0:
        raise ValueError("empty time grid")
    if np.any(np.diff(t_eval) < 0):
        raise ValueError("time grid must be non-decreasing")
    psi = np.asarray(psi0, dtype=complex)
    out = np.empty((t_eval.size, psi.size), dtype=complex)
    out[t_eval == t_eval[0]] = psi
    for a, b in _segments(h, t_eval[0], t_eval[-1], breakpoints):
        mask = (t_eval > a) & (t_eval <= b)
        times = np.unique(np.append(t_eval[mask], b))
        sol = _solve(lambda t, y: -1j * (h(t) @ y), psi, a, b, tol, t_eval=times)
        if mask.any():
            out[mask] = sol.y[:, np.searchsorted(times, t_eval[mask])].T
        psi = sol.y[:, -1]
    return out


def propagate_unitary(h: Callable, t0: float, t1: float, tol: float = STATE_TOL,
                      breakpoints=None, dim: Optional[int] = None) -> np.ndarray:
    """Propagator ``U(t1, t0)``; all columns are integrated together."""
    _check_time(t0, t1)
    n = dim if dim is not None else h(t0).shape[0]
    u = np.eye(n, dtype=complex)

    def f(t, y):
        return (-1j * (h(t) @ y.reshape(n, n))).ravel()

    for a, b in _segments(h, t0, t1, breakpoints):
        u = _solve(f, u.ravel(), a, b, tol).y[:, -1].reshape(n, n)
    return u


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


# ---------------------------------------------------------------- master equation


def lindblad_rhs(rho: np.ndarray, h: np.ndarray, channels: Sequence[np.ndarray] = ()) -> np.ndarray:
    """``i[rho, H] - 1/2 sum {C^dag C, rho} + sum C rho C^dag``."""
    rho = np.asarray(rho)
    h = np.asarray(h)
    if rho.shape != h.shape:
        raise ValueError(f"dimension mismatch: rho {rho.shape}, H {h.shape}")
    out = 1j * (rho @ h - h @ rho)
    for c in channels:
        c = np.asarray(c)
        if c.shape != rho.shape:
            raise ValueError(f"collapse operator shape {c.shape} does not match {rho.shape}")
        cdc = c.conj().T @ c
        out = out - 0.5 * (cdc @ rho + rho @ cdc) + c @ rho @ c.conj().T
    return out


def single_ion_collapse(decay: Optional[DecayChannel]) -> list:
    """Collapse operators ``sqrt(b_i gamma)|i><e|`` for one ion."""
    ops = []
    if decay is None:
        return ops
    for level, b in ((G0, decay.b0), (G1, decay.b1)):
        if b > 0 and decay.gamma > 0:
            c = np.zeros((DIM, DIM), dtype=complex)
            c[level, E] = np.sqrt(b * decay.gamma)
            ops.append(c)
    return ops


def two_ion_collapse(control: Optional[DecayChannel], target: Optional[DecayChannel]) -> list:
    """Per-ion jumps, each tensored with the identity on the other ion."""
    return [embed(c, "control") for c in single_ion_collapse(control)] + [
        embed(c, "target") for c in single_ion_collapse(target)
    ]


def loss_operator(decay: Optional[DecayChannel], ion: Optional[str] = None) -> Optional[np.ndarray]:
    """Rate operator for decay into the dump level, or ``None`` when disabled."""
    if decay is None or not decay.dump or decay.dump_fraction == 0:
        return None
    k = np.zeros((DIM, DIM), dtype=complex)
    k[E, E] = decay.gamma * decay.dump_fraction
    return k if ion is None else embed(k, ion)


def _vec_left(a):
    # row-major vec: vec(A X) = (A kron I) vec(X)
    return np.kron(a, np.eye(a.shape[0]))


def _vec_right(b):
    # vec(X B) = (I kron B^T) vec(X)
    return np.kron(np.eye(b.shape[0]), b.T)


def liouvillian(h: np.ndarray, channels: Sequence[np.ndarray] = (), loss: Optional[np.ndarray] = None):
    """Superoperator ``L`` with ``vec(lindblad_rhs(rho)) = L vec(rho)`` (row-major vec).

    ``loss`` is an optional Hermitian rate operator ``K`` adding ``-1/2 {K, rho}``
    without a matching jump term (population leaving the model).
    """
    heff = np.asarray(h, dtype=complex).copy()
    for c in channels:
        heff = heff - 0.5j * (c.conj().T @ c)
    if loss is not None:
        heff = heff - 0.5j * loss
    sup = -1j * _vec_left(heff) + 1j * _vec_right(heff.conj().T)
    for c in channels:
        sup = sup + np.kron(c, c.conj())
    return sup


def drive_superoperator(k: np.ndarray) -> np.ndarray:
    """Superoperator of ``-i[K, .]`` for a (non-Hermitian) drive piece ``K``."""
    return -1j * (_vec_left(k) - _vec_right(k))


def _check_density(rho, tol_trace=1e-8):
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if abs(np.trace(rho) - 1) > tol_trace:
        raise ValueError(f"trace {np.trace(rho).real} differs from 1")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix not Hermitian")
    return rho


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(hermitize(rho))[0])


def propagate_master(h, rho0, channels: Sequence[np.ndarray] = (), t0: float = 0.0, t1: float = 0.0,
                     tol: float = MASTER_TOL, breakpoints=None, loss: Optional[np.ndarray] = None,
                     rhs: Optional[Callable] = None) -> np.ndarray:
    """Integrate the Lindblad equation from ``t0`` to ``t1``.

    ``rhs``, if given, is a callable ``(t, vec(rho)) -> vec(drho/dt)``
    (row-major vec) replacing the generic right-hand side built from ``h``,
    ``channels`` and ``loss``; ``h`` then only supplies breakpoints.

    Hermiticity is re-imposed at every segment boundary; a smallest eigenvalue
    below ``-1e-6`` raises :class:`PositivityError`.
    """
    _check_time(t0, t1)
    rho = _check_density(rho0)
    n = rho.shape[0]
    channels = [np.asarray(c, dtype=complex) for c in channels]
    if rhs is None:
        dissipator = liouvillian(np.zeros((n, n)), channels, loss)

        def f(t, y):
            r = y.reshape(n, n)
            hv = h(t)
            return dissipator @ y - 1j * (hv @ r - r @ hv).ravel()
    else:
        f = rhs

    for a, b in _segments(h, t0, t1, breakpoints):
        rho = hermitize(_solve(f, rho.ravel(), a, b, tol).y[:, -1].reshape(n, n))
    lam = min_eigenvalue(rho)
    if lam < -POSITIVITY_LIMIT:
        raise PositivityError(f"density matrix eigenvalue {lam:.3g} below -{POSITIVITY_LIMIT}")
    if lam < -1e-8:
        log.info("smallest eigenvalue %.3g", lam)
    return rho


def state_fidelity(psi: np.ndarray, rho: np.ndarray) -> float:
    psi = np.asarray(psi)
    return float(np.real(psi.conj() @ rho @ psi))
