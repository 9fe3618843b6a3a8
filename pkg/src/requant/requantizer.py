"""Approximate eigenstates as time averages over quantized orbits.

For a quantized closed orbit the periodic vector exp(i Theta_t)|Z_t> is
averaged over one period with the uniform-grid trapezoid rule, which is
spectrally accurate for smooth periodic integrands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpectrumNotInteger, ZeroAverage
from .hilbert import SpectralDecomposition, as_operator, as_state, propagate
from .orbits import QuantizedOrbit

ZERO_NORM = 1e-12
INTEGRALITY_TOL = 1e-8


@dataclass(frozen=True)
class RequantizedState:
    raw: np.ndarray
    norm: float
    normalized: np.ndarray
    energy: float
    n: int

    def to_json(self, spectrum: SpectralDecomposition | None = None, top: int | None = None) -> dict:
        doc = {"n": int(self.n), "norm": self.norm, "energy": self.energy}
        if spectrum is not None:
            w = spectrum.overlaps(self.normalized)
            order = np.argsort(-w, kind="stable")
            if top is not None:
                order = order[:top]
            doc["overlaps"] = [{"eigenindex": int(k), "overlap_sq": float(w[k])} for k in order]
        return doc


def orbit_average(orbit, samples: int = 256, shift: float = 0.0) -> np.ndarray:
    """(1/T) sum over a uniform grid of exp(i Theta_t)|Z_t>, optionally starting at t = shift."""
    T = orbit.period
    t = shift + T * np.arange(samples) / samples
    traj = orbit.samples
    states, theta = traj.section(np.mod(t, T) if shift else t)
    if shift:
        # the phase keeps accumulating past T: Theta(t + T) = Theta(t) + Theta_T
        theta = theta + orbit.total_phase * np.floor_divide(t, T)
    return np.mean(np.exp(1j * theta)[:, None] * states, axis=0)


def requantize(qorbit: QuantizedOrbit, samples_per_period: int = 256, H=None) -> RequantizedState:
    """Time average of the autoparallel section over the quantized orbit."""
    if samples_per_period < 16:
        raise ValueError("samples_per_period must be at least 16")
    raw = orbit_average(qorbit.orbit, samples_per_period)
    nrm = float(np.linalg.norm(raw))
    if nrm < ZERO_NORM:
        raise ZeroAverage(f"time average vanishes (norm {nrm:.3e})")
    psi = raw / nrm
    if H is None:
        H = qorbit.orbit.samples.hamiltonian
    energy = as_operator(H).expectation(psi)
    return RequantizedState(raw, nrm, psi, energy, qorbit.n)


def ergodic_project(H, psi0, E: float, T: float, hbar: float = 1.0, samples: int = 256) -> np.ndarray:
    """(1/T) oint dt exp(-i t (H - E)/hbar)|psi0> on a uniform grid of exact propagations."""
    H = as_operator(H)
    psi0 = as_state(psi0, H.dim)
    acc = np.zeros(H.dim, dtype=complex)
    for t in T * np.arange(samples) / samples:
        acc += np.exp(1j * E * t / hbar) * propagate(H, psi0, t, hbar)
    return acc / samples


def angular_project(J, psi, m: float, hbar: float = 1.0, samples: int = 64) -> np.ndarray:
    """(1/2pi) oint dphi exp(-i phi (J - m hbar)/hbar)|psi>.

    J/hbar - m must have integer spectrum so that the circle average is
    single valued; the grid is enlarged if it could alias two eigenvalues.
    """
    J = as_operator(J)
    psi = as_state(psi, J.dim)
    spec = J.spectrum
    shifted = spec.eigenvalues / hbar - m
    if np.max(np.abs(shifted - np.round(shifted))) > INTEGRALITY_TOL:
        raise SpectrumNotInteger("J/hbar - m has non-integer eigenvalues")
    k = np.round(shifted).astype(int)
    samples = max(samples, int(np.max(np.abs(k))) + 1)
    c = spec.eigenvectors.conj().T @ psi
    phis = 2 * np.pi * np.arange(samples) / samples
    weights = np.exp(-1j * np.outer(phis, k)).mean(axis=0)
    return spec.eigenvectors @ (weights * c)


def transition_amplitude(a: RequantizedState, op, b: RequantizedState) -> complex:
    """<a|Op|b> between normalized time-averaged states."""
    m = op.matrix if hasattr(op, "matrix") else np.asarray(op)
    return complex(np.vdot(a.normalized, m @ b.normalized))
