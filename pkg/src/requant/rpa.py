"""Small-amplitude vibrations around a variational minimum.

The constrained flow is linearized at a minimum x* of h_M:
``A dx' = K dx`` with ``A_ij = 2 omega_ji`` and K the Hessian of h_M.
Each conjugate pair of eigenvalues -/+ i w of ``A^{-1} K`` is a normal
mode; its amplitude is fixed by requiring the geometric phase of the
linear orbit to be 2 pi n, and the one-phonon state follows from the time
average over the (nonlinear) n = 1 orbit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import ComplexInstability, NegativePhaseDirection, NotConverged, SaddlePoint
from .flow import IntegratorOptions
from .hilbert import as_operator
from .manifold import (ManifoldChart, connection, hamilton_function, hamilton_gradient, hessian,
                       symplectic_form)
from .orbits import quantize_family
from .requantizer import RequantizedState, requantize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NormalMode:
    omega: float
    displacement: np.ndarray
    amplitude_scale: float
    eigen_residual: float = 0.0


@dataclass
class RpaSolution:
    mode: NormalMode
    B_dagger: np.ndarray | None
    excited_state: np.ndarray
    excitation_energy: float
    normalization: float
    tangent_state: np.ndarray
    tangent_overlap: float
    requantized: RequantizedState
    orbit_energy_shift: float
    linear_energy_error: float
    overlap_exact: float | None = None

    def to_json(self) -> dict:
        doc = {
            "omega": self.mode.omega,
            "excitation_energy": self.excitation_energy,
            "normalization": self.normalization,
            "amplitude_scale": self.mode.amplitude_scale,
            "tangent_overlap": self.tangent_overlap,
            "requantized_energy": self.requantized.energy,
            "requantized_norm": self.requantized.norm,
            "orbit_energy_shift": self.orbit_energy_shift,
            "linear_energy_error": self.linear_energy_error,
        }
        if self.overlap_exact is not None:
            doc["overlap_exact"] = self.overlap_exact
        return doc


def _newton_polish(chart, H, x, grad_tol, max_iter=30):
    f = hamilton_function(chart, H, x)
    for _ in range(max_iter):
        g = hamilton_gradient(chart, H, x)
        if np.linalg.norm(g) <= grad_tol:
            break
        K = hessian(chart, H, x)
        step = -np.linalg.lstsq(K, g, rcond=1e-10)[0]
        t = 1.0
        while t > 1e-6:
            xn = x + t * step
            fn = hamilton_function(chart, H, xn)
            if fn <= f + 1e-14 * (1 + abs(f)) or np.linalg.norm(hamilton_gradient(chart, H, xn)) < np.linalg.norm(g):
                break
            t *= 0.5
        x, f = xn, fn
    return x


def find_minimum(chart: ManifoldChart, H, x_init, grad_tol: float = 1e-10,
                 hess_tol: float = 1e-6, max_restarts: int = 6) -> np.ndarray:
    """Local minimum of h_M by BFGS followed by Newton polishing.

    Stationary points with a negative Hessian direction are escaped by
    restarting a short distance along that direction.
    """
    H = as_operator(H)
    x = np.asarray(x_init, dtype=float)
    for _ in range(max_restarts + 1):
        res = minimize(lambda y: hamilton_function(chart, H, y), x,
                       jac=lambda y: hamilton_gradient(chart, H, y), method="BFGS",
                       options={"gtol": max(grad_tol, 1e-9), "maxiter": 2000})
        x = _newton_polish(chart, H, res.x, grad_tol)
        g = np.linalg.norm(hamilton_gradient(chart, H, x))
        if g > grad_tol:
            raise NotConverged(f"gradient norm {g:.3e} above {grad_tol:.1e}")
        w, v = np.linalg.eigh(hessian(chart, H, x))
        if w[0] >= -hess_tol * max(1.0, np.max(np.abs(w))):
            return x
        logger.info("saddle point at %s (Hessian eigenvalue %.3e); restarting", x, w[0])
        x = x + 0.1 * v[:, 0]
    raise SaddlePoint("could not escape saddle points")


def stability_matrix(chart: ManifoldChart, H, x_star) -> np.ndarray:
    omega = symplectic_form(chart, x_star)
    return np.linalg.solve(2.0 * omega.T, hessian(chart, H, x_star))


def phase_form(chart: ManifoldChart, x_star, u: np.ndarray) -> float:
    """sum_ij omega_ij Im(u_i conj(u_j)); the linear orbit of amplitude a winds a^2 pi/hbar times this."""
    omega = symplectic_form(chart, x_star)
    return float(np.einsum("ij,ij->", omega, np.imag(np.outer(u, u.conj()))))


def linearize(chart: ManifoldChart, H, x_star, zero_tol: float = 1e-6,
              instability_tol: float = 1e-8) -> list[NormalMode]:
    """Normal modes at a minimum, sorted by ascending frequency."""
    H = as_operator(H)
    S = stability_matrix(chart, H, x_star)
    lam, vec = np.linalg.eig(S)
    scale = np.max(np.abs(lam.imag)) if lam.size else 0.0
    if np.max(np.abs(lam.real)) > instability_tol * max(scale, 1e-300) and np.max(np.abs(lam.real)) > 1e-12:
        raise ComplexInstability(f"stability eigenvalues have real parts up to {np.max(np.abs(lam.real)):.3e}")
    modes = []
    for k in np.argsort(lam.imag):
        w = -lam[k].imag
        if w <= zero_tol * scale:
            if abs(w) <= zero_tol * scale:
                logger.info("zero mode excluded (|w| = %.2e)", abs(w))
            continue
        u = vec[:, k]
        u = u / np.linalg.norm(u)
        big = np.argmax(np.abs(u))
        u = u * np.exp(-1j * np.angle(u[big]))
        resid = float(np.linalg.norm(S @ u + 1j * w * u))
        Q = phase_form(chart, x_star, u)
        a = np.sqrt(2 * chart.hbar / Q) if Q > 0 else float("nan")
        modes.append(NormalMode(float(w), u, float(a), resid))
    return sorted(modes, key=lambda m: m.omega)


def quantize_amplitude(mode: NormalMode, chart: ManifoldChart, x_star, n: int) -> float:
    """Scale a with x(t) = x* + a Re(u exp(-i w t)) winding Theta_T = 2 pi n."""
    if n == 0:
        raise ValueError("n = 0 is the minimum itself")
    Q = phase_form(chart, x_star, mode.displacement)
    if Q * n <= 0:
        raise NegativePhaseDirection(
            f"mode phase functional {Q:.3e} has the wrong sign for n = {n}; relabel the conjugate pair")
    return float(np.sqrt(2 * chart.hbar * n / Q))


def linear_orbit_phase(mode: NormalMode, chart: ManifoldChart, x_star, a: float,
                       samples: int = 512) -> float:
    """Theta_T accumulated along the linear orbit, by quadrature of the connection."""
    w = mode.omega
    t = 2 * np.pi / w * np.arange(samples) / samples
    total = 0.0
    for tk in t:
        e = mode.displacement * np.exp(-1j * w * tk)
        x = x_star + a * e.real
        xdot = a * (-1j * w * e).real
        total += -float(connection(chart, x).imag @ xdot)
    return total * (2 * np.pi / w) / samples


def tangent_pair(mode: NormalMode, chart: ManifoldChart, x_star, a: float):
    """(B^dagger|M>, -B|M>) from the chart tangents at the minimum."""
    psi, tan = chart.evaluate(x_star)
    theta = tan @ psi.conj()
    horiz = tan - np.outer(theta, psi)
    u = mode.displacement
    return 0.5 * a * (u @ horiz), 0.5 * a * (u.conj() @ horiz)


def ladder_operator(mode: NormalMode, chart: ManifoldChart, a: float):
    """B^dagger = sum_m X_m E_m - Y_m^* E_m^dagger for charts built on ladder operators."""
    ladders = getattr(chart, "ladder_operators", None)
    if ladders is None:
        return None
    u = mode.displacement
    B = np.zeros((chart.dim, chart.dim), dtype=complex)
    for m, E in enumerate(ladders):
        X = 0.5 * a * (u[2 * m] + 1j * u[2 * m + 1])
        Y = 0.5 * a * (np.conj(u[2 * m]) + 1j * np.conj(u[2 * m + 1]))
        B += X * E - np.conj(Y) * E.conj().T
    return B


def rpa_state(mode: NormalMode, chart: ManifoldChart, x_star, H, samples: int = 256,
              opts: IntegratorOptions | None = None, exact=None, period_window: float = 3.0) -> RpaSolution:
    """One-phonon state from the time average over the n = 1 orbit of a mode.

    The linear amplitude seeds a root search on the nonlinear flow along
    the direction Re(u), so the averaged orbit satisfies the phase rule
    exactly.  Orbits are searched up to ``period_window`` linear periods.
    ``exact``, if given, is a vector the result is compared with.
    """
    H = as_operator(H)
    x_star = np.asarray(x_star, dtype=float)
    a = quantize_amplitude(mode, chart, x_star, 1)
    direction = mode.displacement.real
    T = 2 * np.pi / mode.omega
    q, = quantize_family(chart, H, lambda s: x_star + s * direction, (0.5 * a, 1.5 * a), [1],
                         t_max=period_window * T, n_scan=5, opts=opts)
    req = requantize(q, samples, H)
    h0 = hamilton_function(chart, H, x_star)
    e_lin = hamilton_function(chart, H, x_star + a * direction) - h0
    hw = chart.hbar * mode.omega

    bdag_m, minus_b_m = tangent_pair(mode, chart, x_star, a)
    normalization = float(np.vdot(bdag_m, bdag_m).real - np.vdot(minus_b_m, minus_b_m).real)
    B = None
    at_origin = np.linalg.norm(x_star) <= 1e-12 and getattr(chart, "reference_state", None) is not None
    if at_origin:
        B = ladder_operator(mode, chart, a)
        M = chart.reference_state
        comm = B.conj().T @ B - B @ B.conj().T
        normalization = float(np.vdot(M, comm @ M).real)
    t_state = bdag_m / np.linalg.norm(bdag_m)
    overlap = float(abs(np.vdot(t_state, req.normalized)) ** 2)
    overlap_exact = None
    if exact is not None:
        overlap_exact = float(abs(np.vdot(exact, req.normalized)) ** 2)
    return RpaSolution(mode=mode, B_dagger=B, excited_state=req.normalized, excitation_energy=hw,
                       normalization=normalization, tangent_state=t_state, tangent_overlap=overlap,
                       requantized=req, orbit_energy_shift=q.orbit.energy - h0,
                       linear_energy_error=abs(e_lin - hw) / hw, overlap_exact=overlap_exact)
