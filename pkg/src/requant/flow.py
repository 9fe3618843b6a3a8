"""Constrained Hamiltonian flow on a chart, with geometric-phase bookkeeping.

The equations of motion are ``sum_j 2 xdot^j omega_ji = d_i h`` with
``omega_ij = hbar Im<d_i Z|d_j Z>``.  The geometric phase
``Theta_t = int <Z|i d_tau Z> dtau`` is carried as an extra ODE component so
that it is integrated to the same accuracy as the orbit itself.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import NonSymplecticPoint, StepSizeUnderflow
from .hilbert import as_operator
from .manifold import DEGENERACY_RATIO, ManifoldChart, symplectic_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegratorOptions:
    rtol: float = 1e-10
    atol: float = 1e-12
    method: str = "RK45"
    n_samples: int = 201
    max_condition: float = 1e12
    energy_tol: float = 1e-8
    store_states: bool = True


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    energies: np.ndarray
    theta: np.ndarray
    states: np.ndarray | None = None
    chart: ManifoldChart | None = field(default=None, repr=False)
    dense: object | None = field(default=None, repr=False)
    section_fn: object | None = field(default=None, repr=False)
    hamiltonian: object | None = field(default=None, repr=False)

    @property
    def energy(self) -> float:
        return float(self.energies[0])

    @property
    def max_energy_drift(self) -> float:
        return float(np.max(np.abs(self.energies - self.energies[0])))

    def at(self, t):
        """Interpolated (points, theta) at time(s) t from the dense integrator output."""
        if self.dense is None:
            raise ValueError("trajectory has no dense output")
        y = np.asarray(self.dense(t))
        return y[:-1].T if y.ndim == 2 else y[:-1], y[-1]

    def section(self, t):
        """(states, theta) at times t, from the dense output and the chart."""
        if self.section_fn is not None:
            return self.section_fn(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        points, theta = self.at(t)
        states = np.array([self.chart.embed(p) for p in points])
        return states, np.asarray(theta)

    def to_csv(self, path) -> None:
        n = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *[f"x_{i + 1}" for i in range(n)], "energy", "theta"])
            for t, x, e, th in zip(self.times, self.points, self.energies, self.theta):
                w.writerow([_f(t), *[_f(v) for v in x], _f(e), _f(th)])


def _f(v) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class LiftedState:
    base: np.ndarray
    dynamical_phase: float
    geometric_phase: float

    @property
    def state(self) -> np.ndarray:
        return np.exp(1j * (self.dynamical_phase + self.geometric_phase)) * self.base


def velocity(chart: ManifoldChart, H, x, max_condition: float = 1e12):
    """Return (xdot, dTheta/dt) at x."""
    psi, t = chart.evaluate(x)
    omega = symplectic_matrix(t, chart.hbar)
    A = 2.0 * omega.T
    sv = np.linalg.svd(A, compute_uv=False)
    cond = sv[0] / sv[-1] if sv[-1] > 0 else np.inf
    scale = 2.0 * chart.hbar * float(np.max(np.sum(np.abs(t) ** 2, axis=1)))
    if not np.isfinite(cond) or cond > max_condition or sv[-1] < DEGENERACY_RATIO * scale:
        raise NonSymplecticPoint(f"flow matrix condition number {cond:.3e} at x={np.asarray(x)}")
    grad = 2.0 * (t.conj() @ (H.matrix @ psi)).real
    xdot = np.linalg.solve(A, grad)
    theta_k = t @ psi.conj()
    return xdot, float(-(theta_k.imag @ xdot))


def integrate_flow(chart: ManifoldChart, H, x0, t_end: float,
                   opts: IntegratorOptions | None = None, t_eval=None) -> Trajectory:
    """Integrate the constrained flow from x0 over [0, t_end]."""
    opts = opts or IntegratorOptions()
    H = as_operator(H)
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    x0 = np.asarray(x0, dtype=float)
    velocity(chart, H, x0, opts.max_condition)

    def rhs(_t, y):
        xdot, thdot = velocity(chart, H, y[:-1], opts.max_condition)
        return np.append(xdot, thdot)

    sol = solve_ivp(rhs, (0.0, t_end), np.append(x0, 0.0), method=opts.method,
                    rtol=opts.rtol, atol=opts.atol, dense_output=True)
    if sol.status < 0:
        if "step size" in sol.message:
            raise StepSizeUnderflow(sol.message)
        raise RuntimeError(sol.message)
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, opts.n_samples)
    return sample_trajectory(chart, H, sol.sol, np.asarray(t_eval, dtype=float), opts)


def sample_trajectory(chart, H, dense, times, opts: IntegratorOptions) -> Trajectory:
    y = np.asarray(dense(times))
    points = y[:-1].T
    theta = y[-1].copy()
    theta[times == 0.0] = 0.0
    states = np.array([chart.embed(p) for p in points])
    energies = np.einsum("ki,ij,kj->k", states.conj(), H.matrix, states).real
    traj = Trajectory(times, points, energies, theta,
                      states if opts.store_states else None, chart, dense, hamiltonian=H)
    drift = traj.max_energy_drift
    if drift > opts.energy_tol * (1 + abs(energies[0])):
        logger.warning("energy drift %.3e exceeds tolerance", drift)
    return traj


def lift(traj: Trajectory, k: int, hbar: float | None = None) -> LiftedState:
    """The lifted state exp(-i E t/hbar + i Theta_t)|Z_t> at sample k."""
    if traj.states is None:
        raise ValueError("trajectory states were not stored")
    if hbar is None:
        hbar = traj.chart.hbar
    return LiftedState(traj.states[k], -traj.energy * traj.times[k] / hbar, float(traj.theta[k]))


def autoparallel_section(traj: Trajectory, k: int) -> np.ndarray:
    """exp(i Theta_k)|Z_k>, the horizontal (parallel-transported) section."""
    if traj.states is None:
        raise ValueError("trajectory states were not stored")
    return np.exp(1j * traj.theta[k]) * traj.states[k]
