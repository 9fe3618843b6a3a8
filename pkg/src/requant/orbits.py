"""Closed-orbit detection and the phase-integrality quantization rule."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq, minimize_scalar

from .errors import BracketNotFound, NoClosureFound, NotACylinderOrbit, StepSizeUnderflow
from .flow import IntegratorOptions, Trajectory, sample_trajectory, velocity
from .hilbert import as_operator, propagate
from .manifold import ManifoldChart

logger = logging.getLogger(__name__)

TWO_PI = 2 * np.pi


@dataclass
class ClosedOrbit:
    period: float
    samples: Trajectory
    energy: float
    total_phase: float
    closure_defect: float

    @property
    def initial_point(self) -> np.ndarray:
        return self.samples.points[0]

    @property
    def winding(self) -> float:
        return self.total_phase / TWO_PI


@dataclass
class QuantizedOrbit:
    orbit: ClosedOrbit
    n: int
    residual: float
    parameter: float | None = None

    def to_json(self) -> dict:
        o = self.orbit
        return {
            "n": int(self.n),
            "period": o.period,
            "energy": o.energy,
            "total_phase": o.total_phase,
            "residual": self.residual,
            "initial_point": [float(v) for v in o.initial_point],
        }


def is_fixed_point(chart, H, x0, t_scale: float, opts: IntegratorOptions) -> bool:
    xdot, _ = velocity(chart, H, x0, opts.max_condition)
    return float(np.linalg.norm(xdot)) * t_scale <= 1e-10 * (1.0 + float(np.linalg.norm(x0)))


def _solve(chart, H, x0, t_max, opts):
    def rhs(_t, y):
        xdot, thdot = velocity(chart, H, y[:-1], opts.max_condition)
        return np.append(xdot, thdot)

    sol = solve_ivp(rhs, (0.0, t_max), np.append(x0, 0.0), method=opts.method,
                    rtol=opts.rtol, atol=opts.atol, dense_output=True)
    if sol.status < 0:
        if "step size" in sol.message:
            raise StepSizeUnderflow(sol.message)
        raise RuntimeError(sol.message)
    return sol


def detect_closed_orbit(chart: ManifoldChart, H, x0, t_max: float, closure_tol: float = 1e-6,
                        opts: IntegratorOptions | None = None, n_samples: int = 257) -> ClosedOrbit:
    """First return of the ray [Z_x(t)] to [Z_x0] within t_max.

    Closure is measured by the projective distance sqrt(1 - |<Z_0|Z_t>|^2).
    Candidate returns are the local minima of that distance after the orbit
    has left its starting point; each is refined to a stationary point of
    the overlap before being compared with ``closure_tol``.
    """
    opts = opts or IntegratorOptions()
    H = as_operator(H)
    x0 = np.asarray(x0, dtype=float)
    if is_fixed_point(chart, H, x0, t_max, opts):
        raise NoClosureFound("initial point is a fixed point of the flow")

    sol = _solve(chart, H, x0, t_max, opts)
    dense = sol.sol
    z0 = chart.embed(x0)

    def overlap(t):
        y = dense(t)
        return np.vdot(z0, chart.embed(y[:-1]))

    def distance(t):
        ov = abs(overlap(t))
        return np.sqrt(max(0.0, 1.0 - ov * ov))

    def overlap_rate(t):
        y = dense(t)
        psi, tan = chart.evaluate(y[:-1])
        xdot, _ = velocity(chart, H, y[:-1], opts.max_condition)
        ov = np.vdot(z0, psi)
        return 2.0 * (np.conj(ov) * np.vdot(z0, xdot @ tan)).real

    ts = np.unique(np.concatenate([np.linspace(0.0, t_max, 2001), sol.t,
                                   0.5 * (sol.t[1:] + sol.t[:-1])]))
    d = np.array([distance(t) for t in ts])
    d_max = d.max()
    if d_max <= closure_tol:
        raise NoClosureFound("orbit never leaves the closure neighbourhood of its start")
    left = np.nonzero(d > 0.1 * d_max)[0]
    start = left[0]

    def refine(i):
        a, b = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]
        fa, fb = overlap_rate(a), overlap_rate(b)
        if fa > 0 and fb < 0:
            return brentq(overlap_rate, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        res = minimize_scalar(distance, bounds=(a, b), method="bounded",
                              options={"xatol": 1e-13})
        return res.x

    for i in range(start + 1, len(ts) - 1):
        if not (d[i] <= d[i - 1] and d[i] <= d[i + 1]):
            continue
        if d[i] > max(1e3 * closure_tol, 0.05 * d_max):
            continue
        t_star = refine(i)
        if distance(t_star) > closure_tol:
            continue
        if t_star < 0.01 * t_max:
            if distance(2 * t_star) > closure_tol or distance(3 * t_star) > closure_tol:
                continue
        return _package(chart, H, dense, t_star, distance(t_star), opts, n_samples)
    # a return exactly at t_max
    if d[-1] <= closure_tol and d[-2] > d[-1]:
        return _package(chart, H, dense, t_max, d[-1], opts, n_samples)
    raise NoClosureFound(f"no return within t_max = {t_max}")


def _package(chart, H, dense, T, defect, opts, n_samples) -> ClosedOrbit:
    traj = sample_trajectory(chart, H, dense, np.linspace(0.0, T, n_samples), opts)
    theta_T = float(dense(T)[-1])
    traj.theta[-1] = theta_T
    return ClosedOrbit(period=float(T), samples=traj, energy=traj.energy,
                       total_phase=theta_T, closure_defect=float(defect))


def stationary_orbit(chart, H, x0, period: float, n_samples: int = 257) -> ClosedOrbit:
    """Zero-length orbit at a fixed point, assigned the limiting period of its family."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.append(x0, 0.0)

    def dense(t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return y0.copy()
        return np.repeat(y0[:, None], t.size, axis=1)

    traj = sample_trajectory(chart, as_operator(H), dense, np.linspace(0.0, period, n_samples),
                             IntegratorOptions())
    return ClosedOrbit(period=float(period), samples=traj, energy=traj.energy,
                       total_phase=0.0, closure_defect=0.0)


def quantize_family(chart: ManifoldChart, H, family, s_range, n_targets, t_max: float,
                    closure_tol: float = 1e-6, quantization_tol: float = 1e-8,
                    n_scan: int = 9, threads: int = 1,
                    opts: IntegratorOptions | None = None, n_samples: int = 257):
    """Select family members whose orbits accumulate Theta_T = 2 pi n.

    ``family`` maps a scalar s in ``s_range`` to an initial chart point.
    Members sitting on a fixed point count as zero-phase limits, so the
    n = 0 target lands on the family's stationary member.
    """
    opts = opts or IntegratorOptions()
    H = as_operator(H)
    s_min, s_max = map(float, s_range)
    if not s_max > s_min:
        raise ValueError("empty family range")
    cache: dict[float, ClosedOrbit | None] = {}

    def member(s):
        s = float(s)
        if s not in cache:
            x0 = np.asarray(family(s), dtype=float)
            if is_fixed_point(chart, H, x0, t_max, opts):
                cache[s] = None
            else:
                cache[s] = detect_closed_orbit(chart, H, x0, t_max, closure_tol, opts, n_samples)
        return cache[s]

    def winding(s):
        o = member(s)
        return 0.0 if o is None else o.winding

    grid = np.linspace(s_min, s_max, n_scan)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            values = list(pool.map(winding, grid))
    else:
        values = [winding(s) for s in grid]
    values = np.array(values)

    def limiting_period(s):
        live = [(abs(k - s), o.period) for k, o in cache.items() if o is not None]
        if not live:
            raise NoClosureFound("family has no non-degenerate member to set the period")
        return min(live)[1]

    results = []
    for n in n_targets:
        g = values - n
        hits = np.nonzero(g == 0)[0]
        if hits.size:
            s_star = grid[hits[0]]
        else:
            cross = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
            if cross.size == 0:
                raise BracketNotFound(f"target n = {n} outside winding range "
                                      f"[{values.min():.6g}, {values.max():.6g}]")
            i = cross[0]
            s_star = brentq(lambda s: winding(s) - n, grid[i], grid[i + 1],
                            xtol=1e-14 * max(1.0, abs(grid[i + 1])), rtol=4 * np.finfo(float).eps)
        orbit = member(s_star)
        if orbit is None:
            orbit = stationary_orbit(chart, H, family(s_star), limiting_period(s_star), n_samples)
        residual = abs(orbit.winding - n)
        if residual > quantization_tol:
            logger.warning("quantized orbit n=%d has residual %.3e", n, residual)
        results.append(QuantizedOrbit(orbit, int(n), float(residual), float(s_star)))
    return results


def quasienergy(orbit: ClosedOrbit, H, hbar: float = 1.0, tol: float = 1e-8) -> float:
    """Floquet phase of the exact evolution over one period, in the first zone."""
    H = as_operator(H)
    z0 = orbit.samples.states[0]
    T = orbit.period
    zT = propagate(H, z0, T, hbar)
    ov = np.vdot(z0, zT)
    # the orthogonal remainder avoids the sqrt(1 - |ov|^2) rounding floor near 1e-8
    defect = float(np.linalg.norm(zT - ov * z0))
    if defect > tol:
        raise NotACylinderOrbit(f"monodromy is not a pure phase (defect {defect:.3e})")
    hw = hbar * TWO_PI / T
    eps = -hbar * np.angle(ov) / T
    return float((eps + hw / 2) % hw - hw / 2)


def cylinder_quantization(orbit: ClosedOrbit, H, hbar: float = 1.0) -> QuantizedOrbit:
    """Nearest n in E = n hbar omega + epsilon, with the fractional mismatch as residual."""
    eps = quasienergy(orbit, H, hbar)
    hw = hbar * TWO_PI / orbit.period
    x = (orbit.energy - eps) / hw
    n = int(np.round(x))
    return QuantizedOrbit(orbit, n, float(abs(x - n)))
