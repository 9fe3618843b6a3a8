"""Cranked minimization and action-angle charts.

``solve_targets`` tunes Lagrange multipliers so that the minimizer of
H - sum_k lambda_k J_k carries prescribed actions <J_k> = I_k.  A grid of
such solutions is then turned into a chart with coordinates (phi, I):

    |Z(phi, I)> = exp(-i sum_k phi_k J_k / hbar) |Z(0, I)>.

The leaf |Z(0, I)> interpolates the solved states with a cubic spline in an
auxiliary parameter s and is pinned to <J>(s) = I by Newton iteration, which
makes the pulled-back symplectic form exactly canonical.
"""

from __future__ import annotations

import csv
import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize, minimize_scalar

from .errors import DimensionMismatch, NonCommutingGenerators, NotConverged, TargetUnreachable
from .hilbert import HermitianOperator, as_operator
from .manifold import ManifoldChart, hamilton_function, hamilton_gradient
from .rpa import find_minimum

logger = logging.getLogger(__name__)

COMMUTATOR_TOL = 1e-10


def _check_commuting(generators):
    for a, b in itertools.combinations(generators, 2):
        c = a.commutator_norm(b)
        if c > COMMUTATOR_TOL:
            raise NonCommutingGenerators(f"generators fail to commute (norm {c:.3e})")


@dataclass
class ConstraintSpec:
    generators: list
    targets: list
    multipliers: list

    def __post_init__(self):
        self.generators = [as_operator(J) for J in self.generators]
        self.targets = [float(v) for v in self.targets]
        self.multipliers = [float(v) for v in self.multipliers]
        if not len(self.generators) == len(self.targets) == len(self.multipliers):
            raise DimensionMismatch("generators, targets and multipliers differ in length")
        _check_commuting(self.generators)

    def modified(self, H) -> HermitianOperator:
        H = as_operator(H)
        m = H.matrix.copy()
        for lam, J in zip(self.multipliers, self.generators):
            m = m - lam * J.matrix
        return HermitianOperator(m)


@dataclass
class CrankedSolution:
    x_g: np.ndarray
    lambda_: np.ndarray
    achieved: np.ndarray
    targets: np.ndarray
    energy: float
    sweeps: int = 1
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "x_g": [float(v) for v in self.x_g],
            "lambda": [float(v) for v in self.lambda_],
            "achieved": [float(v) for v in self.achieved],
            "targets": [float(v) for v in self.targets],
            "energy": self.energy,
            "constraint_residual": float(np.max(np.abs(self.achieved - self.targets))),
            **self.extra,
        }


def minimize_modified(chart: ManifoldChart, H, cons: ConstraintSpec, x_init) -> np.ndarray:
    """Minimizer of <Z|H - sum lambda_k J_k|Z> with the multipliers held fixed."""
    return find_minimum(chart, cons.modified(H), x_init)


def expectations(chart, generators, x) -> np.ndarray:
    psi = chart.embed(x)
    return np.array([J.expectation(psi) for J in generators])


def multiplier_residual(chart, H, sol: CrankedSolution, generators) -> float:
    """|grad h - sum lambda_k grad <J_k>| at a cranked solution."""
    g = hamilton_gradient(chart, H, sol.x_g)
    for lam, J in zip(sol.lambda_, generators):
        g = g - lam * hamilton_gradient(chart, J, sol.x_g)
    return float(np.linalg.norm(g))


def solve_targets(chart: ManifoldChart, H, generators, targets, lambda_init=None, x_init=None,
                  constraint_tol: float = 1e-8, max_sweeps: int = 50) -> CrankedSolution:
    """Multipliers with <J_k>(x_g(lambda)) = I_k, one bracketed root solve per component.

    Components are cycled until every constraint holds; with one generator
    a single sweep suffices.  Each minimization starts from ``x_init`` so
    the result does not depend on the order of evaluations.
    """
    H = as_operator(H)
    generators = [as_operator(J) for J in generators]
    _check_commuting(generators)
    targets = np.asarray(targets, dtype=float)
    N = len(generators)
    if targets.shape != (N,):
        raise DimensionMismatch("one target per generator expected")
    for J, I in zip(generators, targets):
        ev = J.spectrum.eigenvalues
        if not ev[0] < I < ev[-1]:
            raise TargetUnreachable(f"target {I} outside the open spectral range [{ev[0]}, {ev[-1]}]")
    lam = np.zeros(N) if lambda_init is None else np.asarray(lambda_init, dtype=float).copy()
    x0 = np.zeros(chart.n_params) if x_init is None else np.asarray(x_init, dtype=float)
    h_span = np.ptp(H.spectrum.eigenvalues) or 1.0

    def solve(lv):
        cons = ConstraintSpec(generators, targets, lv)
        x = minimize_modified(chart, H, cons, x0)
        return x, expectations(chart, generators, x)

    x, J_now = solve(lam)
    sweeps = 0
    while np.max(np.abs(J_now - targets)) > constraint_tol:
        if sweeps >= max_sweeps:
            raise NotConverged(f"constraints unmet after {max_sweeps} sweeps")
        sweeps += 1
        for k in range(N):
            def f(v, k=k):
                lv = lam.copy()
                lv[k] = v
                return solve(lv)[1][k] - targets[k]

            a, fa = lam[k], J_now[k] - targets[k]
            if abs(fa) <= constraint_tol:
                continue
            step = 0.1 * h_span / np.ptp(generators[k].spectrum.eigenvalues)
            direction = 1.0 if fa < 0 else -1.0
            stall = 0
            for _ in range(80):
                b = a + direction * step
                fb = f(b)
                if np.sign(fb) != np.sign(fa):
                    break
                stall = stall + 1 if abs(fb - fa) <= 1e-12 * (1 + abs(fa)) else 0
                if stall >= 3:
                    raise TargetUnreachable(f"<J_{k}> saturates at {fb + targets[k]:.12g}")
                a, fa = b, fb
                step *= 2
            else:
                raise TargetUnreachable(f"no multiplier bracket for target {targets[k]}")
            lo, hi = sorted((a, b))
            lam[k] = brentq(f, lo, hi, xtol=1e-15 * max(1.0, abs(hi)), rtol=4 * np.finfo(float).eps)
            x, J_now = solve(lam)
        if N == 1 and np.max(np.abs(J_now - targets)) > constraint_tol:
            raise NotConverged(f"constraint residual {np.max(np.abs(J_now - targets)):.3e}")
    return CrankedSolution(x, lam, J_now, targets, hamilton_function(chart, H, x), max(sweeps, 1))


def solve_family(chart, H, generators, target_list, x_init=None, threads: int = 1,
                 constraint_tol: float = 1e-8) -> list[CrankedSolution]:
    def one(t):
        return solve_targets(chart, H, generators, np.atleast_1d(t), x_init=x_init,
                             constraint_tol=constraint_tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(one, target_list))
    return [one(t) for t in target_list]


def write_cranking_csv(solutions, path) -> None:
    N = len(solutions[0].targets)

    def names(base):
        return [base] if N == 1 else [f"{base}_{k + 1}" for k in range(N)]

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names("I_target") + names("lambda") + ["energy"] + names("achieved"))
        for s in solutions:
            row = [*s.targets, *s.lambda_, s.energy, *s.achieved]
            w.writerow([format(float(v), ".17g") for v in row])


class _Torus:
    """exp(-i sum phi_k J_k / hbar) in a joint eigenbasis of commuting generators."""

    def __init__(self, generators, hbar):
        weights = [1.0] + [np.sqrt(p) - 1 for p in (2, 3, 5, 7, 11)][: len(generators) - 1]
        mix = sum(w * J.matrix for w, J in zip(weights, generators))
        _, V = np.linalg.eigh(mix)
        self.V = V
        self.mu = np.array([np.diag(V.conj().T @ J.matrix @ V).real for J in generators]) / hbar

    def apply(self, phi, psi):
        phase = np.exp(-1j * (np.asarray(phi) @ self.mu))
        return self.V @ (phase * (self.V.conj().T @ psi))

    def best_angle(self, ref, cur):
        a = self.V.conj().T @ ref
        c = self.V.conj().T @ cur
        w = a.conj() * c

        def neg(phi):
            return -abs(np.sum(w * np.exp(-1j * (np.atleast_1d(phi) @ self.mu))))

        n = self.mu.shape[0]
        if n == 1:
            grid = np.linspace(0, 2 * np.pi, 513)[:-1]
            vals = [neg(p) for p in grid]
            p0 = grid[int(np.argmin(vals))]
            res = minimize_scalar(neg, bounds=(p0 - 0.02, p0 + 0.02), method="bounded",
                                  options={"xatol": 1e-12})
            return np.array([res.x])
        grid = np.linspace(0, 2 * np.pi, 25)[:-1]
        best = min(itertools.product(grid, repeat=n), key=lambda p: neg(np.array(p)))
        return minimize(neg, np.array(best), method="Nelder-Mead",
                        options={"xatol": 1e-12, "fatol": 1e-15}).x


class ActionAngleChart(ManifoldChart):
    """Coordinates (phi_1..phi_N, I_1..I_N) on a cranked family."""

    name = "action-angle"

    def __init__(self, chart: ManifoldChart, solved, generators):
        self.generators = [as_operator(J) for J in generators]
        N = len(self.generators)
        self.N = N
        self.hbar = chart.hbar
        self.dim = chart.dim
        self.n_params = 2 * N
        pts = np.array([s.targets for s in solved], dtype=float)
        self.axes = [np.unique(pts[:, k]) for k in range(N)]
        shape = tuple(len(a) for a in self.axes)
        if int(np.prod(shape)) != len(solved) or min(shape) < 2:
            raise ValueError("solved targets must form a full grid with at least two nodes per axis")
        self.torus = _Torus(self.generators, self.hbar)

        by_index = {}
        for s in solved:
            idx = tuple(int(np.searchsorted(self.axes[k], s.targets[k])) for k in range(N))
            by_index[idx] = chart.embed(s.x_g)
        values = np.zeros(shape + (self.dim,), dtype=complex)
        for idx in np.ndindex(*shape):
            psi = by_index[idx]
            ref_idx = next(((*idx[:k], idx[k] - 1, *idx[k + 1:]) for k in reversed(range(N)) if idx[k] > 0),
                           None)
            if ref_idx is not None:
                ref = values[ref_idx]
                psi = self.torus.apply(self.torus.best_angle(ref, psi), psi)
                psi = psi * np.exp(-1j * np.angle(np.vdot(ref, psi)))
            values[idx] = psi
        self.values = values
        self._spline = CubicSpline(self.axes[0], values, axis=0) if N == 1 else None
        lo = [a[0] for a in self.axes]
        hi = [a[-1] for a in self.axes]
        self.domain = np.array([[0.0, 2 * np.pi]] * N + list(zip(lo, hi)))
        self._cache: dict[bytes, tuple] = {}

    def _amplitude(self, s, orders):
        if self._spline is not None:
            return self._spline(s[0], nu=orders[0])
        vals = self.values
        for k in range(self.N):
            vals = CubicSpline(self.axes[k], vals, axis=0)(s[k], nu=orders[k])
        return vals

    def _leaf_s(self, s):
        u = self._amplitude(s, [0] * self.N)
        du = np.array([self._amplitude(s, [int(l == k) for l in range(self.N)]) for k in range(self.N)])
        nrm = np.linalg.norm(u)
        z = u / nrm
        dz = du / nrm - np.outer((du @ u.conj()).real, u) / nrm ** 3
        return z, dz

    def leaf(self, I):
        """|Z(0, I)> and its I-derivatives (rows)."""
        I = np.atleast_1d(np.asarray(I, dtype=float))
        key = I.tobytes()
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        s = I.copy()
        tol = 1e-14 * (1.0 + np.max(np.abs(I)))
        for _ in range(60):
            z, dz = self._leaf_s(s)
            r = np.array([J.expectation(z) for J in self.generators]) - I
            M = np.array([[2 * np.vdot(z, J.matrix @ dz[l]).real for l in range(self.N)]
                          for J in self.generators])
            step = np.linalg.solve(M, r)
            s = s - step
            if np.max(np.abs(r)) <= tol or np.max(np.abs(step)) <= 1e-15 * (1 + np.max(np.abs(s))):
                break
        z, dz = self._leaf_s(s)
        M = np.array([[2 * np.vdot(z, J.matrix @ dz[l]).real for l in range(self.N)]
                      for J in self.generators])
        dzdI = np.linalg.inv(M).T @ dz
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[key] = (z, dzdI)
        return z, dzdI

    def _split(self, x):
        return x[: self.N], x[self.N:]

    def _embed(self, x):
        phi, I = self._split(x)
        return self.torus.apply(phi, self.leaf(I)[0])

    def _evaluate(self, x):
        phi, I = self._split(x)
        z, dz = self.leaf(I)
        psi = self.torus.apply(phi, z)
        rows = [-1j / self.hbar * (J.matrix @ psi) for J in self.generators]
        rows += [self.torus.apply(phi, d) for d in dz]
        return psi, np.array(rows)

    def _tangent(self, x):
        return self._evaluate(x)[1]

    def frequencies(self, H, I) -> np.ndarray:
        """dh/dI_k, the angular velocities of the phi-flow."""
        x = np.concatenate([np.zeros(self.N), np.atleast_1d(I)])
        return hamilton_gradient(self, H, x)[self.N:]


def build_action_angle_chart(chart: ManifoldChart, solved, generators) -> ActionAngleChart:
    return ActionAngleChart(chart, solved, generators)
