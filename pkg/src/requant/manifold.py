"""Trial manifolds: charts from real parameters to normalized states.

A chart supplies ``_embed(x)`` and, optionally, ``_tangent(x)`` returning the
partial derivatives as rows of a ``(n_params, dim)`` array.  Everything
else (symplectic form, Hamilton function and gradient, connection) is built
from those two maps.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import NonSymplecticPoint
from .hilbert import HermitianOperator, as_operator

logger = logging.getLogger(__name__)

NORMALIZATION_WARN = 1e-10
DEGENERACY_RATIO = 1e-10


def fd_step(x: np.ndarray) -> np.ndarray:
    return 1e-6 * np.maximum(1.0, np.abs(x))


class ManifoldChart:
    """Base class for charts.

    Subclasses set ``n_params``, ``dim`` and ``hbar`` and implement
    ``_embed``; overriding ``_tangent`` provides analytic derivatives,
    otherwise central differences are used.
    """

    n_params: int
    dim: int
    hbar: float = 1.0
    domain: np.ndarray | None = None
    name: str = "chart"

    def _embed(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _tangent(self, x: np.ndarray) -> np.ndarray | None:
        return None

    @property
    def has_analytic_tangent(self) -> bool:
        return type(self)._tangent is not ManifoldChart._tangent

    def embed(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        psi = self._embed(x)
        n2 = np.vdot(psi, psi).real
        if abs(n2 - 1.0) > NORMALIZATION_WARN:
            logger.warning("%s delivered a state with norm defect %.2e; renormalizing",
                           self.name, abs(n2 - 1.0))
            psi = psi / np.sqrt(n2)
        return psi

    def tangent(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = self._tangent(x)
        if t is None:
            t = self.fd_tangent(x)
        return t

    def fd_tangent(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = fd_step(x)
        rows = []
        for i in range(self.n_params):
            e = np.zeros_like(x)
            e[i] = h[i]
            rows.append((self.embed(x + e) - self.embed(x - e)) / (2 * h[i]))
        return np.array(rows)

    def _evaluate(self, x):
        return None

    def evaluate(self, x):
        """State and tangents in one call."""
        x = np.asarray(x, dtype=float)
        both = self._evaluate(x)
        if both is not None:
            return both
        return self.embed(x), self.tangent(x)


class RephasedChart(ManifoldChart):
    """The same manifold with states multiplied by exp(i S(x))."""

    def __init__(self, chart: ManifoldChart, phase, phase_gradient):
        self.chart = chart
        self.phase = phase
        self.phase_gradient = phase_gradient
        self.n_params = chart.n_params
        self.dim = chart.dim
        self.hbar = chart.hbar
        self.domain = chart.domain
        self.name = f"rephased {chart.name}"

    def _embed(self, x):
        return np.exp(1j * self.phase(x)) * self.chart.embed(x)

    def _tangent(self, x):
        psi, t = self.chart.evaluate(x)
        g = np.asarray(self.phase_gradient(x), dtype=float)
        return np.exp(1j * self.phase(x)) * (t + 1j * g[:, None] * psi[None, :])


def symplectic_matrix(tangents: np.ndarray, hbar: float) -> np.ndarray:
    """omega_ij = hbar Im <d_i Z | d_j Z>."""
    g = tangents.conj() @ tangents.T
    w = hbar * g.imag
    return 0.5 * (w - w.T)


def check_symplectic(omega: np.ndarray, scale: float | None = None) -> None:
    """Raise if omega is singular relative to its own size or to ``scale``."""
    s = np.linalg.svd(omega, compute_uv=False)
    ref = s[0] if scale is None else max(s[0], scale)
    if s[0] == 0 or s[-1] < DEGENERACY_RATIO * ref:
        raise NonSymplecticPoint(
            f"symplectic form degenerate: singular values {s[-1]:.3e} / {s[0]:.3e}")


def symplectic_form(chart: ManifoldChart, x, *, check: bool = True) -> np.ndarray:
    """The pulled-back symplectic matrix at x (antisymmetric, action units)."""
    t = chart.tangent(x)
    omega = symplectic_matrix(t, chart.hbar)
    if check:
        # the tangent lengths set the scale a regular omega must reach
        check_symplectic(omega, chart.hbar * float(np.max(np.sum(np.abs(t) ** 2, axis=1))))
    return omega


def hamilton_function(chart: ManifoldChart, H, x) -> float:
    H = as_operator(H)
    return H.expectation(chart.embed(x))


def hamilton_gradient(chart: ManifoldChart, H, x) -> np.ndarray:
    """d_i <Z|H|Z> = 2 Re <d_i Z|H|Z>."""
    H = as_operator(H)
    psi, t = chart.evaluate(x)
    return 2.0 * (t.conj() @ (H.matrix @ psi)).real


def connection(chart: ManifoldChart, x) -> np.ndarray:
    """Components theta_k = <Z|d_k Z> (purely imaginary for normalized charts)."""
    psi, t = chart.evaluate(x)
    return t @ psi.conj()


def connection_curl(chart: ManifoldChart, x, h: float = 1e-4) -> np.ndarray:
    """-i hbar (d theta) by central differences, in the same index convention as omega_ij.

    The full-sum convention omega = sum_ij omega_ij dx^i ^ dx^j pairs with
    the antisymmetrized derivative (d_i theta_j - d_j theta_i) / 2.
    """
    x = np.asarray(x, dtype=float)
    n = chart.n_params
    d = np.zeros((n, n), dtype=complex)
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        d[i] = (connection(chart, x + e) - connection(chart, x - e)) / (2 * h)
    curl = 0.5 * (d - d.T)
    return (-1j * chart.hbar * curl).real


def fd_gradient(chart: ManifoldChart, H, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros(chart.n_params)
    for i in range(chart.n_params):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (hamilton_function(chart, H, x + e) - hamilton_function(chart, H, x - e)) / (2 * h)
    return g


def hessian(chart: ManifoldChart, H, x, h: float = 1e-5) -> np.ndarray:
    """Symmetrized central differences of the analytic gradient."""
    x = np.asarray(x, dtype=float)
    n = chart.n_params
    K = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        K[i] = (hamilton_gradient(chart, H, x + e) - hamilton_gradient(chart, H, x - e)) / (2 * h)
    return 0.5 * (K + K.T)


def projective_distance(a: np.ndarray, b: np.ndarray) -> float:
    """sqrt(1 - |<a|b>|^2) for normalized a, b."""
    ov = abs(np.vdot(a, b))
    return float(np.sqrt(max(0.0, 1.0 - ov * ov)))


__all__ = [
    "ManifoldChart", "RephasedChart", "HermitianOperator", "symplectic_form", "symplectic_matrix",
    "check_symplectic", "hamilton_function", "hamilton_gradient", "connection", "connection_curl",
    "fd_gradient", "hessian", "projective_distance",
]
