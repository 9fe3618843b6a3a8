"""Built-in physical systems and their charts.

* truncated harmonic oscillator with the Glauber coherent-state chart;
* SU(2) spin models (Lipkin-type two-body Hamiltonian, a J_z^2 rotor) with
  the spin coherent-state chart in exponential coordinates around |j,-j>;
* commensurate-spectrum "cylinder" systems, whose exact orbits live on the
  full projective space, charted around a basis vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import comb

import numpy as np
from scipy.linalg import expm
from scipy.stats import poisson

from .errors import IncommensurateSpectrum, NoClosureFound, TruncationInsufficient
from .hilbert import HermitianOperator, as_state, normalize, propagate
from .manifold import ManifoldChart

TAIL_TOL = 1e-12


# ---------------------------------------------------------------------------
# oscillator

@dataclass(frozen=True)
class OscillatorModel:
    omega: float = 1.0
    mass: float = 1.0
    truncation: int = 40
    hbar: float = 1.0

    def __post_init__(self):
        if self.omega <= 0 or self.mass <= 0 or self.truncation < 2:
            raise ValueError("oscillator needs omega > 0, mass > 0, truncation >= 2")

    @cached_property
    def annihilation(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.truncation)), 1).astype(complex)

    @cached_property
    def creation(self) -> np.ndarray:
        return self.annihilation.conj().T

    @cached_property
    def H(self) -> HermitianOperator:
        n = np.arange(self.truncation)
        return HermitianOperator(np.diag(self.hbar * self.omega * (n + 0.5)))

    @cached_property
    def x_op(self) -> HermitianOperator:
        s = np.sqrt(self.hbar / (2 * self.mass * self.omega))
        return HermitianOperator(s * (self.annihilation + self.creation))

    @cached_property
    def p_op(self) -> HermitianOperator:
        s = np.sqrt(self.hbar * self.mass * self.omega / 2)
        return HermitianOperator(1j * s * (self.creation - self.annihilation))

    def fock(self, n: int) -> np.ndarray:
        e = np.zeros(self.truncation, dtype=complex)
        e[n] = 1.0
        return e


class GlauberChart(ManifoldChart):
    """|Z> = exp(z b^dagger - z* b)|0> with coordinates (Re z, Im z)."""

    name = "glauber"

    def __init__(self, model: OscillatorModel, z_max: float = 3.0):
        self.model = model
        self.n_params = 2
        self.dim = model.truncation
        self.hbar = model.hbar
        self.z_max = z_max
        self.domain = np.array([[-z_max, z_max], [-z_max, z_max]])
        tail = poisson.sf(self.dim - 1, z_max ** 2)
        if tail > TAIL_TOL:
            raise TruncationInsufficient(
                f"truncation {self.dim} leaves tail weight {tail:.2e} at |z| = {z_max}")
        self._sqrt_n = np.sqrt(np.arange(self.dim))

    @property
    def ladder_operators(self):
        return [self.model.creation]

    @property
    def reference_state(self):
        return self.model.fock(0)

    def _raw(self, x):
        z = complex(x[0], x[1])
        c = np.empty(self.dim, dtype=complex)
        c[0] = np.exp(-0.5 * abs(z) ** 2)
        c[1:] = c[0] * np.cumprod(z / self._sqrt_n[1:])
        n2 = np.vdot(c, c).real
        if 1.0 - n2 > TAIL_TOL:
            raise TruncationInsufficient(f"tail weight {1.0 - n2:.2e} at z = {z}")
        return c, n2

    def _embed(self, x):
        c, n2 = self._raw(x)
        return c / np.sqrt(n2)

    def _tangent(self, x):
        return self._evaluate(x)[1]

    def _evaluate(self, x):
        c, n2 = self._raw(x)
        shifted = np.zeros_like(c)
        shifted[1:] = self._sqrt_n[1:] * c[:-1]          # b^dagger c, truncated
        d = np.array([-x[0] * c + shifted, -x[1] * c + 1j * shifted])
        nrm = np.sqrt(n2)
        # derivative of c / |c|
        return c / nrm, d / nrm - np.outer((c.conj() @ d.T).real, c) / nrm ** 3

    def coordinates(self, z: complex) -> np.ndarray:
        return np.array([z.real, z.imag])


def glauber_chart(model: OscillatorModel, z_max: float = 3.0) -> GlauberChart:
    return GlauberChart(model, z_max)


# ---------------------------------------------------------------------------
# spin systems

def spin_operators(j: float, hbar: float = 1.0):
    """(J_z, J_+, J_-) in the basis |j,m>, m = -j, ..., j."""
    d = int(round(2 * j)) + 1
    if abs(d - 1 - 2 * j) > 1e-12 or j < 0:
        raise ValueError("j must be a nonnegative half-integer")
    m = -j + np.arange(d)
    jz = np.diag(m).astype(complex) * hbar
    jp = np.zeros((d, d), dtype=complex)
    for k in range(d - 1):
        jp[k + 1, k] = hbar * np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return jz, jp, jp.conj().T


def _q(r):
    """(r cos r - sin r) / r^3, with its Taylor series near 0."""
    r = np.asarray(r, dtype=float)
    small = np.abs(r) < 1e-2
    rs = np.where(small, 1.0, r)
    exact = (rs * np.cos(rs) - np.sin(rs)) / rs ** 3
    r2 = r * r
    series = -1.0 / 3.0 + r2 / 30.0 - r2 * r2 / 840.0
    return np.where(small, series, exact)


def _sinc(r):
    return np.sinc(r / np.pi)


class SpinCoherentChart(ManifoldChart):
    """|Z> = U0 exp(zeta J_+/hbar - zeta* J_-/hbar)|j,-j>, coordinates (Re zeta, Im zeta).

    With zeta = (theta/2) exp(-i phi) the state is the spin coherent state
    tilted by theta from the south pole; the chart degenerates at the
    antipode |zeta| = pi/2.
    """

    name = "spin-coherent"

    def __init__(self, j: float, hbar: float = 1.0, base: np.ndarray | None = None):
        self.j = j
        self.hbar = hbar
        self.dim = int(round(2 * j)) + 1
        self.n_params = 2
        self.domain = np.array([[-np.pi / 2, np.pi / 2], [-np.pi / 2, np.pi / 2]])
        self.base = None if base is None else np.asarray(base, dtype=complex)
        k = np.arange(self.dim)
        self._k = k
        self._a = (self.dim - 1) - k
        self._binom = np.sqrt([comb(self.dim - 1, int(i)) for i in k])
        self._ops = spin_operators(j, hbar)

    @property
    def ladder_operators(self):
        jp = self._ops[1] / self.hbar
        if self.base is None:
            return [jp]
        return [self.base @ jp @ self.base.conj().T]

    @property
    def reference_state(self):
        e = np.zeros(self.dim, dtype=complex)
        e[0] = 1.0
        return e if self.base is None else self.base @ e

    def _parts(self, x):
        zeta = complex(x[0], x[1])
        r = abs(zeta)
        c, s = np.cos(r), _sinc(r)
        zk = zeta ** self._k
        G = c ** self._a * s ** self._k
        return zeta, r, c, s, zk, G

    def _embed(self, x):
        *_, zk, G = self._parts(x)
        psi = self._binom * G * zk
        return psi if self.base is None else self.base @ psi

    def _tangent(self, x):
        zeta, r, c, s, zk, G = self._parts(x)
        a, k = self._a, self._k
        cos_am1 = np.where(a > 0, c ** np.maximum(a - 1, 0), 0.0)
        s_km1 = np.where(k > 0, s ** np.maximum(k - 1, 0), 0.0)
        # dG/d(r^2)
        Gp = 0.5 * (-a * cos_am1 * s ** (k + 1) + k * c ** a * s_km1 * _q(r))
        zkm1 = np.where(k > 0, zeta ** np.maximum(k - 1, 0), 0.0)
        d_zeta = self._binom * (Gp * np.conj(zeta) * zk + G * k * zkm1)
        d_zetabar = self._binom * Gp * zk * zeta
        t = np.array([d_zeta + d_zetabar, 1j * (d_zeta - d_zetabar)])
        return t if self.base is None else t @ self.base.T

    def coordinates(self, theta: float, phi: float = 0.0) -> np.ndarray:
        zeta = 0.5 * theta * np.exp(-1j * phi)
        return np.array([zeta.real, zeta.imag])

    def rotation(self, x) -> np.ndarray:
        """The unitary exp(zeta J_+/hbar - h.c.) as a matrix."""
        zeta = complex(x[0], x[1])
        _, jp, jm = self._ops
        return expm((zeta * jp - np.conj(zeta) * jm) / self.hbar)

    def recentered(self, x) -> "SpinCoherentChart":
        """Chart of the same manifold whose origin is the state at x."""
        u = self.rotation(x)
        base = u if self.base is None else self.base @ u
        return SpinCoherentChart(self.j, self.hbar, base)


@dataclass(frozen=True)
class LipkinModel:
    """H = epsilon J_z/hbar + (V/2)(J_+^2 + J_-^2)/hbar^2 on a spin-j multiplet."""

    j: float = 10.0
    epsilon: float = 1.0
    V: float = 0.01
    hbar: float = 1.0

    @cached_property
    def operators(self):
        return spin_operators(self.j, self.hbar)

    @cached_property
    def H(self) -> HermitianOperator:
        jz, jp, jm = self.operators
        h = self.hbar
        return HermitianOperator(self.epsilon * jz / h + 0.5 * self.V * (jp @ jp + jm @ jm) / h ** 2)

    @cached_property
    def parity(self) -> np.ndarray:
        m_plus_j = np.arange(int(round(2 * self.j)) + 1)
        return np.diag(np.exp(1j * np.pi * m_plus_j))

    @property
    def critical_coupling(self) -> float:
        return self.epsilon / (2 * self.j - 1) if self.j > 0.5 else np.inf

    @property
    def dim(self) -> int:
        return int(round(2 * self.j)) + 1


@dataclass(frozen=True)
class RotorModel:
    """H = epsilon (J_z/hbar)^2: a symmetric rotor whose cranking generator is J_z."""

    j: float = 3.0
    epsilon: float = 1.0
    hbar: float = 1.0

    @cached_property
    def operators(self):
        return spin_operators(self.j, self.hbar)

    @cached_property
    def H(self) -> HermitianOperator:
        jz = self.operators[0]
        return HermitianOperator(self.epsilon * (jz @ jz) / self.hbar ** 2)

    @cached_property
    def J(self) -> HermitianOperator:
        return HermitianOperator(self.operators[0])

    @property
    def dim(self) -> int:
        return int(round(2 * self.j)) + 1


def spin_coherent_chart(model) -> SpinCoherentChart:
    return SpinCoherentChart(model.j, model.hbar)


# ---------------------------------------------------------------------------
# exact orbit cylinders

class ProjectiveChart(ManifoldChart):
    """The whole projective space around basis vector ``base``.

    |Z> = cos r |b> + (sin r / r) sum_k z_k |k>, with r = |z| and complex
    coordinates for every other basis vector (real and imaginary parts
    interleaved).  The constrained flow on this chart is the exact
    Schroedinger flow projected to rays.
    """

    name = "projective"

    def __init__(self, dim: int, hbar: float = 1.0, base: int = 0):
        if dim < 2:
            raise ValueError("projective chart needs dim >= 2")
        self.dim = dim
        self.hbar = hbar
        self.base = base
        self.others = np.array([k for k in range(dim) if k != base])
        self.n_params = 2 * (dim - 1)
        self.domain = np.tile([-np.pi / 2, np.pi / 2], (self.n_params, 1))

    def _z(self, x):
        return x[0::2] + 1j * x[1::2]

    def _embed(self, x):
        z = self._z(x)
        r = np.linalg.norm(z)
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.base] = np.cos(r)
        psi[self.others] = _sinc(r) * z
        return psi

    def _tangent(self, x):
        z = self._z(x)
        r = np.linalg.norm(z)
        s, q = _sinc(r), _q(r)
        t = np.zeros((self.n_params, self.dim), dtype=complex)
        t[:, self.base] = -s * x
        t[:, self.others] = q * np.outer(x, z)
        idx = np.arange(self.dim - 1)
        t[2 * idx, self.others] += s
        t[2 * idx + 1, self.others] += 1j * s
        return t

    def coordinates(self, psi) -> np.ndarray:
        """Chart point of the ray through psi (requires <b|psi> != 0 generically)."""
        psi = normalize(psi)
        c0 = psi[self.base]
        phase = np.exp(-1j * np.angle(c0)) if abs(c0) > 0 else 1.0
        psi = psi * phase
        r = np.arccos(np.clip(abs(c0), 0.0, 1.0))
        z = psi[self.others] / _sinc(r)
        x = np.empty(self.n_params)
        x[0::2], x[1::2] = z.real, z.imag
        return x


@dataclass
class CylinderModel:
    """A Hamiltonian with commensurate spectrum and an initial state."""

    H: HermitianOperator
    psi0: np.ndarray
    hbar: float = 1.0
    occupation_tol: float = 1e-14
    gap_tol: float = 1e-10
    max_denominator: int = 10000
    _period: float | None = field(default=None, init=False, repr=False)

    @classmethod
    def from_eigenvalues(cls, eigenvalues, psi0, hbar: float = 1.0) -> "CylinderModel":
        H = HermitianOperator(np.diag(np.asarray(eigenvalues, dtype=float)))
        return cls(H, normalize(as_state(psi0, H.dim)), hbar)

    def __post_init__(self):
        self.psi0 = normalize(as_state(self.psi0, self.H.dim))

    def occupied_energies(self) -> np.ndarray:
        s = self.H.spectrum
        w = s.overlaps(self.psi0)
        return s.eigenvalues[w > self.occupation_tol]

    def base_frequency(self) -> float | None:
        """Largest omega with every occupied gap an integer multiple of hbar*omega.

        Returns None when the state is stationary (no nonzero gaps).
        """
        e = np.unique(np.round(self.occupied_energies(), 14))
        gaps = np.diff(e)
        gaps = gaps[gaps > self.gap_tol * max(1.0, np.max(np.abs(e)))]
        if gaps.size == 0:
            return None
        unit = gaps.min()
        all_gaps = (e - e[0])[1:] / unit
        fracs = [Fraction(float(g)).limit_denominator(self.max_denominator) for g in all_gaps]
        for g, f in zip(all_gaps, fracs):
            if abs(g - float(f)) > self.gap_tol * max(1.0, g):
                raise IncommensurateSpectrum(f"gap ratio {g!r} is not rational")
        denom = np.lcm.reduce([f.denominator for f in fracs])
        nums = [int(f * denom) for f in fracs]
        g = np.gcd.reduce(nums)
        return float(unit * g / denom) / self.hbar

    def period(self) -> float | None:
        w = self.base_frequency()
        return None if w is None else 2 * np.pi / w

    def chart(self, base: int | None = None) -> ProjectiveChart:
        if base is None:
            base = int(np.argmax(np.abs(self.psi0)))
        return ProjectiveChart(self.H.dim, self.hbar, base)


def two_level_model(delta_e: float = 1.0, weight: float = 0.5, hbar: float = 1.0) -> CylinderModel:
    """diag(0, delta_e) with psi0 = sqrt(1-w) e0 + sqrt(w) e1."""
    psi = np.array([np.sqrt(1 - weight), np.sqrt(weight)], dtype=complex)
    return CylinderModel.from_eigenvalues([0.0, delta_e], psi, hbar)


def cylinder_orbit(model: CylinderModel, n_samples: int = 257, period: float | None = None):
    """Exact TDSE orbit of psi0 packaged as a closed orbit over one period.

    The geometric phase is taken in the gauge of the exact solution,
    Theta_t = int <Z|i d_t Z> = E t / hbar.  A stationary psi0 has no
    intrinsic period; it is rejected unless ``period`` (the limiting
    period of a surrounding family) is supplied.
    """
    from .orbits import ClosedOrbit
    from .flow import Trajectory

    T = model.period()
    if T is None:
        if period is None:
            raise NoClosureFound("stationary state: degenerate zero-length orbit")
        T = period
    elif period is not None:
        ratio = period / T
        if abs(ratio - round(ratio)) > 1e-9:
            raise IncommensurateSpectrum("requested period is not a multiple of the orbit period")
        T = period
    H, hbar, psi0 = model.H, model.hbar, model.psi0
    E = H.expectation(psi0)
    chart = model.chart()

    def section(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        states = np.array([propagate(H, psi0, ti, hbar) for ti in t])
        return states, E * t / hbar

    def dense(t):
        scalar = np.ndim(t) == 0
        states, theta = section(t)
        pts = np.array([chart.coordinates(s) for s in states])
        y = np.vstack([pts.T, theta])
        return y[:, 0] if scalar else y

    times = np.linspace(0.0, T, n_samples)
    states, theta = section(times)
    points = np.array([chart.coordinates(s) for s in states])
    energies = np.einsum("ki,ij,kj->k", states.conj(), H.matrix, states).real
    traj = Trajectory(times, points, energies, theta, states, chart, dense, section, H)
    return ClosedOrbit(period=T, samples=traj, energy=E, total_phase=float(theta[-1]),
                       closure_defect=float(np.sqrt(max(0.0, 1 - abs(np.vdot(states[0], states[-1])) ** 2))))
