"""Finite-dimensional Hilbert space arithmetic.

States are plain complex numpy vectors; operators are wrapped in
:class:`HermitianOperator`, which caches its eigen-decomposition so that
exact propagation costs one matrix-vector product per call.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonHermitian

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
# symmetrization silently repairs rounding; anything beyond this is a caller bug
HERMITIAN_REJECT = 1e-6


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = 1.0

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order; eigenvectors stored as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def vector(self, k: int) -> np.ndarray:
        return self.eigenvectors[:, k]

    def overlaps(self, psi) -> np.ndarray:
        """Squared overlaps |<v_k|psi>|^2 for every eigenvector."""
        psi = as_state(psi, self.dim)
        return np.abs(self.eigenvectors.conj().T @ psi) ** 2


def as_state(amplitudes, dim: int | None = None) -> np.ndarray:
    """Validate and return a complex state vector."""
    psi = np.asarray(amplitudes, dtype=complex)
    if psi.ndim != 1 or psi.size == 0:
        raise ValueError("a state must be a nonempty 1-d array")
    if dim is not None and psi.size != dim:
        raise DimensionMismatch(f"state has dimension {psi.size}, expected {dim}")
    if not np.all(np.isfinite(psi)):
        raise ValueError("state amplitudes must be finite")
    return psi


def basis_state(dim: int, k: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[k] = 1.0
    return e


def inner(a, b) -> complex:
    """<a|b>, conjugating the first argument."""
    a = as_state(a)
    b = as_state(b)
    if a.size != b.size:
        raise DimensionMismatch(f"cannot pair dimensions {a.size} and {b.size}")
    return complex(np.vdot(a, b))


def norm(psi) -> float:
    return float(np.linalg.norm(psi))


def normalize(psi) -> np.ndarray:
    psi = as_state(psi)
    n = np.linalg.norm(psi)
    if n == 0:
        raise ValueError("cannot normalize the zero vector")
    return psi / n


def is_normalized(psi, tol: float = NORM_TOL) -> bool:
    return abs(np.vdot(psi, psi).real - 1.0) <= tol


def hermiticity_defect(matrix) -> float:
    """max|A - A^dagger| relative to max|A|."""
    m = np.asarray(matrix)
    scale = np.max(np.abs(m)) if m.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(m - m.conj().T)) / scale)


class HermitianOperator:
    """A dense Hermitian matrix with a lazily computed, lock-protected spectrum."""

    def __init__(self, matrix, *, check: bool = True):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"operator must be square, got shape {m.shape}")
        if check:
            defect = hermiticity_defect(m)
            if defect > HERMITIAN_REJECT:
                raise NonHermitian(f"hermiticity defect {defect:.3e}")
            if defect > HERMITIAN_TOL:
                logger.warning("symmetrizing operator with hermiticity defect %.3e", defect)
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        self._matrix = m
        self._spectrum: SpectralDecomposition | None = None
        self._lock = threading.Lock()

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[0]

    def __matmul__(self, psi):
        return self._matrix @ psi

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"

    @property
    def spectrum(self) -> SpectralDecomposition:
        with self._lock:
            if self._spectrum is None:
                w, v = np.linalg.eigh(self._matrix)
                w.setflags(write=False)
                v.setflags(write=False)
                self._spectrum = SpectralDecomposition(w, v)
            return self._spectrum

    def expectation(self, psi) -> float:
        psi = as_state(psi, self.dim)
        return float(np.vdot(psi, self._matrix @ psi).real)

    def commutator_norm(self, other: "HermitianOperator") -> float:
        a, b = self._matrix, other.matrix
        return float(np.linalg.norm(a @ b - b @ a, 2))

    def function(self, f) -> np.ndarray:
        """Matrix of f(A) through the spectral decomposition."""
        s = self.spectrum
        return (s.eigenvectors * f(s.eigenvalues)) @ s.eigenvectors.conj().T

    def __add__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator(self._matrix + other.matrix, check=False)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, HermitianOperator):
            return HermitianOperator(self._matrix - other.matrix, check=False)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c) and np.isreal(c):
            return HermitianOperator(self._matrix * float(np.real(c)), check=False)
        return NotImplemented

    __rmul__ = __mul__

    def to_json(self) -> dict:
        return operator_to_json(self._matrix)

    @classmethod
    def from_json(cls, doc: dict) -> "HermitianOperator":
        return cls(operator_from_json(doc))


def as_operator(H) -> HermitianOperator:
    if isinstance(H, HermitianOperator):
        return H
    m = np.asarray(H, dtype=complex)
    defect = hermiticity_defect(m)
    if defect > HERMITIAN_TOL:
        raise NonHermitian(f"hermiticity defect {defect:.3e}")
    return HermitianOperator(m, check=False)


def spectral_decomposition(H) -> SpectralDecomposition:
    return as_operator(H).spectrum


def propagate(H, psi0, t: float, hbar: float = 1.0) -> np.ndarray:
    """exp(-i H t / hbar) |psi0> via the cached eigen-decomposition."""
    H = as_operator(H)
    psi0 = as_state(psi0, H.dim)
    s = H.spectrum
    c = s.eigenvectors.conj().T @ psi0
    return s.eigenvectors @ (np.exp(-1j * s.eigenvalues * t / hbar) * c)


def default_degeneracy_tol(spec: SpectralDecomposition) -> float:
    span = float(spec.eigenvalues[-1] - spec.eigenvalues[0])
    return 1e-8 * span if span > 0 else 1e-8


def spectral_projector(spec: SpectralDecomposition, E: float, tol: float | None = None) -> HermitianOperator:
    """Sum of |v_k><v_k| over eigenvalues within tol of E (zero operator if none)."""
    if tol is None:
        tol = default_degeneracy_tol(spec)
    if not tol > 0:
        raise ValueError("tol must be positive")
    sel = np.abs(spec.eigenvalues - E) <= tol
    v = spec.eigenvectors[:, sel]
    return HermitianOperator(v @ v.conj().T, check=False)


def state_to_json(psi) -> dict:
    psi = as_state(psi)
    return {"dim": int(psi.size), "re": psi.real.tolist(), "im": psi.imag.tolist()}


def state_from_json(doc: dict) -> np.ndarray:
    dim = int(doc["dim"])
    psi = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc.get("im", [0.0] * dim), dtype=float)
    return as_state(psi, dim)


def operator_to_json(matrix) -> dict:
    m = np.asarray(matrix, dtype=complex)
    return {"dim": int(m.shape[0]), "re": m.real.ravel().tolist(), "im": m.imag.ravel().tolist()}


def operator_from_json(doc: dict) -> np.ndarray:
    dim = int(doc["dim"])
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc.get("im", np.zeros(dim * dim)), dtype=float)
    if re.size != dim * dim or im.size != dim * dim:
        raise DimensionMismatch("operator JSON has the wrong number of entries")
    return (re + 1j * im).reshape(dim, dim)
