"""Dense 3-dimensional complex algebra for the Lambda system.

Basis ordering is fixed package-wide as (|+1>, |0>, |-1>): index 0 is the
m=+1 ground state, index 1 the intermediate state, index 2 the m=-1 ground
state. Every other module inherits this ordering. Internally all times are
in units of the pulse duration and angular frequencies in its inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10

#: Basis kets in the fixed ordering.
KET_P1 = np.array([1.0, 0.0, 0.0], dtype=complex)
KET_0 = np.array([0.0, 1.0, 0.0], dtype=complex)
KET_M1 = np.array([0.0, 0.0, 1.0], dtype=complex)

#: Index of each level in the fixed basis ordering.
LEVEL_INDEX = {+1: 0, 0: 1, -1: 2}


def _as3vector(x) -> np.ndarray:
    a = np.asarray(getattr(x, "amplitudes", x), dtype=complex)
    if a.shape != (3,):
        raise ValidationError(f"expected a 3-component amplitude vector, got shape {a.shape}")
    return a


def _as3matrix(x) -> np.ndarray:
    m = np.asarray(getattr(x, "matrix", x), dtype=complex)
    if m.shape != (3, 3):
        raise ValidationError(f"expected a 3x3 matrix, got shape {m.shape}")
    return m


@dataclass
class StateVector:
    """Unit-norm amplitudes (c_+1, c_0, c_-1)."""

    amplitudes: np.ndarray
    norm_tol: float = NORM_TOL

    def __post_init__(self):
        self.amplitudes = _as3vector(self.amplitudes)
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > self.norm_tol:
            raise ValidationError(f"state norm {norm!r} deviates from 1 beyond {self.norm_tol}")

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def population(self, level: int) -> float:
        """Population of level +1, 0 or -1."""
        return float(abs(self.amplitudes[LEVEL_INDEX[level]]) ** 2)


@dataclass
class Operator3:
    """3x3 complex operator with an optional structural tag.

    ``kind`` is one of "hermitian", "unitary" or "general"; tagged operators
    are validated against the corresponding invariant at construction.
    """

    matrix: np.ndarray
    kind: str = "general"

    def __post_init__(self):
        self.matrix = _as3matrix(self.matrix)
        if self.kind == "hermitian":
            dev = np.linalg.norm(self.matrix - self.matrix.conj().T)
            scale = max(1.0, np.linalg.norm(self.matrix))
            if dev > HERMITIAN_TOL * scale:
                raise ValidationError(f"matrix is not Hermitian: |H - H^dag| = {dev:.3e}")
        elif self.kind == "unitary":
            dev = np.linalg.norm(self.matrix.conj().T @ self.matrix - np.eye(3))
            if dev > UNITARY_TOL:
                raise ValidationError(f"matrix is not unitary: |U^dag U - I| = {dev:.3e}")
        elif self.kind != "general":
            raise ValidationError(f"unknown operator kind {self.kind!r}")

    def apply(self, state) -> StateVector:
        out = self.matrix @ _as3vector(state)
        tol = NORM_TOL if self.kind == "unitary" else np.inf
        return StateVector(out, norm_tol=tol)

    def __matmul__(self, other):
        if isinstance(other, Operator3):
            return Operator3(self.matrix @ other.matrix)
        return self.matrix @ _as3matrix(other)


def require_hermitian(matrix, tol: float = HERMITIAN_TOL) -> np.ndarray:
    m = _as3matrix(matrix)
    dev = np.linalg.norm(m - m.conj().T)
    scale = max(1.0, np.linalg.norm(m))
    if dev > tol * scale:
        raise ValidationError(f"matrix is not Hermitian: |H - H^dag| = {dev:.3e}")
    return m


def expm_hermitian(hamiltonian, dt: float) -> Operator3:
    """Exact unitary exp(-i H dt) of a 3x3 Hermitian generator.

    Uses an eigendecomposition, which is exact for this fixed dimension, so
    the result is unitary to rounding regardless of ``|H| dt``.
    """
    m = require_hermitian(hamiltonian)
    if not np.isfinite(dt):
        raise ValidationError("dt must be finite")
    w, v = np.linalg.eigh(m)
    u = (v * np.exp(-1j * w * dt)) @ v.conj().T
    return Operator3(u, kind="unitary")


def expm_hermitian_batch(hams: np.ndarray, dt) -> np.ndarray:
    """Vectorized exp(-i H dt) over a stack of Hermitian matrices (n, 3, 3).

    Hot path of the propagator: no validation, callers guarantee Hermiticity
    by construction.
    """
    w, v = np.linalg.eigh(hams)
    phase = np.exp(-1j * w * dt)
    return np.einsum("...ij,...j,...kj->...ik", v, phase, v.conj())


def overlap(a, b) -> complex:
    """Inner product <a|b> of two states."""
    return complex(np.vdot(_as3vector(a), _as3vector(b)))
