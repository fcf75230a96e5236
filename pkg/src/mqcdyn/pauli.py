"""Pauli-basis helpers for 2x2 Hermitian matrices.

Every Hermitian 2x2 matrix is written as ``A = a0*1 + ax*sx + ay*sy + az*sz``
with real coefficients.  Throughout the package the "half Bloch vector" of a
density matrix rho is ``s_mu = Tr(rho sigma_mu)/2`` (so a trace-one pure state
has |s| = 1/2); keeping the trace component explicit lets energy gradients be
evaluated off the trace-one manifold, which the finite-difference tests need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class PauliVector:
    """Coefficients of 1, sigma_x, sigma_y, sigma_z (all real, energy units)."""

    h0: float
    h1: float
    h2: float
    h3: float

    def matrix(self) -> np.ndarray:
        """Reconstruct the 2x2 Hermitian matrix."""
        return (self.h0 * IDENTITY + self.h1 * SIGMA_X
                + self.h2 * SIGMA_Y + self.h3 * SIGMA_Z)

    def vector_norm(self) -> float:
        """Norm of the traceless part, half of the spectral gap."""
        return float(np.sqrt(self.h1**2 + self.h2**2 + self.h3**2))


def pauli_matrix(h0, h1, h2, h3) -> np.ndarray:
    """2x2 Hermitian matrix from Pauli coefficients (scalars or arrays).

    For array inputs the component axes are appended, i.e. the result has
    shape ``np.shape(h0) + (2, 2)``.
    """
    h0, h1, h2, h3 = np.broadcast_arrays(h0, h1, h2, h3)
    out = np.empty(h0.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = h0 + h3
    out[..., 0, 1] = h1 - 1j * h2
    out[..., 1, 0] = h1 + 1j * h2
    out[..., 1, 1] = h0 - h3
    return out


def pauli_decompose(a: np.ndarray) -> np.ndarray:
    """Pauli coefficients (a0, ax, ay, az) of Hermitian matrices.

    `a` has shape ``(..., 2, 2)``; returns a real array of shape ``(..., 4)``.
    Any anti-Hermitian part is discarded.
    """
    a0 = 0.5 * (a[..., 0, 0].real + a[..., 1, 1].real)
    az = 0.5 * (a[..., 0, 0].real - a[..., 1, 1].real)
    ax = 0.5 * (a[..., 0, 1] + a[..., 1, 0]).real
    ay = 0.5 * (a[..., 1, 0] - a[..., 0, 1]).imag
    return np.stack([a0, ax, ay, az], axis=-1)


def bloch_half(rho: np.ndarray) -> np.ndarray:
    """Half Bloch vectors Tr(rho sigma)/2, shape ``(..., 3)``."""
    return pauli_decompose(rho)[..., 1:]


def trace_pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Tr(A B) for Hermitian matrices given as Pauli 4-vectors ``(..., 4)``."""
    return 2.0 * np.sum(a * b, axis=-1)


def hermitize(rho: np.ndarray) -> np.ndarray:
    """Hermitian part (A + A^dagger)/2, preserving shape ``(..., 2, 2)``."""
    return 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))


def projector(v: np.ndarray) -> np.ndarray:
    """Rank-one density matrix v v^dagger for a normalized 2-vector."""
    v = np.asarray(v, dtype=complex).reshape(2)
    return np.outer(v, v.conj())
