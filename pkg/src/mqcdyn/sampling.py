"""Quasi-random ensemble initialization.

Positions and momenta are drawn from the Gaussian phase-space distribution of
the initial wavepacket, N(mu_q, sigma_q^2) x N(mu_p, sigma_p^2) with
``sigma_p = 1/(2 sigma_q)`` (minimum-uncertainty pairing, hbar = 1), by
pushing a two-dimensional Sobol sequence through the inverse normal CDF.
The monotone transform preserves the low discrepancy of the sequence, which
is what makes the particle methods converge quickly in N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .ensemble import ParticleEnsemble

# Direction numbers for the standard two-dimensional Sobol sequence
# (Bratley & Fox / Joe & Kuo tables).  Dimension 1 is the base-2 van der
# Corput radical inverse; dimension 2 uses the primitive polynomial x + 1
# with initial direction integer m_1 = 1, giving m-values 1, 3, 5, 15, 17, ...
# via m_k = m_{k-1} xor (2 * m_{k-1}).  Points are generated in Gray-code
# order (Antonov-Saleev), matching the reference sequence
# (0,0), (1/2,1/2), (3/4,1/4), (1/4,3/4), (3/8,3/8), ...
_SOBOL_BITS = 52


def _direction_integers() -> np.ndarray:
    v = np.zeros((2, _SOBOL_BITS), dtype=np.uint64)
    m = 1
    for k in range(_SOBOL_BITS):
        v[0, k] = np.uint64(1) << np.uint64(_SOBOL_BITS - 1 - k)
        v[1, k] = np.uint64(m) << np.uint64(_SOBOL_BITS - 1 - k)
        m = m ^ (2 * m)
    return v


_DIRECTIONS = _direction_integers()


def sobol_2d(n: int, skip: int = 0) -> np.ndarray:
    """First ``n`` points of the 2D Sobol sequence after dropping ``skip``.

    Deterministic, unscrambled.  With ``skip >= 1`` the origin is dropped and
    every returned coordinate lies strictly inside (0, 1).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if skip < 0:
        raise ValueError("skip must be >= 0")
    state = np.zeros(2, dtype=np.uint64)
    out = np.empty((n, 2), dtype=float)
    scale = 0.5 ** _SOBOL_BITS
    j = 0
    if skip == 0:
        out[0] = 0.0
        j = 1
    for i in range(1, skip + n):
        # Gray-code update: flip the direction of the lowest zero bit of i-1
        c = _count_trailing_ones(i - 1)
        state ^= _DIRECTIONS[:, c]
        if i >= skip:
            out[j] = state * scale
            j += 1
    return out


def _count_trailing_ones(x: int) -> int:
    c = 0
    while x & 1:
        x >>= 1
        c += 1
    return c


def inverse_normal_cdf(u):
    """Quantile function of the standard normal (monotone, ~1e-15 accurate)."""
    return ndtri(u)


@dataclass(frozen=True)
class InitSpec:
    """Initial-condition parameters for a particle ensemble."""

    mu_q: float
    mu_p: float
    sigma_q: float
    rho0: np.ndarray = field(repr=False)
    n: int
    sobol_skip: int = 1

    def __post_init__(self):
        if not self.sigma_q > 0.0:
            raise ValueError("sigma_q must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sobol_skip < 0:
            raise ValueError("sobol_skip must be >= 0")
        object.__setattr__(self, "rho0", np.asarray(self.rho0, dtype=complex))
        if self.rho0.shape != (2, 2):
            raise ValueError("rho0 must be a 2x2 matrix")

    @property
    def sigma_p(self) -> float:
        """Momentum width 1/(2 sigma_q); sigma_q * sigma_p = 1/2."""
        return 1.0 / (2.0 * self.sigma_q)


def init_ensemble(spec: InitSpec) -> ParticleEnsemble:
    """Ensemble sampled from the wavepacket's Gaussian phase-space density.

    All particles share the weight 1/N and the quantum state ``rho0``.
    Deterministic: the same spec always yields the same ensemble.
    """
    u = sobol_2d(spec.n, skip=spec.sobol_skip)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ValueError("Sobol points on the unit-square boundary; "
                         "use sobol_skip >= 1")
    q = spec.mu_q + spec.sigma_q * inverse_normal_cdf(u[:, 0])
    p = spec.mu_p + spec.sigma_p * inverse_normal_cdf(u[:, 1])
    w = np.full(spec.n, 1.0 / spec.n)
    rho = np.broadcast_to(spec.rho0, (spec.n, 2, 2)).copy()
    return ParticleEnsemble(q=q, p=p, rho=rho, w=w)
