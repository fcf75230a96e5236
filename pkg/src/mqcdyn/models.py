"""Hybrid Hamiltonians H(q,p) = H_C(q,p)*1 + H_I(q) in Pauli form.

Five built-in benchmark models: three single-avoided-crossing-family two-level
scattering models ("tully1", "tully2", "tully3") and a driven-spin/oscillator
model in two coupling regimes ("rabi_us", "rabi_ds").  All quantities are in
atomic units with hbar = 1.

The interaction term is a function of position only (no momentum coupling);
the classical part must be of the standard form ``p^2/(2M) + V_C(q)`` for the
grid-based quantum reference solver to apply, although the particle methods
only require smoothness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .pauli import PauliVector, pauli_matrix

#: Position threshold below which two electronic levels are treated as
#: exactly degenerate (eigenvectors are then fixed by convention, and the
#: nonadiabatic coupling is undefined).
DEGENERACY_EPS = 1e-14


class DegeneratePotentialError(ValueError):
    """Raised when an operation requires a nonzero electronic gap."""


@dataclass(frozen=True)
class HybridHamiltonian:
    """Operator-valued phase-space function in Pauli form.

    ``classical`` and its derivatives are scalar functions of (q, p); the
    interaction callables return the four Pauli coefficients of H_I(q).
    All callables accept and return numpy arrays elementwise.
    """

    name: str
    mass: float
    classical: Callable
    d_classical_q: Callable
    d_classical_p: Callable
    interaction: Callable
    d_interaction: Callable
    params: dict = field(default_factory=dict)

    def pauli(self, q, p):
        """Full Hamiltonian Pauli coefficients (h0, h1, h2, h3) at (q, p)."""
        i0, i1, i2, i3 = self.interaction(q)
        h0 = self.classical(q, p) + i0
        return h0, i1 + 0.0 * h0, i2 + 0.0 * h0, i3 + 0.0 * h0

    def grad_q(self, q, p):
        """d/dq of the four Pauli coefficients."""
        d0, d1, d2, d3 = self.d_interaction(q)
        g0 = self.d_classical_q(q, p) + d0
        return g0, d1 + 0.0 * g0, d2 + 0.0 * g0, d3 + 0.0 * g0

    def grad_p(self, q, p):
        """d/dp of the four Pauli coefficients (interaction is p-free)."""
        g0 = self.d_classical_p(q, p)
        z = 0.0 * g0
        return g0, z, z, z

    def interaction_part(self, q: float) -> PauliVector:
        i0, i1, i2, i3 = self.interaction(q)
        return PauliVector(float(i0), float(i1), float(i2), float(i3))

    def electronic_pauli(self, q):
        """Pauli coefficients of the electronic matrix V_C(q)*1 + H_I(q)."""
        i0, i1, i2, i3 = self.interaction(q)
        h0 = self.classical(q, 0.0 * np.asarray(q, dtype=float)) + i0
        return h0, i1 + 0.0 * h0, i2 + 0.0 * h0, i3 + 0.0 * h0

    def matrix(self, q: float, p: float) -> np.ndarray:
        """Dense 2x2 Hermitian matrix at a phase-space point."""
        return pauli_matrix(*self.pauli(q, p))


@dataclass(frozen=True)
class SpectralData:
    """Eigen-decomposition of the electronic matrix at one position.

    ``lambda1 <= lambda2``; ``v1``/``v2`` are the unit eigenvectors with the
    phase fixed so the largest-magnitude component is real positive (first
    component wins magnitude ties).
    """

    lambda1: float
    lambda2: float
    v1: np.ndarray
    v2: np.ndarray


# ---------------------------------------------------------------------------
# Benchmark model definitions
# ---------------------------------------------------------------------------

_TULLY_DEFAULTS = {
    "I": dict(a=0.01, b=1.6, c=0.005, d=1.0, mass=2000.0),
    "II": dict(a=0.05, b=0.28, c=0.015, d=0.06, e0=0.025, mass=2000.0),
    "III": dict(a=0.0006, b=0.1, c=0.9, mass=2000.0),
}

_RABI_DEFAULTS = {
    "ultrastrong": dict(gamma=0.29, c0=0.35, mass=1.0, omega=1.0),
    "deep_strong": dict(gamma=1.85, c0=0.1, mass=1.0, omega=1.0),
}


def make_tully(variant: str, **overrides) -> HybridHamiltonian:
    """Two-level scattering model; ``variant`` is "I", "II" or "III".

    Kinetic part p^2/(2M) with M = 2000; the diabatic functions follow the
    standard single/dual avoided crossing and extended coupling forms.
    """
    variant = {1: "I", 2: "II", 3: "III"}.get(variant, str(variant).upper())
    if variant not in _TULLY_DEFAULTS:
        raise ValueError(f"unknown Tully variant {variant!r}; expected I, II or III")
    prm = dict(_TULLY_DEFAULTS[variant])
    unknown = set(overrides) - set(prm)
    if unknown:
        raise ValueError(f"unknown parameters for Tully {variant}: {sorted(unknown)}")
    prm.update(overrides)
    mass = prm["mass"]

    def classical_kinetic(q, p):
        return np.asarray(p, dtype=float) ** 2 / (2.0 * mass) + 0.0 * np.asarray(q, dtype=float)

    def d_kin_q(q, p):
        return 0.0 * np.asarray(q, dtype=float) + 0.0 * np.asarray(p, dtype=float)

    def d_kin_p(q, p):
        return np.asarray(p, dtype=float) / mass + 0.0 * np.asarray(q, dtype=float)

    a, b, c = prm["a"], prm["b"], prm["c"]

    if variant == "I":
        d = prm["d"]

        def interaction(q):
            q = np.asarray(q, dtype=float)
            h1 = c * np.exp(-d * q**2)
            h3 = a * np.sign(q) * (1.0 - np.exp(-b * np.abs(q)))
            return 0.0 * q, h1, 0.0 * q, h3

        def d_interaction(q):
            q = np.asarray(q, dtype=float)
            dh1 = -2.0 * c * d * q * np.exp(-d * q**2)
            # one-sided derivatives agree at q=0, so the kink is C^1
            dh3 = a * b * np.exp(-b * np.abs(q))
            return 0.0 * q, dh1, 0.0 * q, dh3

        classical, d_cl_q, d_cl_p = classical_kinetic, d_kin_q, d_kin_p

    elif variant == "II":
        d, e0 = prm["d"], prm["e0"]

        def h0_fn(q):
            return e0 - a * np.exp(-b * q**2)

        def classical(q, p):
            q = np.asarray(q, dtype=float)
            return classical_kinetic(q, p) + h0_fn(q)

        def d_cl_q(q, p):
            q = np.asarray(q, dtype=float)
            return 2.0 * a * b * q * np.exp(-b * q**2) + 0.0 * np.asarray(p, dtype=float)

        d_cl_p = d_kin_p

        def interaction(q):
            q = np.asarray(q, dtype=float)
            h1 = c * np.exp(-d * q**2)
            return 0.0 * q, h1, 0.0 * q, -h0_fn(q)

        def d_interaction(q):
            q = np.asarray(q, dtype=float)
            dh1 = -2.0 * c * d * q * np.exp(-d * q**2)
            dh3 = -2.0 * a * b * q * np.exp(-b * q**2)
            return 0.0 * q, dh1, 0.0 * q, dh3

    else:  # III
        def interaction(q):
            q = np.asarray(q, dtype=float)
            h1 = np.where(q > 0.0,
                          b * (2.0 - np.exp(-c * np.clip(q, 0.0, None))),
                          b * np.exp(c * np.clip(q, None, 0.0)))
            return 0.0 * q, h1, 0.0 * q, a + 0.0 * q

        def d_interaction(q):
            q = np.asarray(q, dtype=float)
            dh1 = b * c * np.exp(-c * np.abs(q))
            return 0.0 * q, dh1, 0.0 * q, 0.0 * q

        classical, d_cl_q, d_cl_p = classical_kinetic, d_kin_q, d_kin_p

    return HybridHamiltonian(
        name="tully" + str({"I": 1, "II": 2, "III": 3}[variant]),
        mass=mass,
        classical=classical,
        d_classical_q=d_cl_q,
        d_classical_p=d_cl_p,
        interaction=interaction,
        d_interaction=d_interaction,
        params=prm,
    )


def make_rabi(regime: str, **overrides) -> HybridHamiltonian:
    """Harmonic oscillator driving a two-level spin.

    H = (p^2/M + M w^2 q^2)/2 * 1 + gamma*q*sz + C0*sx with M = w = 1;
    ``regime`` is "ultrastrong" or "deep_strong".
    """
    regime = str(regime).lower()
    aliases = {"us": "ultrastrong", "ds": "deep_strong", "deepstrong": "deep_strong"}
    regime = aliases.get(regime, regime)
    if regime not in _RABI_DEFAULTS:
        raise ValueError(f"unknown Rabi regime {regime!r}")
    prm = dict(_RABI_DEFAULTS[regime])
    unknown = set(overrides) - set(prm)
    if unknown:
        raise ValueError(f"unknown parameters for Rabi: {sorted(unknown)}")
    prm.update(overrides)
    mass, omega, gamma, c0 = prm["mass"], prm["omega"], prm["gamma"], prm["c0"]

    def classical(q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return 0.5 * (p**2 / mass + mass * omega**2 * q**2)

    def d_cl_q(q, p):
        return mass * omega**2 * np.asarray(q, dtype=float) + 0.0 * np.asarray(p, dtype=float)

    def d_cl_p(q, p):
        return np.asarray(p, dtype=float) / mass + 0.0 * np.asarray(q, dtype=float)

    def interaction(q):
        q = np.asarray(q, dtype=float)
        return 0.0 * q, c0 + 0.0 * q, 0.0 * q, gamma * q

    def d_interaction(q):
        q = np.asarray(q, dtype=float)
        return 0.0 * q, 0.0 * q, 0.0 * q, gamma + 0.0 * q

    return HybridHamiltonian(
        name="rabi_us" if regime == "ultrastrong" else "rabi_ds",
        mass=mass,
        classical=classical,
        d_classical_q=d_cl_q,
        d_classical_p=d_cl_p,
        interaction=interaction,
        d_interaction=d_interaction,
        params=prm,
    )


_MODEL_FACTORIES = {
    "tully1": lambda **kw: make_tully("I", **kw),
    "tully2": lambda **kw: make_tully("II", **kw),
    "tully3": lambda **kw: make_tully("III", **kw),
    "rabi_us": lambda **kw: make_rabi("ultrastrong", **kw),
    "rabi_ds": lambda **kw: make_rabi("deep_strong", **kw),
}


def model_names() -> list[str]:
    return sorted(_MODEL_FACTORIES)


def make_model(name: str, **overrides) -> HybridHamiltonian:
    """Build a benchmark model by name with optional parameter overrides."""
    try:
        factory = _MODEL_FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {model_names()}") from None
    return factory(**overrides)


# ---------------------------------------------------------------------------
# Spectral data and nonadiabatic coupling
# ---------------------------------------------------------------------------

def _eigvecs_from_pauli(h1, h2, h3):
    """Unit eigenvectors of h1*sx + h2*sy + h3*sz, vectorized over inputs.

    Branch choice keeps the formulas away from their removable singularities;
    the phase is then fixed so the largest-magnitude component is real
    positive (ties resolved toward the first component).  Returns arrays of
    shape (..., 2) for the lower and upper eigenvectors.
    """
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    h3 = np.asarray(h3, dtype=float)
    r = np.sqrt(h1**2 + h2**2 + h3**2)
    off = h1 + 1j * h2          # matrix element <2|H|1>
    lower = np.empty(np.shape(r) + (2,), dtype=complex)
    upper = np.empty_like(lower)

    use_minus = h3 <= 0.0       # stable branch selector
    # eigenvector for +r
    upper[..., 0] = np.where(use_minus, np.conj(off), r + h3)
    upper[..., 1] = np.where(use_minus, r - h3, off)
    # eigenvector for -r
    lower[..., 0] = np.where(use_minus, r - h3, -np.conj(off))
    lower[..., 1] = np.where(use_minus, -off, r + h3)

    degenerate = r <= DEGENERACY_EPS
    if np.any(degenerate):
        # convention at exact degeneracy: the canonical basis
        lower[degenerate] = (1.0, 0.0)
        upper[degenerate] = (0.0, 1.0)

    for v in (lower, upper):
        norm = np.sqrt(np.abs(v[..., 0])**2 + np.abs(v[..., 1])**2)
        v /= norm[..., None]
        mag0 = np.abs(v[..., 0])
        mag1 = np.abs(v[..., 1])
        dominant = np.where(mag0 >= mag1, v[..., 0], v[..., 1])
        phase = np.where(np.abs(dominant) > 0.0, dominant / np.abs(dominant), 1.0)
        v /= phase[..., None]
    return lower, upper


def adiabatic_basis(h: HybridHamiltonian, q):
    """Vectorized PES values and adiabatic basis at positions ``q``.

    Returns ``(lam1, lam2, v1, v2)`` with eigenvalues ascending and
    eigenvector arrays of shape ``q.shape + (2,)``.
    """
    h0, h1, h2, h3 = h.electronic_pauli(q)
    r = np.sqrt(h1**2 + h2**2 + h3**2)
    v1, v2 = _eigvecs_from_pauli(h1, h2, h3)
    return h0 - r, h0 + r, v1, v2


def spectral(h: HybridHamiltonian, q: float) -> SpectralData:
    """Closed-form eigendecomposition of the electronic matrix at ``q``."""
    lam1, lam2, v1, v2 = adiabatic_basis(h, float(q))
    return SpectralData(float(lam1), float(lam2), v1.reshape(2), v2.reshape(2))


def nac(h: HybridHamiltonian, q: float) -> float:
    """Nonadiabatic coupling <v1 | dH_el/dq v2> / (lambda1 - lambda2).

    The sign follows the eigenvector phase convention of `spectral`.  Raises
    `DegeneratePotentialError` when the electronic gap vanishes.
    """
    s = spectral(h, q)
    gap = s.lambda1 - s.lambda2
    if abs(gap) < DEGENERACY_EPS:
        raise DegeneratePotentialError(
            f"electronic levels degenerate at q={q!r}; coupling undefined")
    g0, g1, g2, g3 = h.grad_q(q, 0.0)
    dmat = pauli_matrix(float(g0), float(g1), float(g2), float(g3))
    num = np.vdot(s.v1, dmat @ s.v2)
    return float((num / gap).real)
