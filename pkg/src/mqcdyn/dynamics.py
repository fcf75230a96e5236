"""Equations of motion and time stepping for the particle methods.

All three methods share the canonical structure

    dq_a/dt =  (1/w_a) dh/dp_a,
    dp_a/dt = -(1/w_a) dh/dq_a,
    i hbar drho_a/dt = (1/w_a) [dh/drho_a, rho_a],

and differ only in the total energy h: the mean-field (Ehrenfest) energy
``sum_a w_a <rho_a, H(zeta_a)>`` alone, plus the phase-space commutator
coupling for the koopmon method, or plus the configuration-space
quantum-potential coupling for the bohmion method.  The gradients of the
coupling terms are obtained by differentiating the quadrature sums exactly
(closed-form kernel derivatives), so the analytic right-hand side is the
exact gradient of `energy` on the same grid; the finite-difference tests pin
this contract.

Time stepping is plain fixed-step RK4 with the quadrature grid rebuilt from
the stage state at every stage.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import backreaction
from .backreaction import HBAR
from .ensemble import ParticleEnsemble, rehermitize
from .models import HybridHamiltonian
from .pauli import SIGMA_X, SIGMA_Y, SIGMA_Z, pauli_decompose
from .regularization import (GridParams, KernelSpec, build_grid, build_grid_1d)


class MethodKind(str, enum.Enum):
    KOOPMON = "koopmon"
    EHRENFEST = "ehrenfest"
    BOHMION = "bohmion"

    @classmethod
    def parse(cls, name) -> "MethodKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown method {name!r}; expected one of "
                             f"{[m.value for m in cls]}") from None


class NonFiniteDerivativeError(FloatingPointError):
    """The right-hand side produced NaN or Inf."""


class EnergyDriftError(RuntimeError):
    """Relative energy drift exceeded ten times the configured tolerance."""

    def __init__(self, t: float, drift: float, tol: float):
        super().__init__(
            f"relative energy drift {drift:.3e} at t={t:g} exceeds 10 x "
            f"tolerance {tol:g}; decrease dt or refine the grid")
        self.t = t
        self.drift = drift
        self.tol = tol


@dataclass
class EnsembleDerivative:
    """Time derivative of an ensemble state."""

    dq: np.ndarray
    dp: np.ndarray
    drho: np.ndarray


_SIGMA_STACK = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])


def _drho_from_field(hvec: np.ndarray, s: np.ndarray) -> np.ndarray:
    """drho = (2/hbar) (hvec x s) . sigma for per-particle field vectors.

    Exactly Hermitian and traceless by construction.
    """
    ds = (2.0 / HBAR) * np.cross(hvec, s)
    return np.einsum("ak,kij->aij", ds, _SIGMA_STACK)


def _mean_field(e: ParticleEnsemble, h: HybridHamiltonian):
    """<rho_a, dH/dp_a>, <rho_a, dH/dq_a> and the local Pauli field H_vec."""
    comp = pauli_decompose(e.rho)  # (N, 4): trace/2 and half Bloch vector
    gq = np.stack(np.broadcast_arrays(*h.grad_q(e.q, e.p)), axis=1)
    gp = np.stack(np.broadcast_arrays(*h.grad_p(e.q, e.p)), axis=1)
    dq = 2.0 * np.sum(comp * gp, axis=1)
    dp_mf = 2.0 * np.sum(comp * gq, axis=1)
    hvec = np.stack(np.broadcast_arrays(*h.pauli(e.q, e.p)), axis=1)[:, 1:]
    return dq, dp_mf, hvec


def default_grid(kind: MethodKind, e: ParticleEnsemble, spec: KernelSpec | None,
                 grid_params: GridParams = GridParams()):
    """The quadrature grid the method would build for this state."""
    kind = MethodKind.parse(kind)
    if kind is MethodKind.KOOPMON:
        return build_grid(e.q, e.p, spec, grid_params)
    if kind is MethodKind.BOHMION:
        return build_grid_1d(e.q, spec, grid_params)
    return None


def _coupling_terms(kind: MethodKind, e: ParticleEnsemble, h: HybridHamiltonian,
                    spec: KernelSpec | None, grid, energy_only: bool = False):
    if kind is MethodKind.EHRENFEST:
        return None
    if spec is None:
        raise ValueError(f"{kind.value} dynamics require a KernelSpec")
    if grid is None:
        grid = default_grid(kind, e, spec)
    if kind is MethodKind.KOOPMON:
        return backreaction.koopmon_terms(e, h, grid, spec,
                                          energy_only=energy_only)
    return backreaction.bohmion_terms(e, h.mass, grid, spec)


def rhs(kind: MethodKind, e: ParticleEnsemble, h: HybridHamiltonian,
        spec: KernelSpec | None = None, grid=None) -> EnsembleDerivative:
    """Equations of motion for the given method at the current state.

    ``grid`` is the quadrature grid to use for the coupling integrals
    (2D for koopmon, 1D for bohmion); when omitted it is built from the
    current state with default box parameters.  Ehrenfest ignores it.
    """
    kind = MethodKind.parse(kind)
    dq, dp_mf, hvec = _mean_field(e, h)
    dp = -dp_mf

    terms = _coupling_terms(kind, e, h, spec, grid)
    if terms is not None:
        if isinstance(terms, backreaction.KoopmonTerms):
            dq = dq + terms.dqdot_extra
        dp = dp + terms.dpdot_extra
        hvec = hvec + terms.heff_vec

    s = pauli_decompose(e.rho)[:, 1:]
    drho = _drho_from_field(hvec, s)

    if not (np.all(np.isfinite(dq)) and np.all(np.isfinite(dp))
            and np.all(np.isfinite(drho))):
        raise NonFiniteDerivativeError("non-finite time derivative")
    return EnsembleDerivative(dq=dq, dp=dp, drho=drho)


def energy(kind: MethodKind, e: ParticleEnsemble, h: HybridHamiltonian,
           spec: KernelSpec | None = None, grid=None) -> float:
    """Conserved Hamiltonian of the method at the current state."""
    kind = MethodKind.parse(kind)
    comp = pauli_decompose(e.rho)
    hp = np.stack(np.broadcast_arrays(*h.pauli(e.q, e.p)), axis=1)
    mean = float(e.w @ (2.0 * np.sum(comp * hp, axis=1)))
    terms = _coupling_terms(kind, e, h, spec, grid, energy_only=True)
    if terms is None:
        return mean
    return mean + terms.energy


def rk4_step(kind: MethodKind, e: ParticleEnsemble, h: HybridHamiltonian,
             spec: KernelSpec | None, dt: float,
             grid_params: GridParams = GridParams()) -> ParticleEnsemble:
    """One classical RK4 step; the grid is rebuilt from every stage state."""
    kind = MethodKind.parse(kind)

    def stage_grid(state: ParticleEnsemble):
        return default_grid(kind, state, spec, grid_params)

    def shifted(scale: float, d: EnsembleDerivative) -> ParticleEnsemble:
        return ParticleEnsemble(q=e.q + scale * d.dq, p=e.p + scale * d.dp,
                                rho=e.rho + scale * d.drho, w=e.w)

    k1 = rhs(kind, e, h, spec, stage_grid(e))
    s2 = shifted(0.5 * dt, k1)
    k2 = rhs(kind, s2, h, spec, stage_grid(s2))
    s3 = shifted(0.5 * dt, k2)
    k3 = rhs(kind, s3, h, spec, stage_grid(s3))
    s4 = shifted(dt, k3)
    k4 = rhs(kind, s4, h, spec, stage_grid(s4))

    sixth = dt / 6.0
    q = e.q + sixth * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq)
    p = e.p + sixth * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp)
    rho = e.rho + sixth * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho)
    return ParticleEnsemble(q=q, p=p, rho=rehermitize(rho), w=e.w)


@dataclass
class Trajectory:
    """Propagation output: per-step diagnostics plus requested snapshots."""

    times: np.ndarray
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)   # (time, ParticleEnsemble)

    @property
    def final_state(self) -> ParticleEnsemble:
        return self.snapshots[-1][1] if self.snapshots else None


def snapshot_steps(dt: float, n_steps: int, snapshot_times) -> dict[int, float]:
    """Map requested snapshot times to step indices (nearest step, ties to
    the earlier step)."""
    out: dict[int, float] = {}
    for t in snapshot_times:
        k = int(math.floor(t / dt + 0.5))
        if math.isclose((k - 0.5) * dt, t, rel_tol=0.0, abs_tol=1e-12 * max(1.0, abs(t))):
            k -= 1  # exact tie rounds toward the earlier step
        k = min(max(k, 0), n_steps)
        out.setdefault(k, t)
    return out


def propagate(kind: MethodKind, e0: ParticleEnsemble, h: HybridHamiltonian,
              spec: KernelSpec | None, dt: float, t_final: float,
              snapshot_times=(), grid_params: GridParams = GridParams(),
              energy_tol: float = 1e-2, diagnostics_fn=None,
              progress=None) -> Trajectory:
    """Fixed-step march to ``t_final`` with per-step diagnostics.

    ``diagnostics_fn(t, ensemble, energy, drift) -> record`` is called at
    every step (including t=0); the returned records are collected in order.
    Snapshots are deep copies taken at the step nearest each requested time.
    Raises `EnergyDriftError` when the relative drift exceeds ten times
    ``energy_tol``.
    """
    kind = MethodKind.parse(kind)
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if t_final < 0.0:
        raise ValueError("t_final must be nonnegative")
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(1.0, abs(t_final)):
        raise ValueError(f"t_final={t_final} is not an integer number of steps "
                         f"of dt={dt}")
    for t in snapshot_times:
        if t < 0.0 or t > t_final + 1e-12:
            raise ValueError(f"snapshot time {t} outside [0, {t_final}]")

    snap_at = snapshot_steps(dt, n_steps, snapshot_times)
    times = dt * np.arange(n_steps + 1)
    traj = Trajectory(times=times)

    state = e0.copy()

    def state_energy(st):
        return energy(kind, st, h, spec, default_grid(kind, st, spec, grid_params))

    e_ref = state_energy(state)
    for k in range(n_steps + 1):
        t = times[k]
        e_now = e_ref if k == 0 else state_energy(state)
        drift = abs(e_now - e_ref) / max(abs(e_ref), 1e-300)
        if drift > 10.0 * energy_tol:
            raise EnergyDriftError(t, drift, energy_tol)
        if diagnostics_fn is not None:
            traj.records.append(diagnostics_fn(t, state, e_now, drift))
        if k in snap_at:
            traj.snapshots.append((t, state.copy()))
        if progress is not None:
            progress(k, n_steps)
        if k < n_steps:
            state = rk4_step(kind, state, h, spec, dt)
    return traj
