"""Shared construction and verification helpers for the test suite."""

import numpy as np

from mqcdyn.dynamics import MethodKind, default_grid, energy, rhs
from mqcdyn.ensemble import ParticleEnsemble
from mqcdyn.pauli import IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z, projector

HERM_BASIS = [IDENTITY, SIGMA_X, SIGMA_Y, SIGMA_Z]


def bloch_state(theta, phi=0.0):
    v = np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])
    return projector(v)


def random_ensemble(n, seed, q0, p0, spread=0.5):
    rng = np.random.default_rng(seed)
    rho = np.stack([bloch_state(t, f) for t, f in
                    zip(rng.uniform(0, np.pi, n), rng.uniform(0, 2 * np.pi, n))])
    return ParticleEnsemble(q=q0 + spread * rng.standard_normal(n),
                            p=p0 + spread * rng.standard_normal(n),
                            rho=rho, w=np.full(n, 1.0 / n))


def fd_gradient_check(kind, e, h, spec, rtol=1e-5):
    """Verify that the analytic right-hand side is the w-scaled canonical
    gradient of the energy on a frozen quadrature grid.

    Classical sector: dq/dt = dh/dp / w, dp/dt = -dh/dq / w via central
    differences of energy().  Quantum sector: reconstruct dh/drho_a from
    directional derivatives along the Hermitian basis, then compare
    drho_a with -(i/hbar) [dh/drho_a, rho_a] / w_a.
    """
    kind = MethodKind.parse(kind)
    grid = default_grid(kind, e, spec)
    deriv = rhs(kind, e, h, spec, grid)

    def h_at(q, p, rho):
        return energy(kind, ParticleEnsemble(q=q, p=p, rho=rho, w=e.w), h,
                      spec, grid)

    step = 1e-5
    scale = max(np.max(np.abs(deriv.dq)), np.max(np.abs(deriv.dp)),
                np.max(np.abs(deriv.drho)), 1e-8)
    for a in range(e.n):
        qp = e.q.copy(); qp[a] += step
        qm = e.q.copy(); qm[a] -= step
        dh_dq = (h_at(qp, e.p, e.rho) - h_at(qm, e.p, e.rho)) / (2 * step)
        pp = e.p.copy(); pp[a] += step
        pm = e.p.copy(); pm[a] -= step
        dh_dp = (h_at(e.q, pp, e.rho) - h_at(e.q, pm, e.rho)) / (2 * step)
        assert abs(deriv.dq[a] - dh_dp / e.w[a]) <= rtol * scale + 1e-12
        assert abs(deriv.dp[a] + dh_dq / e.w[a]) <= rtol * scale + 1e-12

        grad = np.zeros((2, 2), dtype=complex)
        for basis in HERM_BASIS:
            rp = e.rho.copy(); rp[a] = rp[a] + step * basis
            rm = e.rho.copy(); rm[a] = rm[a] - step * basis
            direction = (h_at(e.q, e.p, rp) - h_at(e.q, e.p, rm)) / (2 * step)
            # <G, B> = Tr(G B); the Pauli basis is orthogonal with norm^2 = 2
            grad += direction * basis / 2.0
        expected_drho = -1j * (grad @ e.rho[a] - e.rho[a] @ grad) / e.w[a]
        assert np.max(np.abs(deriv.drho[a] - expected_drho)) <= rtol * scale + 1e-12
