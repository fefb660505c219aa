"""Motionless equilibrium of the heated, illuminated suspension.

The equilibrium has no flow; the cells balance upswimming against
diffusion under the self-shaded light field. Writing the cumulative
concentration

    omega(z) = integral_1^z n_s dz',

so that n_s = omega' and the light field is G_s = Gt * exp(kappa * omega),
the equilibrium satisfies the two-point boundary value problem

    omega'' - Vc * M(G_s(omega)) * omega' = 0,
    omega(0) = -1,  omega(1) = 0,

whose boundary values encode the unit mean concentration. The temperature
profile is the pure conduction solution T_s = 1 - z.
"""
import csv
from dataclasses import dataclass

import numpy as np

from . import model as _model
from .exceptions import InconsistentStateError, NonConvergenceError
from .grid import grid

_NEWTON_CAP = 50
_NEWTON_TOL = 1e-11


@dataclass(frozen=True)
class BasicState:
    """Equilibrium profiles on the collocation grid.

    All arrays share the grid ``z`` (ascending, z[0]=0, z[-1]=1):
    cumulative concentration ``omega_bar``, concentration ``ns``, light
    intensity ``Gs``, temperature ``Ts``, and the three coefficient
    profiles ``gamma1``, ``gamma2``, ``gamma3`` consumed by the
    stability operators.
    """

    z: np.ndarray
    omega_bar: np.ndarray
    ns: np.ndarray
    Gs: np.ndarray
    Ts: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    gamma3: np.ndarray

    def __post_init__(self):
        for a in (self.z, self.omega_bar, self.ns, self.Gs, self.Ts,
                  self.gamma1, self.gamma2, self.gamma3):
            a.setflags(write=False)

    @property
    def n(self):
        return self.z.size


def solve_basic_state(params):
    """Solve the equilibrium BVP for the given parameters.

    Damped Newton iteration on the collocated first-order system for
    (omega, n_s), started from the uniform-suspension solution. Keeping
    both unknowns first-order avoids the roundoff floor of a squared
    differentiation matrix. Raises NonConvergenceError with the residual
    trace when the iteration stalls above tolerance.
    """
    g = grid(params.N)
    z, d1 = g.z, g.d1
    n = params.N
    kappa, Vc, Gt, beta = params.kappa, params.Vc, params.Gt, params.beta

    def residual(u):
        om, ns = u[:n], u[n:]
        gs = Gt * np.exp(kappa * om)
        f1 = d1 @ om - ns
        f1[0] = om[0] + 1.0
        f1[-1] = om[-1]
        f2 = d1 @ ns - Vc * _model.taxis(gs, beta) * ns
        return np.concatenate([f1, f2])

    u = np.concatenate([z - 1.0, np.ones(n)])
    res = np.max(np.abs(residual(u)))
    trace = [res]
    for _ in range(_NEWTON_CAP):
        if res < _NEWTON_TOL:
            break
        om, ns = u[:n], u[n:]
        gs = Gt * np.exp(kappa * om)
        ms = _model.taxis(gs, beta)
        dm, _ = _model.taxis_derivatives(gs, beta)
        j11 = d1.copy()
        j12 = -np.eye(n)
        j11[0, :] = 0.0
        j11[0, 0] = 1.0
        j11[-1, :] = 0.0
        j11[-1, -1] = 1.0
        j12[0, :] = 0.0
        j12[-1, :] = 0.0
        j21 = -Vc * np.diag(ns * dm * kappa * gs)
        j22 = d1 - Vc * np.diag(ms)
        jac = np.block([[j11, j12], [j21, j22]])
        step = np.linalg.solve(jac, -residual(u))
        # halve the step while the residual grows
        lam = 1.0
        new = u + step
        new_res = np.max(np.abs(residual(new)))
        while new_res > res and lam > 2.0**-20:
            lam /= 2.0
            new = u + lam * step
            new_res = np.max(np.abs(residual(new)))
        if new_res >= res:
            break  # stalled at the rounding floor
        u, res = new, new_res
        trace.append(res)
    if res > 1e-10:
        raise NonConvergenceError(
            f"equilibrium Newton iteration stalled at residual {res:.3e} "
            f"after {len(trace) - 1} steps (tol {_NEWTON_TOL:.0e})",
            trace=trace,
        )

    omega, ns = u[:n].copy(), u[n:].copy()
    omega[0] = -1.0   # boundary rows hold exactly after the solve
    omega[-1] = 0.0
    Gs = Gt * np.exp(kappa * omega)
    Ts = 1.0 - z
    state = BasicState(z=z.copy(), omega_bar=omega, ns=ns, Gs=Gs, Ts=Ts,
                       gamma1=np.zeros(params.N), gamma2=np.zeros(params.N),
                       gamma3=np.zeros(params.N))
    g1, g2, g3 = gamma_coefficients(state, params)
    return BasicState(z=z.copy(), omega_bar=omega, ns=ns, Gs=Gs, Ts=Ts,
                      gamma1=g1, gamma2=g2, gamma3=g3)


def gamma_coefficients(state, params):
    """Coefficient profiles of the linearized shading feedback.

    gamma2 = 2 kappa Vc n_s G_s dM/dG        (local response)
    gamma3 = Vc M_s                          (advection by upswimming)
    gamma1 = kappa Vc d/dz(n_s G_s dM/dG)    (differential shading)

    gamma1 is evaluated by the analytic chain rule using
    dn_s/dz = Vc M_s n_s and dG_s/dz = kappa n_s G_s rather than by
    numerically differentiating a solved profile.
    """
    if state.z.size != params.N:
        raise InconsistentStateError(
            f"state grid has {state.z.size} points, params.N = {params.N}"
        )
    res = _equilibrium_equation_residual(state, params)
    scale = max(1.0, float(np.max(np.abs(params.Vc * _model.taxis(state.Gs, params.beta)
                                         * state.ns))))
    if res > 1e-8 * scale:
        raise InconsistentStateError(
            f"equilibrium equation residual {res:.3e} exceeds 1e-8 relative "
            f"to the equation scale {scale:.3g}; state and params are "
            "inconsistent"
        )
    kappa, Vc = params.kappa, params.Vc
    ns, Gs = state.ns, state.Gs
    ms = _model.taxis(Gs, params.beta)
    dm, d2m = _model.taxis_derivatives(Gs, params.beta)
    gamma2 = 2.0 * kappa * Vc * ns * Gs * dm
    gamma3 = Vc * ms
    gamma1 = kappa * Vc * ns * Gs * (Vc * ms * dm + kappa * ns * dm
                                     + kappa * ns * Gs * d2m)
    return gamma1, gamma2, gamma3


def _equilibrium_equation_residual(state, params):
    """Max-norm defect of dn_s/dz = Vc M_s n_s on the grid."""
    g = grid(state.z.size)
    ms = _model.taxis(state.Gs, params.beta)
    return float(np.max(np.abs(g.d1 @ state.ns - params.Vc * ms * state.ns)))


def basic_state_residual(state, params):
    """Max-norm residual of the equilibrium system plus boundary defects.

    Combines the concentration equation defect with the boundary values
    of the cumulative concentration and the unit-mass normalization.
    """
    g = grid(state.z.size)
    res = _equilibrium_equation_residual(state, params)
    res += abs(state.omega_bar[0] + 1.0)
    res += abs(state.omega_bar[-1])
    res += abs(g.integrate(state.ns) - 1.0)
    return res


def collocation_residual(state, params):
    """Max-norm residual of the discrete system the solver drives to zero.

    The solver collocates the first-order pair (omega' = n_s,
    n_s' = Vc M n_s) with the omega boundary rows replaced by their
    boundary-value defects.
    """
    g = grid(state.z.size)
    om, ns = state.omega_bar, state.ns
    ms = _model.taxis(state.Gs, params.beta)
    f1 = g.d1 @ om - ns
    f1[0] = om[0] + 1.0
    f1[-1] = om[-1]
    f2 = g.d1 @ ns - params.Vc * ms * ns
    return float(max(np.max(np.abs(f1)), np.max(np.abs(f2))))


def write_profiles_csv(state, path):
    """Profile export: one row per node, full solver precision."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["z", "omega_bar", "ns", "Gs", "Ts",
                    "gamma1", "gamma2", "gamma3"])
        for i in range(state.n):
            w.writerow([_fmt(v[i]) for v in
                        (state.z, state.omega_bar, state.ns, state.Gs,
                         state.Ts, state.gamma1, state.gamma2, state.gamma3)])


def _fmt(x):
    return format(float(x), ".17g")
