"""Linearized perturbation operators and the growth-rate eigenproblem.

Normal-mode perturbations exp(gamma t + i k x) about the equilibrium
reduce to a one-dimensional generalized eigenproblem

    A(k) y = gamma B(k) y,     y = (W, Phi, T),

where W is the vertical velocity amplitude, Phi the vertically integrated
concentration amplitude (the concentration itself is Theta = D Phi) and T
the temperature amplitude. Interior collocation rows encode

    momentum:      (k^2 - D^2)(D^2 - k^2) W
                       = Rab k^2 D Phi - RaT Le k^2 T - gamma/Sc (D^2-k^2) W
    concentration: g1 Phi + (k^2 + g2) D Phi + g3 D^2 Phi - D^3 Phi
                       + (Dn_s) W = -gamma D Phi
    energy:        Le (D^2 - k^2) T + W = gamma T

and boundary rows replace the collocation rows nearest each wall:
rigid no-slip W = DW = 0, zero perturbed cell flux
g2 Phi + 2 g3 D Phi - 2 D^2 Phi = 0, fixed temperature T = 0, and the
closure Phi(1) = 0 of the integrated concentration.

Collocation of stiff boundary-value problems always produces spurious
eigenvalues. Two filters are applied: a magnitude cap discards
discretization artifacts with |gamma| > 10 (3N)^2, and a cross-resolution
test discards eigenvalues that move by more than 1e-3 relative between
resolutions N and N+16.
"""
import csv
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .basic_state import solve_basic_state
from .exceptions import (
    AllSpuriousError,
    DimensionMismatchError,
    EigensolverError,
    NoMatchingEigenvalueError,
)
from .grid import grid
from . import model as _model

#: relative movement between resolutions above which a mode is spurious
CROSS_RESOLUTION_TOL = 1e-3
#: resolution increment used by the cross-resolution filter
CROSS_RESOLUTION_STEP = 16
#: default cap on how many leading eigenvalues may be requested
MAX_LEADING = 20


@dataclass(frozen=True)
class StabilityOperators:
    """The discretized pencil (A, B) at one horizontal wavenumber.

    ``bc_rows`` lists the rows holding boundary conditions; those rows
    are identically zero in B. The originating state and parameters ride
    along so that filtering can rebuild the pencil at a finer resolution.
    """

    A: np.ndarray
    B: np.ndarray
    k: float
    bc_rows: tuple
    params: object = None
    state: object = None

    def __post_init__(self):
        self.A.setflags(write=False)
        self.B.setflags(write=False)

    @property
    def order(self):
        return self.A.shape[0]


@dataclass(frozen=True)
class EigenMode:
    """One eigenpair split into physical amplitude profiles.

    Profiles live on the collocation grid ``z``; Theta = D Phi is the
    concentration amplitude. Normalization: max |W| = 1 with the largest
    entry of W rotated to the positive real axis.
    """

    gamma: complex
    z: np.ndarray
    W: np.ndarray
    Phi: np.ndarray
    Theta: np.ndarray
    T: np.ndarray


def assemble_operators(state, params, k):
    """Build the pencil (A, B) of the perturbation eigenproblem.

    Rab and RaT are taken from ``params``. The fourth-order momentum
    operator is kept as a single block on W with D^4 formed by squaring
    the spectral second-derivative matrix; boundary conditions replace
    the two collocation rows nearest each wall.
    """
    if state.z.size != params.N:
        raise DimensionMismatchError(
            f"state grid has {state.z.size} points, params.N = {params.N}"
        )
    if not k > 0:
        raise ValueError(f"wavenumber k must be positive, got {k}")
    n = params.N
    g = grid(n)
    d1, d2, d3 = g.d1, g.d2, g.d3
    eye = np.eye(n)
    lap = d2 - k * k * eye
    Sc, Le, Vc = params.Sc, params.Le, params.Vc
    Rab, RaT = params.Rab, params.RaT

    A = np.zeros((3 * n, 3 * n))
    B = np.zeros((3 * n, 3 * n))
    sW = slice(0, n)
    sP = slice(n, 2 * n)
    sT = slice(2 * n, 3 * n)

    # momentum block
    A[sW, sW] = -(lap @ lap)
    A[sW, sP] = -Rab * k * k * d1
    A[sW, sT] = RaT * Le * k * k * eye
    B[sW, sW] = -(1.0 / Sc) * lap

    # concentration block; Dn_s = Vc M_s n_s exactly on the equilibrium
    dns = Vc * _model.taxis(state.Gs, params.beta) * state.ns
    A[sP, sW] = np.diag(dns)
    A[sP, sP] = (np.diag(state.gamma1) + np.diag(k * k + state.gamma2) @ d1
                 + np.diag(state.gamma3) @ d2 - d3)
    B[sP, sP] = -d1

    # energy block; D T_s = -1 for the conduction profile
    A[sT, sW] = eye
    A[sT, sT] = Le * lap
    B[sT, sT] = eye

    # boundary rows
    bc = (0, 1, n - 2, n - 1,          # W = DW = 0 at both walls
          n, 2 * n - 2, 2 * n - 1,     # cell flux at both walls, Phi(1) = 0
          2 * n, 3 * n - 1)            # T = 0 at both walls
    for r in bc:
        A[r, :] = 0.0
        B[r, :] = 0.0
    A[0, sW] = eye[0]
    A[1, sW] = d1[0]
    A[n - 2, sW] = d1[n - 1]
    A[n - 1, sW] = eye[n - 1]
    g2, g3_ = state.gamma2, state.gamma3
    A[n, sP] = g2[0] * eye[0] + 2.0 * g3_[0] * d1[0] - 2.0 * d2[0]
    A[2 * n - 2, sP] = (g2[n - 1] * eye[n - 1] + 2.0 * g3_[n - 1] * d1[n - 1]
                        - 2.0 * d2[n - 1])
    A[2 * n - 1, sP] = eye[n - 1]
    A[2 * n, sT] = eye[0]
    A[3 * n - 1, sT] = eye[n - 1]

    return StabilityOperators(A=A, B=B, k=float(k), bc_rows=bc,
                              params=params, state=state)


def _equilibrate(A, B):
    """Scale rows to unit max magnitude; eigenvalues are unchanged."""
    s = np.maximum(np.abs(A).max(axis=1), np.abs(B).max(axis=1))
    s[s == 0.0] = 1.0
    return A / s[:, None], B / s[:, None]


def _solve_pencil(A, B, vectors=False):
    As, Bs = _equilibrate(A, B)
    try:
        if vectors:
            ev, vecs = linalg.eig(As, Bs, check_finite=False)
        else:
            ev = linalg.eigvals(As, Bs, check_finite=False)
            vecs = None
    except linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise EigensolverError(f"generalized eigensolver failed: {exc}") from exc
    keep = np.isfinite(ev)
    ev = ev[keep]
    if vecs is not None:
        vecs = vecs[:, keep]
    return ev, vecs


def _magnitude_filter(ev, order):
    return ev[np.abs(ev) < 10.0 * order**2]


def _sort_leading(ev):
    """Descending real part; conjugates ordered positive-imaginary first."""
    idx = np.lexsort((-ev.imag, -np.abs(ev.imag), -ev.real))
    return ev[idx]


def eigenvalues_raw(ops):
    """All finite eigenvalues below the magnitude cap, sorted leading-first.

    Single-resolution fast path: no cross-resolution filtering. Used by
    the neutral-curve root finders where thousands of solves are needed;
    the leading modes it returns agree with the filtered ones whenever
    the discretization is converged.
    """
    ev, _ = _solve_pencil(ops.A, ops.B)
    ev = _magnitude_filter(ev, ops.order)
    if ev.size == 0:
        raise AllSpuriousError("magnitude cap rejected every eigenvalue")
    return _sort_leading(ev)


def leading_eigenvalues(ops, count=6):
    """Physical leading eigenvalues after spurious-mode filtering.

    Eigenvalues are kept only if a partner within relative distance
    CROSS_RESOLUTION_TOL exists in the spectrum recomputed at resolution
    N + 16; the result is closed under complex conjugation and sorted by
    descending real part.
    """
    if count < 1 or count > MAX_LEADING:
        raise ValueError(f"count must be in 1..{MAX_LEADING}, got {count}")
    ev = eigenvalues_raw(ops)
    if ops.params is None or ops.state is None:
        return ev[:count].copy()
    fine = _reference_spectrum(ops)
    kept = []
    for lam in ev:
        d = np.min(np.abs(fine - lam)) / max(1.0, abs(lam))
        if d <= CROSS_RESOLUTION_TOL:
            kept.append(lam)
        if len(kept) >= count + 2:
            break
    if not kept:
        raise AllSpuriousError(
            "cross-resolution filter rejected every eigenvalue candidate"
        )
    top = _sort_leading(np.array(kept))[:count]
    # close the returned window under conjugation
    out = list(top)
    for lam in top:
        if lam.imag != 0.0 and not np.any(np.isclose(out, lam.conjugate())):
            out.append(lam.conjugate())
    return _sort_leading(np.array(out))


def _reference_spectrum(ops):
    params = ops.params.with_(N=ops.params.N + CROSS_RESOLUTION_STEP)
    state = solve_basic_state(params)
    fine = assemble_operators(state, params, ops.k)
    ev, _ = _solve_pencil(fine.A, fine.B)
    return _magnitude_filter(ev, fine.order)


class RabPencil:
    """The pencil at fixed k as an affine function of the coupling Rab.

    A(Rab) = A0 - Rab * C with C the buoyancy block; building it once
    lets root finders vary Rab (including slightly negative probe values
    near a thermally supercritical anchor) without reassembly or
    parameter validation.
    """

    def __init__(self, state, params, k):
        ops = assemble_operators(state, params.with_(Rab=0.0), k)
        n = params.N
        C = np.zeros_like(ops.A)
        C[0:n, n:2 * n] = k * k * grid(n).d1
        for r in ops.bc_rows:
            C[r, :] = 0.0
        self.A0 = ops.A
        self.B = ops.B
        self.C = C
        self.order = ops.order
        self.k = float(k)

    def spectrum(self, rab):
        """Cap-filtered spectrum at coupling rab, sorted leading-first."""
        ev, _ = _solve_pencil(self.A0 - rab * self.C, self.B)
        ev = _magnitude_filter(ev, self.order)
        if ev.size == 0:
            raise AllSpuriousError("magnitude cap rejected every eigenvalue")
        return _sort_leading(ev)

    def leading(self, rab):
        return complex(self.spectrum(rab)[0])

    def stationary_candidates(self, floor=-5.0, cap=2.048e6):
        """Couplings at which some mode is exactly steady (gamma = 0).

        With gamma = 0 the neutral condition is itself a generalized
        eigenproblem, A0 y = Rab C y; the smallest real candidate is the
        lowest stationary crossing of the whole spectrum.
        """
        ev, _ = _solve_pencil(self.A0, self.C)
        ev = ev[np.abs(ev.imag) <= 1e-8 * np.maximum(1.0, np.abs(ev.real))]
        vals = np.sort(ev.real)
        return [float(v) for v in vals if floor < v < cap]


def growth_rate(state, params, k, Rab=None):
    """Leading complex growth rate at wavenumber k and coupling Rab.

    Applies both spurious-mode filters (magnitude cap and the
    cross-resolution test at N + 16) and returns the surviving
    eigenvalue with the largest real part; ties are broken toward larger
    |Im gamma|, then positive Im gamma. The basic state becomes unstable
    when the real part is positive.
    """
    rab = params.Rab if Rab is None else float(Rab)
    ev = RabPencil(state, params, k).spectrum(rab)
    fine_params = params.with_(N=params.N + CROSS_RESOLUTION_STEP, Rab=0.0)
    fine_state = solve_basic_state(fine_params)
    fine = RabPencil(fine_state, fine_params, k).spectrum(rab)
    for lam in ev[:40]:
        if np.min(np.abs(fine - lam)) <= CROSS_RESOLUTION_TOL * max(1.0, abs(lam)):
            return complex(lam)
    raise AllSpuriousError(
        "cross-resolution filter rejected every leading eigenvalue"
    )


def growth_rate_fast(state, params, k, Rab=None):
    """Leading growth rate by the single-resolution fast path."""
    rab = params.Rab if Rab is None else float(Rab)
    return RabPencil(state, params, k).leading(rab)


def eigenmode(ops, gamma_target):
    """Extract and normalize the eigenvector for a computed eigenvalue.

    ``gamma_target`` must lie within 1e-6 (relative to max(1, |gamma|))
    of an eigenvalue of the pencil. The returned profiles satisfy the
    boundary rows to the eigensolver's accuracy and max |W| = 1 with the
    largest-modulus entry of W made real positive.
    """
    ev, vecs = _solve_pencil(ops.A, ops.B, vectors=True)
    ev_f = _magnitude_filter(ev, ops.order)
    if ev_f.size == 0:
        raise AllSpuriousError("magnitude cap rejected every eigenvalue")
    dist = np.abs(ev - gamma_target) / max(1.0, abs(gamma_target))
    i = int(np.argmin(dist))
    if dist[i] > 1e-6:
        raise NoMatchingEigenvalueError(
            f"no eigenvalue within 1e-6 of {gamma_target}; closest is "
            f"{ev[i]} at relative distance {dist[i]:.3e}"
        )
    lam = complex(ev[i])
    y = vecs[:, i].astype(complex)
    n = ops.order // 3
    W = y[:n]
    Phi = y[n:2 * n]
    T = y[2 * n:]
    # phase-fix and scale on the velocity amplitude; fall back to the
    # largest component overall for modes with negligible flow
    ref = W if np.max(np.abs(W)) > 1e-12 * np.max(np.abs(y)) else y
    pivot = ref[int(np.argmax(np.abs(ref)))]
    W, Phi, T = W / pivot, Phi / pivot, T / pivot
    g = grid(n)
    z = ops.state.z.copy() if ops.state is not None else g.z.copy()
    theta = g.d1 @ Phi
    mode = EigenMode(gamma=lam, z=z, W=W, Phi=Phi, Theta=theta, T=T)
    res = eigenpair_residual(ops, mode)
    if res > 1e-8:
        raise EigensolverError(
            f"eigenpair residual {res:.3e} exceeds 1e-8 for gamma={lam}"
        )
    return mode


def eigenpair_residual(ops, mode):
    """Relative residual ||A y - gamma B y|| / ||y|| on equilibrated rows."""
    y = np.concatenate([mode.W, mode.Phi, mode.T])
    As, Bs = _equilibrate(ops.A, ops.B)
    r = As @ y - mode.gamma * (Bs @ y)
    return float(np.linalg.norm(r) / np.linalg.norm(y))


def boundary_residuals(mode, state):
    """Boundary-condition defects relative to the mode's max amplitude."""
    n = mode.z.size
    g = grid(n)
    d1, d2 = g.d1, g.d2
    W, Phi, T = mode.W, mode.Phi, mode.T
    g2, g3 = state.gamma2, state.gamma3
    amp = max(np.max(np.abs(W)), np.max(np.abs(Phi)), np.max(np.abs(T)))
    vals = [
        W[0], W[-1], d1[0] @ W, d1[-1] @ W,
        g2[0] * Phi[0] + 2 * g3[0] * (d1[0] @ Phi) - 2 * (d2[0] @ Phi),
        g2[-1] * Phi[-1] + 2 * g3[-1] * (d1[-1] @ Phi) - 2 * (d2[-1] @ Phi),
        Phi[-1], T[0], T[-1],
    ]
    return np.abs(np.array(vals)) / amp


def write_spectrum_csv(path, k, Rab, RaT, eigenvalues):
    """Spectrum dump, one row per eigenvalue, sorted leading-first."""
    ev = _sort_leading(np.asarray(eigenvalues, dtype=complex))
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["k", "Rab", "RaT", "re_gamma", "im_gamma"])
        for lam in ev:
            w.writerow([_fmt(k), _fmt(Rab), _fmt(RaT),
                        _fmt(lam.real), _fmt(lam.imag)])


def _fmt(x):
    return format(float(x), ".17g")
