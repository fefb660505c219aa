"""Neutral-curve tracing, critical points and bifurcation classification.

A neutral point at wavenumber k is the smallest cell-buoyancy coupling
Rab at which the leading growth rate crosses Re(gamma) = 0. The curve
minimum over a wavenumber window is the critical point; its oscillation
frequency decides between stationary onset and overstability (a Hopf
bifurcation of the rest state).

Two numerical regimes are involved. For k above SMALL_K the growth rate
comes from the dense eigensolver and the neutral value from bracketed
root finding. Below SMALL_K the relevant eigenvalue is the slow
mass-redistribution mode, whose magnitude O(k^2) falls beneath the dense
solver's roundoff; there the neutral value is evaluated from the exact
long-wavelength limit (a solvability condition on the k^2 balance) plus
a quadratic-in-k bridge matched to the eigensolver at SMALL_K.
"""
import csv
import json
import time
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import stability as _stab
from .exceptions import (
    BracketExpansionError,
    NonMonotoneWarning,
    WindowTooNarrowError,
)
from .grid import grid
from . import model as _model

#: wavenumber below which the long-wavelength evaluation takes over
SMALL_K = 0.1
#: limit-vs-anchor differences below this are within eigensolver noise
FLAT_TOL = 0.5
#: frequency magnitude separating stationary from oscillatory branches
OSC_TOL = 1e-6
#: growth rates are treated as neutral below this (scaled) magnitude
NEUTRAL_TOL = 1e-6
#: default root bracket in Rab and the expansion cap
DEFAULT_BRACKET = (0.0, 2000.0)
MAX_EXPANSIONS = 10
#: lowest admissible Rab while probing downward: slightly negative so a
#: thermally supercritical RaT reports its near-zero crossing, but well
#: above the unphysical negative-coupling instabilities of inverted
#: concentration profiles
RAB_FLOOR = -5.0


@dataclass(frozen=True)
class NeutralPoint:
    """One point of a neutral stability curve."""

    k: float
    Rab: float
    im_gamma: float
    branch: str  # "stationary" | "oscillatory"

    @property
    def wavelength(self):
        return 2.0 * np.pi / self.k if self.k > 0 else np.inf


@dataclass(frozen=True)
class CriticalResult:
    """Most unstable neutral point over a wavenumber window.

    ``kc`` is 0 and ``lambda_c`` infinite when the curve minimum sits at
    the long-wavelength edge of the window.
    """

    kc: float
    lambda_c: float
    Rab_c: float
    im_gamma: float
    oscillatory: bool
    params_echo: object


@dataclass(frozen=True)
class NeutralCurve:
    """Traced curve: successful points plus per-sample failures."""

    points: tuple
    failures: tuple  # (k, message) pairs, in sweep order

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]


def mass_branch_limit(state, params):
    """Exact k -> 0 neutral coupling of the mass-redistribution branch.

    The k = 0 concentration operator has a one-dimensional kernel (total
    cell mass is conserved); expanding gamma = k^2 g and forcing the k^2
    balance to be solvable yields a closed expression for the neutral
    Rab. Returns None when the crossing falls at negative Rab, i.e. when
    the branch never becomes neutral for physical couplings.
    """
    n = state.z.size
    g = grid(n)
    d1, d2, d3, d4 = g.d1, g.d2, g.d3, g.d4
    eye = np.eye(n)
    g1, g2, g3 = state.gamma1, state.gamma2, state.gamma3

    # k = 0 concentration operator with its boundary rows
    C = np.diag(g1) + np.diag(g2) @ d1 + np.diag(g3) @ d2 - d3
    C[0, :] = g2[0] * eye[0] + 2.0 * g3[0] * d1[0] - 2.0 * d2[0]
    C[n - 2, :] = (g2[n - 1] * eye[n - 1] + 2.0 * g3[n - 1] * d1[n - 1]
                   - 2.0 * d2[n - 1])
    C[n - 1, :] = eye[n - 1]

    # kernel from the equivalent second-order mass-family problem
    A2 = d2 - np.diag(g3) @ d1 - np.diag(g2 / 2.0)
    A2[0, :] = eye[0]
    A2[-1, :] = eye[n - 1]
    rhs = np.zeros(n)
    rhs[0] = -1.0
    phi0 = np.linalg.solve(A2, rhs)

    # left null vector of C carries the solvability condition
    _, _, vt = np.linalg.svd(C.T)
    u = vt[-1]

    # k^2 flow response: D^4 W2 = -Rab * D phi0 with clamped walls
    K = d4.copy()
    K[0, :] = eye[0]
    K[1, :] = d1[0]
    K[n - 2, :] = d1[n - 1]
    K[n - 1, :] = eye[n - 1]
    rhsw = -(d1 @ phi0)
    rhsw[[0, 1, n - 2, n - 1]] = 0.0
    w2_per_rab = np.linalg.solve(K, rhsw)

    dns = params.Vc * _model.taxis(state.Gs, params.beta) * state.ns
    f_diff = d1 @ phi0
    f_buoy = dns * w2_per_rab
    for v in (f_diff, f_buoy):
        v[[0, n - 2, n - 1]] = 0.0  # boundary rows carry no k^2 forcing
    den = u @ f_buoy
    if den == 0.0:
        return None
    rab_star = -(u @ f_diff) / den
    return float(rab_star) if rab_star > 0.0 else None




def neutral_rayleigh(state, params, k, bracket=None):
    """Neutral coupling at fixed k: the first root of Re(gamma_max)(Rab).

    The bracket (default (0, 2000)) is expanded by doubling, at most ten
    times, until it encloses a sign change; a downward expansion to
    slightly negative Rab is allowed so a thermally supercritical state
    reports its near-zero crossing. Wide brackets are pre-scanned so the
    lowest crossing is returned; multiple crossings raise
    NonMonotoneWarning. Roots are polished to relative tolerance 1e-8.
    """
    if not k > 0:
        raise ValueError(f"wavenumber k must be positive, got {k}")
    if k < SMALL_K:
        return _neutral_longwave(state, params, k)
    if bracket is not None:
        return _neutral_eig(state, params, k, bracket)
    return _neutral_seeded(state, params, k)


def _neutral_seeded(state, params, k):
    """Cold-start path: seed the root from the stationary crossings.

    One eigensolve in Rab yields every gamma = 0 crossing; the smallest
    is accepted directly when the recomputed leading growth rate is
    neutral there, and otherwise an oscillatory branch lies below and a
    downward bracketed root find takes over.
    """
    pencil = _stab.RabPencil(state, params, k)
    cands = pencil.stationary_candidates(floor=RAB_FLOOR)
    if not cands:
        # no stationary crossing below the cap: probe the cap once so a
        # hopeless sample fails in one eigensolve instead of ten
        rab_cap = DEFAULT_BRACKET[1] * 2.0**MAX_EXPANSIONS
        if pencil.leading(rab_cap).real < 0.0:
            raise BracketExpansionError(
                f"no stationary crossing below Rab={rab_cap:.3g} and the "
                f"flow is still stable there at k={k:.6g}"
            )
        return _neutral_eig(state, params, k, None, pencil)
    rs = cands[0]
    lam = pencil.leading(rs)
    if abs(lam.real) <= NEUTRAL_TOL * max(1.0, abs(rs)):
        im = abs(lam.imag) if abs(lam.imag) > OSC_TOL else 0.0
        branch = "oscillatory" if im > 0.0 else "stationary"
        return NeutralPoint(k=float(k), Rab=float(rs), im_gamma=im,
                            branch=branch)
    if lam.real > 0.0:
        # an oscillatory mode is unstable below the stationary crossing;
        # walk down geometrically to bracket it
        hi, lo = rs, None
        probe = rs
        for _ in range(80):
            probe = probe / 10.0 if probe > 1.0 else probe - max(10.0, abs(probe))
            probe = max(probe, RAB_FLOOR)
            fp = pencil.leading(probe).real
            if fp <= 0.0:
                lo = probe
                break
            hi = probe
            if probe <= RAB_FLOOR:
                break
        if lo is None:
            raise BracketExpansionError(
                f"Re(gamma_max) > 0 for every Rab down to {RAB_FLOOR} "
                f"at k={k:.6g}"
            )
        return _bracketed_root(pencil, k, lo, hi)
    # the crossing mode is not leading and the leading mode is stable
    # there; fall back to plain bracket expansion from the crossing
    return _neutral_eig(state, params, k, (rs, rs + max(abs(rs), 100.0)),
                        pencil)


def _neutral_eig(state, params, k, bracket=None, pencil=None):
    lo, hi = bracket if bracket is not None else DEFAULT_BRACKET
    if pencil is None:
        pencil = _stab.RabPencil(state, params, k)

    def f(rab):
        return pencil.leading(rab).real

    flo, fhi = f(lo), f(hi)
    n_exp = 0
    while flo * fhi > 0.0:
        if n_exp >= MAX_EXPANSIONS:
            raise BracketExpansionError(
                f"no sign change of Re(gamma_max) in Rab after "
                f"{MAX_EXPANSIONS} expansions at k={k:.6g} "
                f"(last bracket [{lo:.6g}, {hi:.6g}])"
            )
        if flo > 0.0:
            # already unstable at the lower end: move down
            lo, hi, fhi = max(RAB_FLOOR, lo - (hi - lo)), lo, flo
            flo = f(lo)
            if lo <= RAB_FLOOR and flo > 0.0:
                raise BracketExpansionError(
                    f"Re(gamma_max) > 0 for every Rab down to {RAB_FLOOR} "
                    f"at k={k:.6g}"
                )
        else:
            lo, flo = hi, fhi
            hi = hi * 2.0 if hi > 0 else 2000.0
            fhi = f(hi)
        n_exp += 1
    return _bracketed_root(pencil, k, lo, hi, flo, fhi)


def _bracketed_root(pencil, k, lo, hi, flo=None, fhi=None):
    """Lowest Re(gamma_max) zero inside a sign-changing bracket."""

    def f(rab):
        return pencil.leading(rab).real

    # wide brackets may hide several crossings; keep the lowest
    if hi - lo > 0.25 * max(abs(hi), 1.0):
        grid_r = np.linspace(lo, hi, 9)
        vals = [flo if flo is not None else f(lo)]
        vals += [f(r) for r in grid_r[1:-1]]
        vals += [fhi if fhi is not None else f(hi)]
        sign_changes = [
            i for i in range(8) if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0.0
        ]
        if len(sign_changes) > 1:
            warnings.warn(
                f"{len(sign_changes)} growth-rate sign changes inside "
                f"[{lo:.6g}, {hi:.6g}] at k={k:.6g}; returning the lowest",
                NonMonotoneWarning,
                stacklevel=4,
            )
        i = sign_changes[0]
        lo, hi = grid_r[i], grid_r[i + 1]
        flo, fhi = vals[i], vals[i + 1]

    root, lam = _illinois(pencil, lo, hi, flo, fhi)
    im = abs(lam.imag) if abs(lam.imag) > OSC_TOL else 0.0
    branch = "oscillatory" if im > 0.0 else "stationary"
    return NeutralPoint(k=float(k), Rab=float(root), im_gamma=im,
                        branch=branch)


def _illinois(pencil, a, b, fa=None, fb=None, rtol=1e-9):
    """Anderson-Bjorck false-position root of Re(gamma_max) on [a, b].

    Returns the evaluated point with the smallest |Re gamma| together
    with its full complex eigenvalue, so callers never re-solve at the
    root. Stops when the estimated root error, |f| over the local secant
    slope, falls below rtol relative to the root scale.
    """
    if fa is None:
        fa = pencil.leading(a).real
    if fb is None:
        fb = pencil.leading(b).real
    if fa == 0.0:
        return a, pencil.leading(a)
    if fb == 0.0:
        return b, pencil.leading(b)
    if fa * fb > 0.0:
        raise BracketExpansionError(
            f"lost the sign change while polishing [{a:.6g}, {b:.6g}]"
        )
    best = (np.inf, None, None)
    last = 0
    for _ in range(100):
        x = (a * fb - b * fa) / (fb - fa)
        lo, hi = (a, b) if a < b else (b, a)
        if not (lo < x < hi):
            x = 0.5 * (a + b)
        lam = pencil.leading(x)
        fx = lam.real
        if abs(fx) < best[0]:
            best = (abs(fx), x, lam)
        slope = abs((fb - fa) / (b - a))
        if fx == 0.0 or abs(fx) <= rtol * max(1.0, abs(x)) * slope:
            return x, lam
        if fx * fa > 0.0:
            # x is on the a side; the root lies in (x, b)
            if last == 1:
                m = 1.0 - fx / fa
                fb *= m if m > 0.0 else 0.5
            a, fa = x, fx
            last = 1
        else:
            if last == 2:
                m = 1.0 - fx / fb
                fa *= m if m > 0.0 else 0.5
            b, fb = x, fx
            last = 2
        if abs(b - a) <= rtol * max(1.0, abs(a), abs(b)):
            break
    return best[1], best[2]


class _LongwaveBranch:
    """Shared small-k evaluator: exact limit plus a quadratic bridge.

    Below SMALL_K the mass-redistribution eigenvalue is O(k^2) and falls
    beneath the dense eigensolver's roundoff, so its neutral coupling is
    evaluated from the analytic k -> 0 limit blended quadratically into
    the eigensolver value at SMALL_K. Both anchors are computed once.
    """

    def __init__(self, state, params):
        self.state = state
        self.params = params
        self.rab_star = mass_branch_limit(state, params)
        self._c2 = None

    @property
    def curvature(self):
        """Bridge curvature; negative within noise of flat is clamped."""
        if self._c2 is None:
            anchor = _neutral_seeded(self.state, self.params, SMALL_K)
            c2 = (anchor.Rab - self.rab_star) / SMALL_K**2
            if c2 < 0.0 and self.rab_star - anchor.Rab < FLAT_TOL:
                c2 = 0.0
            self._c2 = c2
        return self._c2

    def point(self, k):
        """Neutral point at k < SMALL_K, or None if no mass crossing."""
        if self.rab_star is None:
            return None
        rab = self.rab_star + self.curvature * k * k
        return NeutralPoint(k=float(k), Rab=float(rab), im_gamma=0.0,
                            branch="stationary")


def _neutral_longwave(state, params, k):
    """Neutral value below SMALL_K via the long-wavelength limit.

    Falls back to the eigensolver path when the mass branch has no
    physical crossing.
    """
    pt = _LongwaveBranch(state, params).point(k)
    if pt is None:
        return _neutral_seeded(state, params, k)
    return pt


def trace_neutral_curve(state, params, k_min, k_max, n_samples=60):
    """Neutral points on a logarithmic wavenumber grid.

    Brackets are warm-started from the previous sample; per-sample
    failures are recorded without aborting the sweep. A branch switch
    between adjacent samples triggers a local 4x grid refinement so the
    bifurcation point of the oscillatory branch is resolved.
    """
    if not 0.0 < k_min < k_max:
        raise ValueError(f"need 0 < k_min < k_max, got ({k_min}, {k_max})")
    if n_samples < 2:
        raise ValueError(f"n_samples must be at least 2, got {n_samples}")
    ks = np.geomspace(k_min, k_max, n_samples)
    points, failures = [], []
    prev = prev2 = None
    longwave = _LongwaveBranch(state, params) if ks[0] < SMALL_K else None
    for k in ks:
        if k < SMALL_K and longwave is not None:
            pt = longwave.point(k)
            if pt is not None:
                points.append(pt)
                prev2, prev = None, pt
                continue
        pt, prev, prev2 = _trace_sample(state, params, k, prev, prev2,
                                        failures)
        if pt is not None:
            points.append(pt)

    # 4x local refinement around branch switches; require a frequency
    # clearly above the tag threshold so noise cannot trigger refinement
    refined = list(points)
    for a, b in zip(points[:-1], points[1:]):
        if a.branch != b.branch and max(a.im_gamma, b.im_gamma) > 50 * OSC_TOL:
            extra = np.geomspace(a.k, b.k, 5)[1:-1]
            prev = a
            for k in extra:
                pt, prev, _ = _trace_sample(state, params, k, prev, None,
                                            failures)
                if pt is not None:
                    refined.append(pt)
    refined.sort(key=lambda p: p.k)
    return NeutralCurve(points=tuple(refined), failures=tuple(failures))


def _trace_sample(state, params, k, prev, prev2, failures):
    # oscillatory roots are invisible to the stationary seeder, so warm
    # brackets carry them between samples; stationary samples re-seed
    bracket = None
    if (prev is not None and prev.branch == "oscillatory"
            and np.isfinite(prev.Rab)):
        guess = prev.Rab
        if (prev2 is not None and prev2.branch == "oscillatory"
                and prev2.k != prev.k):
            slope = (prev.Rab - prev2.Rab) / np.log(prev.k / prev2.k)
            guess = prev.Rab + slope * np.log(k / prev.k)
        w = max(0.04 * abs(guess), 0.02 * abs(prev.Rab), 5.0)
        bracket = (guess - w, guess + w)
    try:
        try:
            pt = neutral_rayleigh(state, params, k, bracket)
        except BracketExpansionError:
            if bracket is None:
                raise
            pt = neutral_rayleigh(state, params, k, None)
    except Exception as exc:  # record and continue the sweep
        failures.append((float(k), f"{type(exc).__name__}: {exc}"))
        return None, prev, prev2
    return pt, pt, prev


def find_critical(state, params, k_window=(0.01, 10.0), n_samples=60):
    """Global minimum of the neutral curve over the wavenumber window.

    The sampled minimum is refined to 1e-5 relative in k. A minimum that
    sits at the lower window edge with k < 0.1 is reported as an
    infinite-wavelength onset with the coupling evaluated at k = 0.01;
    a minimum abutting the upper edge raises WindowTooNarrowError. When
    stationary and oscillatory branches coexist the reported point is
    the lower one, with the oscillation flag set accordingly.
    """
    k_lo, k_hi = k_window
    curve = trace_neutral_curve(state, params, k_lo, k_hi, n_samples)
    if not curve.points:
        raise BracketExpansionError(
            "no neutral point could be located anywhere in the window; "
            f"failures: {curve.failures[:3]}"
        )
    pts = curve.points
    i_min = int(np.argmin([p.Rab for p in pts]))
    best = pts[i_min]

    if i_min == len(pts) - 1:
        raise WindowTooNarrowError(
            f"neutral-curve minimum abuts the upper edge of the computed "
            f"window at k={best.k:.6g}"
        )

    if best.k < SMALL_K:
        lwb = _LongwaveBranch(state, params)
        if lwb.rab_star is not None and lwb.curvature >= 0.0:
            # the long-wavelength branch descends monotonically to the
            # window edge: an infinite-wavelength onset
            edge = lwb.point(0.01)
            return CriticalResult(kc=0.0, lambda_c=np.inf,
                                  Rab_c=max(edge.Rab, 0.0),
                                  im_gamma=edge.im_gamma,
                                  oscillatory=edge.im_gamma > OSC_TOL,
                                  params_echo=params)
        # descending bridge: the true minimum sits at k >= SMALL_K
        eligible = [p for p in pts if p.k >= SMALL_K]
        if not eligible:
            raise WindowTooNarrowError(
                "no neutral samples beyond the long-wavelength region"
            )
        i_min = pts.index(min(eligible, key=lambda p: p.Rab))
        best = pts[i_min]
        if i_min == len(pts) - 1:
            raise WindowTooNarrowError(
                f"neutral-curve minimum abuts the upper edge of the "
                f"computed window at k={best.k:.6g}"
            )

    lo = pts[i_min - 1].k if i_min > 0 else best.k
    hi = pts[i_min + 1].k
    cache = {}

    def rab_of_k(k):
        if k not in cache:
            try:
                cache[k] = neutral_rayleigh(
                    state, params, k,
                    (0.75 * best.Rab - 10.0, 1.3 * best.Rab + 10.0))
            except BracketExpansionError:
                cache[k] = neutral_rayleigh(state, params, k)
        return cache[k].Rab

    res = optimize.minimize_scalar(rab_of_k, bounds=(lo, hi),
                                   method="bounded",
                                   options={"xatol": 1e-5 * best.k})
    kc = float(res.x)
    final = cache.get(kc) or neutral_rayleigh(state, params, kc)
    rab_c = final.Rab
    if rab_c < 0.0:
        rab_c = 0.0  # thermally supercritical anchor; see ledger
    return CriticalResult(kc=kc, lambda_c=2.0 * np.pi / kc, Rab_c=rab_c,
                          im_gamma=final.im_gamma,
                          oscillatory=final.im_gamma > OSC_TOL,
                          params_echo=params)


def classify_bifurcation(point):
    """'Hopf' when the neutral mode oscillates, 'stationary' otherwise."""
    return "Hopf" if abs(point.im_gamma) > OSC_TOL else "stationary"


def oscillation_period(point):
    """Period 2 pi / |Im gamma| of a Hopf point."""
    if abs(point.im_gamma) <= OSC_TOL:
        raise ValueError("stationary point has no oscillation period")
    return 2.0 * np.pi / abs(point.im_gamma)


def write_curve_csv(curve, path):
    """Neutral-curve export: k, lambda, Rab, im_gamma, branch."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["k", "lambda", "Rab", "im_gamma", "branch"])
        for p in curve:
            w.writerow([_fmt(p.k), _fmt(p.wavelength), _fmt(p.Rab),
                        _fmt(p.im_gamma), p.branch])


def critical_to_json(result, path, extra=None):
    """Critical-point export with solver metadata."""
    p = result.params_echo
    doc = {
        "kc": result.kc,
        "lambda_c": "inf" if np.isinf(result.lambda_c) else result.lambda_c,
        "Rab_c": result.Rab_c,
        "im_gamma": result.im_gamma,
        "oscillatory": result.oscillatory,
        "branch": "Hopf" if result.oscillatory else "stationary",
        "params": {
            "Sc": p.Sc, "Le": p.Le, "Vc": p.Vc, "kappa": p.kappa,
            "Gt": p.Gt, "beta": p.beta, "Gc": p.Gc, "RaT": p.RaT, "N": p.N,
        },
        "solver": {
            "resolution": p.N,
            "neutral_rtol": 1e-8,
            "k_rtol": 1e-5,
            "small_k_switch": SMALL_K,
        },
    }
    if result.oscillatory:
        doc["period"] = 2.0 * np.pi / abs(result.im_gamma)
    if extra:
        doc["solver"].update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _fmt(x):
    x = float(x)
    if np.isinf(x):
        return "inf"
    return format(x, ".17g")
