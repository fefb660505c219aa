"""Physical-space perturbation fields from eigenmodes.

A mode with amplitudes (W, Theta, T) and growth rate gamma generates the
two-dimensional roll fields

    w1(x, z, t) = Re[ W(z) exp(gamma t + i k x) ],

and likewise for the concentration (from Theta) and temperature
perturbations. Rendering fixes Re(gamma) = 0 so snapshot sequences of a
neutral mode neither grow nor decay; oscillatory modes then translate
horizontally at the phase speed Im(gamma)/k.
"""
import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import StationaryModeError
from .grid import grid

_OSC_TOL = 1e-6


@dataclass(frozen=True)
class FieldSnapshot:
    """Perturbation fields over one horizontal wavelength at one time.

    Arrays are indexed [ix, iz]; x spans [0, 2 pi / k] inclusive so the
    first and last columns repeat periodically.
    """

    x: np.ndarray
    z: np.ndarray
    w1: np.ndarray
    n1: np.ndarray
    T1: np.ndarray
    t: float
    phase_index: int


def mode_to_fields(mode, k, t=0.0, nx=64, nz=48, phase_index=0,
                   zero_growth=True):
    """Evaluate the roll fields of a mode at time t.

    The vertical profiles are interpolated from the collocation grid to
    nz uniform levels; nx uniform stations cover one wavelength. With
    ``zero_growth`` (the default) the real part of gamma is dropped, so
    stationary neutral modes are time-independent and oscillatory ones
    purely translate.
    """
    if nx < 8 or nz < 8:
        raise ValueError(f"need nx, nz >= 8, got ({nx}, {nz})")
    if not k > 0:
        raise ValueError(f"wavenumber k must be positive, got {k}")
    gamma = complex(mode.gamma)
    if zero_growth:
        gamma = 1j * gamma.imag
    x = np.linspace(0.0, 2.0 * np.pi / k, nx)
    z = np.linspace(0.0, 1.0, nz)
    g = grid(mode.z.size)
    profs = [g.interpolate(p, z) for p in (mode.W, mode.Theta, mode.T)]
    carrier = np.exp(gamma * t + 1j * k * x)[:, None]
    w1, n1, T1 = (np.real(carrier * p[None, :]) for p in profs)
    return FieldSnapshot(x=x, z=z, w1=w1, n1=n1, T1=T1, t=float(t),
                         phase_index=phase_index)


def oscillation_snapshots(mode, k, n_snapshots=4, nx=64, nz=48):
    """Equally spaced snapshots across one oscillation period."""
    if n_snapshots < 2:
        raise ValueError(f"need n_snapshots >= 2, got {n_snapshots}")
    om = abs(complex(mode.gamma).imag)
    if om <= _OSC_TOL:
        raise StationaryModeError(
            "oscillation snapshots need an oscillatory mode; "
            f"Im(gamma) = {complex(mode.gamma).imag:.3e}"
        )
    period = 2.0 * np.pi / om
    times = [period * i / n_snapshots for i in range(n_snapshots)]
    return [mode_to_fields(mode, k, t=t, nx=nx, nz=nz, phase_index=i)
            for i, t in enumerate(times)]


def time_series(mode, k, probe, t_max, n_steps=200, zero_growth=True):
    """Probe series of w1 plus its time derivative for phase portraits.

    Returns (t, w1, dw1_dt) sampled at the probe point (x, z).
    """
    xp, zp = probe
    if not (0.0 <= zp <= 1.0):
        raise ValueError(f"probe z={zp} outside the layer [0, 1]")
    gamma = complex(mode.gamma)
    if zero_growth:
        gamma = 1j * gamma.imag
    g = grid(mode.z.size)
    Wp = complex(g.interpolate(mode.W, np.array([zp]))[0])
    t = np.linspace(0.0, t_max, n_steps)
    phase = Wp * np.exp(gamma * t + 1j * k * xp)
    return t, np.real(phase), np.real(gamma * phase)


def with_total_temperature(snap, eps=0.1):
    """Snapshot with the temperature column as conduction plus eps * T1.

    The rendering amplitude of a linear mode is arbitrary; eps = 0.1 keeps
    the perturbation visibly below the conduction profile 1 - z.
    """
    total = (1.0 - snap.z)[None, :] + eps * snap.T1
    return FieldSnapshot(x=snap.x, z=snap.z, w1=snap.w1, n1=snap.n1,
                         T1=total, t=snap.t, phase_index=snap.phase_index)


def write_fields_csv(snapshots, path, concatenate=True):
    """Long-format field export: t, x, z, w1, n1, T1.

    With ``concatenate`` all snapshots go into one file at ``path``;
    otherwise one file per snapshot is written with the phase index
    spliced into the name, and the list of paths is returned.
    """
    if isinstance(snapshots, FieldSnapshot):
        snapshots = [snapshots]
    if concatenate:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "x", "z", "w1", "n1", "T1"])
            for snap in snapshots:
                _write_rows(w, snap)
        return [path]
    paths = []
    stem, dot, ext = str(path).rpartition(".")
    if not dot:
        stem, ext = str(path), "csv"
    for snap in snapshots:
        p = f"{stem}_{snap.phase_index:03d}.{ext}"
        with open(p, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["t", "x", "z", "w1", "n1", "T1"])
            _write_rows(w, snap)
        paths.append(p)
    return paths


def _write_rows(w, snap):
    for i, xv in enumerate(snap.x):
        for j, zv in enumerate(snap.z):
            w.writerow([_fmt(snap.t), _fmt(xv), _fmt(zv),
                        _fmt(snap.w1[i, j]), _fmt(snap.n1[i, j]),
                        _fmt(snap.T1[i, j])])


def _fmt(x):
    return format(float(x), ".17g")
