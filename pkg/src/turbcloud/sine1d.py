"""One-sine 1-D particle systems.

Full system, fluid made of one travelling sine:

    dX/dt = C,   dC/dt = (a sin(2 pi (omega t + k X) + phi) - C) / tau_p

Reduced autonomous system, obtained with ``a' = k a``,
``X' = k X + omega t + phi/(2 pi)``, ``C' = k C + omega``:

    dX'/dt = C',  dC'/dt = (a' sin(2 pi X') + omega - C') / tau_p

Frequencies and wavenumbers here count cycles (the argument carries an
explicit 2 pi), unlike the radian convention of the turbulence module.

For ``omega > |a'|`` the speed band ``[omega - |a'|, omega + |a'|]`` is
absorbing, so ``X'`` drifts at mean speed near ``omega`` with bounded
oscillations around the drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ._trig import fast_sin
from .errors import InsufficientData, InvalidParameter
from .rng import as_stream
from .stats import linear_fit

TWO_PI = 2.0 * math.pi
N_WINDOWS = 20
WINDOW_RATIO = 2.0


@dataclass(frozen=True)
class SineParams:
    a: float = 1.0
    omega: float = 2.0
    k: float = 1.0
    phi: float = 0.0
    tau_p: float = 1.0

    def __post_init__(self):
        if not self.tau_p > 0:
            raise InvalidParameter("tau_p must be positive", module="sine1d")

    def reduced(self) -> "ReducedParams":
        return ReducedParams(self.k * self.a, self.omega, self.tau_p)

    def to_reduced(self, t, x, c):
        """Map full-system state at time ``t`` to reduced variables ``(X', C')``."""
        t = np.asarray(t, dtype=float)
        xr = self.k * np.asarray(x) + (self.omega * t if np.ndim(x) <= 1 else self.omega * t[:, None])
        cr = self.k * np.asarray(c) + self.omega
        return xr + self.phi / TWO_PI, cr


@dataclass(frozen=True)
class ReducedParams:
    a_r: float = 1.0
    omega: float = 2.0
    tau_p: float = 1.0

    def __post_init__(self):
        if not self.tau_p > 0:
            raise InvalidParameter("tau_p must be positive", module="sine1d")

    @property
    def band(self):
        return self.omega - abs(self.a_r), self.omega + abs(self.a_r)


@njit(error_model="numpy", fastmath={"contract"}, cache=True)
def _accel(reduced, t, x, c, a, om, k, phi, inv_tau):
    if reduced:
        return (a * fast_sin(TWO_PI * x) + om - c) * inv_tau
    return (a * fast_sin(TWO_PI * (om * t + k * x) + phi) - c) * inv_tau


@njit(error_model="numpy", fastmath={"contract"}, cache=True)
def _rk4_run(reduced, xs, cs, t0, dt, nsteps, stride, a, om, k, phi, tau_p, out_x, out_c):
    inv_tau = 1.0 / tau_p
    half = 0.5 * dt
    P = xs.size
    out_x[0, :] = xs
    out_c[0, :] = cs
    row = 1
    for s in range(nsteps):
        t = t0 + s * dt
        for p in range(P):
            x = xs[p]
            c = cs[p]
            a1 = _accel(reduced, t, x, c, a, om, k, phi, inv_tau)
            x2 = x + half * c
            c2 = c + half * a1
            a2 = _accel(reduced, t + half, x2, c2, a, om, k, phi, inv_tau)
            x3 = x + half * c2
            c3 = c + half * a2
            a3 = _accel(reduced, t + half, x3, c3, a, om, k, phi, inv_tau)
            x4 = x + dt * c3
            c4 = c + dt * a3
            a4 = _accel(reduced, t + dt, x4, c4, a, om, k, phi, inv_tau)
            xs[p] = x + dt / 6.0 * (c + 2.0 * c2 + 2.0 * c3 + c4)
            cs[p] = c + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        if (s + 1) % stride == 0:
            out_x[row, :] = xs
            out_c[row, :] = cs
            row += 1


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray   # (T,) or (T, P)
    c: np.ndarray


@dataclass
class ReducedTrajectory(Trajectory):
    omega: float = 0.0

    @property
    def y(self):
        """Position relative to the uniform drift, ``X' - omega t``."""
        return self.x - (self.omega * self.t if self.x.ndim == 1 else self.omega * self.t[:, None])

    @property
    def v(self):
        """Speed relative to the drift, ``C' - omega``."""
        return self.c - self.omega


def _grid(dt, t_end, output_every):
    if not dt > 0:
        raise InvalidParameter("dt must be positive", module="sine1d")
    nsteps = int(round(t_end / dt))
    if nsteps < 1 or not math.isclose(nsteps * dt, t_end, rel_tol=1e-9):
        raise InvalidParameter(f"t_end={t_end} must be a positive multiple of dt={dt}", module="sine1d")
    stride = 1 if output_every is None else int(round(output_every / dt))
    if stride < 1 or nsteps % stride:
        raise InvalidParameter("output_every must be a multiple of dt dividing t_end", module="sine1d")
    return nsteps, stride


def _run(reduced, x0, c0, t0, dt, t_end, output_every, a, om, k, phi, tau_p):
    nsteps, stride = _grid(dt, t_end, output_every)
    scalar = np.ndim(x0) == 0
    xs = np.atleast_1d(np.array(x0, dtype=float))
    cs = np.broadcast_to(np.asarray(c0, dtype=float), xs.shape).copy()
    rows = nsteps // stride + 1
    out_x = np.empty((rows, xs.size))
    out_c = np.empty((rows, xs.size))
    _rk4_run(reduced, xs, cs, float(t0), float(dt), nsteps, stride, float(a), float(om), float(k), float(phi),
             float(tau_p), out_x, out_c)
    t = t0 + dt * stride * np.arange(rows)
    if scalar:
        return t, out_x[:, 0], out_c[:, 0]
    return t, out_x, out_c


def simulate_full(params: SineParams, x0=0.0, c0=0.0, dt: float = 1e-3, t_end: float = 200.0,
                  output_every: float | None = None) -> Trajectory:
    """RK4 trajectory of the full one-sine system; ``x0`` may be an array of particles."""
    t, x, c = _run(False, x0, c0, 0.0, dt, t_end, output_every, params.a, params.omega, params.k, params.phi,
                   params.tau_p)
    return Trajectory(t, x, c)


def simulate_reduced(params: ReducedParams, x0=0.0, c0=0.0, dt: float = 1e-3, t_end: float = 200.0,
                     output_every: float | None = None, t0: float = 0.0) -> ReducedTrajectory:
    """RK4 trajectory of the reduced system starting at time ``t0``."""
    t, x, c = _run(True, x0, c0, t0, dt, t_end, output_every, params.a_r, params.omega, 0.0, 0.0, params.tau_p)
    return ReducedTrajectory(t, x, c, omega=params.omega)


def reduced_accel(params: ReducedParams, x, c):
    return (params.a_r * np.sin(TWO_PI * np.asarray(x)) + params.omega - np.asarray(c)) / params.tau_p


def turning_times(traj: ReducedTrajectory, params: ReducedParams):
    """Times of the local maxima (``T_plus``) and minima (``T_minus``) of ``V = C' - omega``.

    Extrema are located where the exact ``dV/dt`` changes sign between samples
    and refined by linear interpolation. The returned sequences start with a
    maximum so that ``T_plus[n] < T_minus[n] < T_plus[n+1]``.
    """
    acc = reduced_accel(params, traj.x, traj.c)
    s = np.sign(acc)
    idx = np.nonzero((s[:-1] != 0) & (s[:-1] != s[1:]))[0]
    frac = acc[idx] / (acc[idx] - acc[idx + 1])
    times = traj.t[idx] + frac * (traj.t[idx + 1] - traj.t[idx])
    is_max = acc[idx] > 0
    t_plus = times[is_max]
    t_minus = times[~is_max]
    if t_minus.size and t_plus.size and t_minus[0] < t_plus[0]:
        t_minus = t_minus[1:]
    return t_plus, t_minus


def band_entry_time(traj: Trajectory, lo: float, hi: float) -> float:
    """First sample time after which the speed stays in ``[lo, hi]``; ``inf`` if never."""
    inside = (traj.c >= lo) & (traj.c <= hi)
    if inside.ndim > 1:
        inside = inside.all(axis=1)
    if not inside[-1]:
        return math.inf
    outside = np.nonzero(~inside)[0]
    return float(traj.t[0] if outside.size == 0 else traj.t[outside[-1] + 1])


@dataclass(frozen=True)
class DriftStats:
    slope: float
    intercept: float
    oscillation_amplitude: float
    window_variance_max: float
    window_variance_median: float
    bounded: bool


def drift_and_oscillation_stats(t, x, period: float | None = None, wavelength: float = 1.0) -> DriftStats:
    """Least-squares drift of ``x(t)`` and boundedness of the detrended residual.

    The residual is split into 20 equal windows; it counts as bounded when the
    largest window variance is below twice the median one. ``period`` defaults
    to the time needed to drift across one ``wavelength``; the trajectory
    must span at least 10 periods.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if t.shape != x.shape or t.ndim != 1:
        raise InsufficientData("t and x must be 1-D of equal length", module="sine1d")
    if t.size < 2 * N_WINDOWS:
        raise InsufficientData(f"need at least {2 * N_WINDOWS} samples", module="sine1d")
    slope, intercept, _ = linear_fit(t, x)
    span = t[-1] - t[0]
    if period is None:
        period = wavelength / abs(slope) if slope != 0 else math.inf
    if span < 10.0 * period:
        raise InsufficientData(f"trajectory spans {span:.4g}, shorter than 10 drift periods ({10 * period:.4g})",
                               module="sine1d")
    resid = x - (intercept + slope * t)
    wins = np.array_split(resid, N_WINDOWS)
    var = np.array([w.var() for w in wins])
    vmax, vmed = float(var.max()), float(np.median(var))
    # residual at rounding level: nothing to bound
    floor = (1e-12 * max(1.0, float(np.abs(x).max()))) ** 2
    bounded = vmax <= floor or vmax < WINDOW_RATIO * vmed
    amp = 0.5 * float(resid.max() - resid.min())
    return DriftStats(slope, intercept, amp, vmax, vmed, bool(bounded))


def ensemble_variance(params: SineParams, n_particles: int = 10_000, dt: float = 1e-3, t_end: float = 100.0,
                      output_every: float = 0.1, box=(0.0, 1.0), c0: float = 0.0, rng=None):
    """Position variance of particles released uniformly in ``box`` into the full system."""
    from .stats import variance

    lo, hi = box
    x0 = lo + (hi - lo) * as_stream(rng).spawn("positions").uniform(size=n_particles)
    traj = simulate_full(params, x0, c0, dt, t_end, output_every)
    var = np.array([variance(row)[1] for row in traj.x])
    return traj.t, var
