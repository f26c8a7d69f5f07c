"""Inertial particles in a frozen synthetic field.

Particles relax toward the local fluid velocity with linear Stokes drag,

    dx/dt = c,   dc/dt = (u_f(t, x) - c) / tau_p,

integrated with classical RK4. The field is one-way coupled: particles never
modify it and never interact with each other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._trig import MAX_ARGUMENT
from .errors import InvalidParameter
from .rng import RngStream, as_stream
from .stats import variance
from .turbulence import SpectrumParams, SyntheticField, eval_velocity, sample_field


@dataclass
class ParticleCloud:
    positions: np.ndarray
    velocities: np.ndarray
    tau_p: float

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        self.velocities = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if self.positions.shape != self.velocities.shape:
            raise InvalidParameter("positions and velocities must have the same shape", module="lagrangian")
        if not self.tau_p > 0:
            raise InvalidParameter("tau_p must be positive", module="lagrangian")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "ParticleCloud":
        return ParticleCloud(self.positions.copy(), self.velocities.copy(), self.tau_p)


@dataclass
class DispersionSeries:
    times: np.ndarray
    variance_per_axis: np.ndarray  # (T, d)

    @property
    def variance_total(self) -> np.ndarray:
        return self.variance_per_axis.sum(axis=1)

    def columns(self):
        d = self.variance_per_axis.shape[1]
        names = ["t"] + [f"var_{c}" for c in "xyz"[:d]] + ["var_total"]
        rows = np.column_stack([self.times, self.variance_per_axis, self.variance_total])
        return names, rows


def drag_rhs(t, x, c, f: SyntheticField, tau_p: float):
    """Right-hand side (dx/dt, dc/dt) of the drag system."""
    if not tau_p > 0:
        raise InvalidParameter("tau_p must be positive", module="lagrangian")
    c = np.asarray(c, dtype=float)
    return c, (eval_velocity(f, t, x) - c) / tau_p


def _check_phase_range(f: SyntheticField, t_end, xs, cs):
    # RK4 never moves a particle faster than max(|c0|, U_max)
    umax = max(f.speed_bound(), float(np.max(np.abs(cs), initial=0.0)) * math.sqrt(xs.shape[0]))
    kmax = float(np.linalg.norm(f.wavevectors, axis=1).max(initial=0.0))
    xmax = float(np.linalg.norm(xs, axis=0).max(initial=0.0)) + umax * t_end
    bound = float(np.abs(f.omegas).max(initial=0.0)) * t_end + kmax * xmax + float(np.abs(f.phases).max(initial=0.0))
    if bound > MAX_ARGUMENT:
        raise InvalidParameter(f"mode phases may reach {bound:.3g} rad, above the supported {MAX_ARGUMENT:.3g}",
                               module="lagrangian")


def advance(xs, cs, f: SyntheticField, tau_p: float, t: float, dt: float, nsteps: int):
    """In-place RK4 on structure-of-arrays state ``xs, cs`` of shape (d, P)."""
    if not dt > 0:
        raise InvalidParameter("dt must be positive", module="lagrangian")
    _kernels.rk4_drag_advance(xs, cs, float(t), float(dt), int(nsteps), float(tau_p), *f.kernel_args())


def rk4_step(cloud: ParticleCloud, f: SyntheticField, t: float, dt: float, nsteps: int = 1) -> ParticleCloud:
    """Return the cloud after ``nsteps`` classical RK4 steps of size ``dt`` from time ``t``."""
    if cloud.dim != f.dim:
        raise InvalidParameter("cloud and field dimensions differ", module="lagrangian")
    xs = np.array(cloud.positions.T, order="C")
    cs = np.array(cloud.velocities.T, order="C")
    _check_phase_range(f, t + nsteps * dt, xs, cs)
    advance(xs, cs, f, cloud.tau_p, t, dt, nsteps)
    return ParticleCloud(xs.T.copy(), cs.T.copy(), cloud.tau_p)


def default_box(p: SpectrumParams):
    side = 2.0 * math.pi / p.k0
    return np.zeros(p.dim), np.full(p.dim, side)


def _initial_cloud(f, n_particles, tau_p, box, rng: RngStream, init_velocity):
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    pos = lo + (hi - lo) * rng.uniform(size=(n_particles, lo.size))
    if init_velocity == "zero":
        vel = np.zeros_like(pos)
    elif init_velocity == "fluid":
        vel = eval_velocity(f, 0.0, pos)
    else:
        raise InvalidParameter(f"init_velocity must be 'zero' or 'fluid', got {init_velocity!r}",
                               module="lagrangian")
    return ParticleCloud(pos, vel, tau_p)


def _steps_per_output(dt, output_every):
    k = round(output_every / dt)
    if k < 1 or not math.isclose(k * dt, output_every, rel_tol=1e-9):
        raise InvalidParameter(f"output_every={output_every} must be a multiple of dt={dt}", module="lagrangian")
    return int(k)


def _run(f, cloud, dt, t_end, output_every, on_output):
    per = _steps_per_output(dt, output_every)
    n_out = int(round(t_end / output_every))
    xs = np.array(cloud.positions.T, order="C")
    cs = np.array(cloud.velocities.T, order="C")
    _check_phase_range(f, t_end, xs, cs)
    on_output(0, 0.0, xs)
    for i in range(1, n_out + 1):
        advance(xs, cs, f, cloud.tau_p, (i - 1) * per * dt, dt, per)
        on_output(i, i * per * dt, xs)


def simulate_dispersion(p: SpectrumParams, n_particles: int = 10_000, tau_p: float = 1.0, dt: float = 1e-3,
                        t_end: float = 100.0, box=None, rng=None, init_velocity: str = "zero",
                        output_every: float = 0.1, field: SyntheticField | None = None) -> DispersionSeries:
    """Position variance of a particle cloud released in one field realization.

    The field is sampled from ``rng.spawn("field")`` unless given; initial
    positions are uniform in ``box`` (default ``[0, 2 pi/k0)^d``).
    """
    if n_particles < 2:
        raise InvalidParameter("need at least 2 particles", module="lagrangian")
    rng = as_stream(rng)
    f = field if field is not None else sample_field(p, rng.spawn("field"))
    box = default_box(p) if box is None else box
    cloud = _initial_cloud(f, n_particles, tau_p, box, rng.spawn("positions"), init_velocity)
    n_out = int(round(t_end / output_every))
    times = np.empty(n_out + 1)
    var = np.empty((n_out + 1, f.dim))

    def record(i, t, xs):
        times[i] = t
        var[i] = variance(xs.T)[0]

    _run(f, cloud, dt, t_end, output_every, record)
    return DispersionSeries(times, var)


def trajectory_dump(p: SpectrumParams, n_particles: int = 10_000, n_tracks: int = 10, tau_p: float = 1.0,
                    dt: float = 1e-3, t_end: float = 100.0, box=None, rng=None, init_velocity: str = "zero",
                    output_every: float = 0.1, field: SyntheticField | None = None):
    """Tracks of the first ``n_tracks`` particles of a cloud; returns (times, tracks[T, n_tracks, d]).

    The cloud is drawn exactly as in :func:`simulate_dispersion`, but only the
    selected particles are integrated since particles do not interact.
    """
    rng = as_stream(rng)
    n_tracks = min(n_tracks, n_particles)
    f = field if field is not None else sample_field(p, rng.spawn("field"))
    box = default_box(p) if box is None else box
    cloud = _initial_cloud(f, n_particles, tau_p, box, rng.spawn("positions"), init_velocity)
    cloud = ParticleCloud(cloud.positions[:n_tracks], cloud.velocities[:n_tracks], tau_p)
    n_out = int(round(t_end / output_every))
    times = np.empty(n_out + 1)
    tracks = np.empty((n_out + 1, n_tracks, f.dim))

    def record(i, t, xs):
        times[i] = t
        tracks[i] = xs.T

    _run(f, cloud, dt, t_end, output_every, record)
    return times, tracks


def track_columns(times, tracks):
    _, n, d = tracks.shape
    if d == 1:
        names = ["t"] + [f"x{i}" for i in range(n)]
    else:
        names = ["t"] + [f"x{i}_{c}" for i in range(n) for c in "xyz"[:d]]
    return names, np.column_stack([times, tracks.reshape(len(times), -1)])
