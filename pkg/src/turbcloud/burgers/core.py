"""Periodic 1-D Burgers gas two-way coupled to drag particles.

Gas momentum per unit mass obeys

    du/dt + d(u^2/2)/dx = S,   S_j = sum_{i in cell j} m_p (v_i - u_j) / (rho_f dx tau_p)

and each particle relaxes to the gas value of its own cell. The cell is the
regularization of the particle field: no sub-cell interpolation.

Arrays carry a leading batch axis so independent realizations advance
together: gas ``u`` is (R, n_cells), particles ``x, v`` are (R, Np). Every
operation acts row by row, so results do not depend on how rows are grouped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import InvalidParameter, PositivityError, StabilityError

SCHEMES = ("lagrangian", "eulerian_empirical", "homogeneous_ode")
PARTICLE_INTEGRATORS = ("explicit_euler", "symplectic_euler")


@dataclass(frozen=True)
class BurgersConfig:
    length: float = 1.0
    n_cells: int = 128
    rho_f: float = 1.0
    tau_p: float = 0.1
    kappa_m: float = 1.0
    n_particles: int = 64
    u0_gas: float = 1.0
    u0_particles: float = 0.0
    dt: float = 1e-4
    t_end: float = 0.5
    scheme: str = "lagrangian"
    cfl: float = 0.5
    nu_gas: float = 0.0
    particle_integrator: str = "explicit_euler"
    record_every: int = 10
    density_floor: float = 1e-12
    on_negative_density: str = "clip"

    def __post_init__(self):
        if not self.length > 0:
            raise InvalidParameter("length must be positive", module="burgers")
        if self.n_cells < 4:
            raise InvalidParameter("n_cells must be at least 4", module="burgers")
        if not (self.rho_f > 0 and self.tau_p > 0 and self.dt > 0 and self.t_end > 0):
            raise InvalidParameter("rho_f, tau_p, dt and t_end must be positive", module="burgers")
        if self.kappa_m < 0 or self.nu_gas < 0:
            raise InvalidParameter("kappa_m and nu_gas must be nonnegative", module="burgers")
        if self.n_particles < 1:
            raise InvalidParameter("n_particles must be positive", module="burgers")
        if self.scheme not in SCHEMES:
            raise InvalidParameter(f"scheme must be one of {SCHEMES}", module="burgers")
        if self.particle_integrator not in PARTICLE_INTEGRATORS:
            raise InvalidParameter(f"particle_integrator must be one of {PARTICLE_INTEGRATORS}", module="burgers")
        if self.on_negative_density not in ("clip", "raise"):
            raise InvalidParameter("on_negative_density must be 'clip' or 'raise'", module="burgers")
        if self.record_every < 1:
            raise InvalidParameter("record_every must be positive", module="burgers")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @property
    def m_p(self) -> float:
        """Particle mass keeping the mean loading ``kappa_m`` fixed for any ``n_particles``."""
        return self.kappa_m * self.rho_f * self.length / self.n_particles

    @property
    def steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if n < 1 or not math.isclose(n * self.dt, self.t_end, rel_tol=1e-9):
            raise InvalidParameter(f"t_end={self.t_end} must be a multiple of dt={self.dt}", module="burgers")
        return n

    def with_particles(self, n: int) -> "BurgersConfig":
        return replace(self, n_particles=int(n))

    def record_times(self) -> np.ndarray:
        steps = self.steps
        idx = np.arange(0, steps + 1, self.record_every)
        if idx[-1] != steps:
            idx = np.append(idx, steps)
        return idx * self.dt


# -- homogeneous limit -------------------------------------------------------

def homogeneous_solution(t, u0_gas: float = 1.0, u0_particles: float = 0.0, kappa: float = 1.0,
                         tau_p: float = 0.1):
    """Space-invariant solution: both phases relax at rate (1+kappa)/tau_p to the mass-weighted mean."""
    if kappa < 0 or not tau_p > 0:
        raise InvalidParameter("need kappa >= 0 and tau_p > 0", module="burgers")
    t = np.asarray(t, dtype=float)
    u_inf = (kappa * u0_particles + u0_gas) / (1.0 + kappa)
    e = np.exp(-(1.0 + kappa) * t / tau_p)
    return u_inf + (u0_gas - u_inf) * e, u_inf + (u0_particles - u_inf) * e


def homogeneous_discrete(t, u0_gas: float = 1.0, u0_particles: float = 0.0, kappa: float = 1.0,
                         tau_p: float = 0.1, dt: float = 1e-4):
    """The explicit-Euler iterate of the homogeneous ODE pair at times ``t`` (multiples of ``dt``)."""
    t = np.asarray(t, dtype=float)
    u_inf = (kappa * u0_particles + u0_gas) / (1.0 + kappa)
    g = (1.0 - dt * (1.0 + kappa) / tau_p) ** np.round(t / dt)
    return u_inf + (u0_gas - u_inf) * g, u_inf + (u0_particles - u_inf) * g


# -- gas ----------------------------------------------------------------------

def godunov_flux(u_left, u_right):
    """Exact Godunov flux of f(u) = u^2/2, including the transonic rarefaction."""
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    a = np.maximum(ul, 0.0)
    b = np.minimum(ur, 0.0)
    return np.maximum(0.5 * a * a, 0.5 * b * b)


def gas_flux_divergence(u, dx):
    """``(F_{j+1/2} - F_{j-1/2}) / dx`` on a periodic grid along the last axis."""
    fr = godunov_flux(u, np.roll(u, -1, axis=-1))
    return (fr - np.roll(fr, 1, axis=-1)) / dx


def gas_diffusion(u, dx, nu):
    if nu == 0.0:
        return 0.0
    return nu * (np.roll(u, -1, axis=-1) - 2.0 * u + np.roll(u, 1, axis=-1)) / (dx * dx)


def admissible_dt(cfg: BurgersConfig, max_speed: float, max_loading: float) -> float:
    """Largest stable step: CFL on transport, explicit drag relaxation, and diffusion."""
    bounds = [cfg.tau_p / (1.0 + max_loading)]
    if max_speed > 0:
        bounds.append(cfg.cfl * cfg.dx / max_speed)
    if cfg.nu_gas > 0:
        bounds.append(0.5 * cfg.dx * cfg.dx / cfg.nu_gas)
    return min(bounds)


def _check_dt(cfg, dt, max_speed, max_loading):
    lim = admissible_dt(cfg, max_speed, max_loading)
    if dt > lim * (1.0 + 1e-12):
        raise StabilityError(f"dt={dt:.6g} exceeds the admissible dt={lim:.6g} "
                             f"(CFL {cfg.cfl}, max speed {max_speed:.6g}, max cell loading {max_loading:.6g})",
                             admissible_dt=lim, module="burgers")


# -- Lagrangian particles -----------------------------------------------------

@dataclass
class BurgersState:
    u: np.ndarray          # (R, n_cells)
    x: np.ndarray          # (R, Np) in [0, L)
    v: np.ndarray          # (R, Np)
    t: float = 0.0

    def copy(self) -> "BurgersState":
        return BurgersState(self.u.copy(), self.x.copy(), self.v.copy(), self.t)

    def momentum(self, cfg: BurgersConfig) -> np.ndarray:
        """Total momentum per realization."""
        return cfg.rho_f * cfg.dx * self.u.sum(axis=-1) + cfg.m_p * self.v.sum(axis=-1)


def wrap(x, length):
    x = np.mod(x, length)
    # mod of a tiny negative number rounds to length
    return np.where(x >= length, x - length, x)


def initial_state(cfg: BurgersConfig, positions) -> BurgersState:
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    if x.shape[-1] != cfg.n_particles:
        raise InvalidParameter(f"expected {cfg.n_particles} particles, got {x.shape[-1]}", module="burgers")
    r = x.shape[0]
    return BurgersState(np.full((r, cfg.n_cells), float(cfg.u0_gas)), wrap(x, cfg.length),
                        np.full(x.shape, float(cfg.u0_particles)))


def equispaced_positions(cfg: BurgersConfig, offset: float = 0.5) -> np.ndarray:
    """Deterministic placement at ``(i + offset) L / Np``; cell centers when Np = n_cells."""
    return (np.arange(cfg.n_particles) + offset) * (cfg.length / cfg.n_particles)


def cell_index(x, cfg: BurgersConfig):
    return np.minimum((x / cfg.dx).astype(np.int64), cfg.n_cells - 1)


def _flat_cells(cells, n_cells):
    r = cells.shape[0]
    return (cells + n_cells * np.arange(r)[:, None]).ravel()


def cell_counts(x, cfg: BurgersConfig) -> np.ndarray:
    x = np.atleast_2d(x)
    flat = _flat_cells(cell_index(x, cfg), cfg.n_cells)
    return np.bincount(flat, minlength=x.shape[0] * cfg.n_cells).reshape(x.shape[0], cfg.n_cells)


def deposit_drag(state: BurgersState, cfg: BurgersConfig, cells=None) -> np.ndarray:
    """Per-cell gas source ``sum_i m_p (v_i - u_j) / (rho_f dx tau_p)``; zero in empty cells."""
    u = np.atleast_2d(state.u)
    x = np.atleast_2d(state.x)
    v = np.atleast_2d(state.v)
    r, n = u.shape
    cells = cell_index(x, cfg) if cells is None else cells
    u_at = np.take_along_axis(u, cells, axis=1)
    flat = _flat_cells(cells, n)
    rel = np.bincount(flat, weights=(v - u_at).ravel(), minlength=r * n).reshape(r, n)
    return rel * (cfg.m_p / (cfg.rho_f * cfg.dx * cfg.tau_p))


def step_lagrangian(state: BurgersState, cfg: BurgersConfig, dt: float | None = None,
                    check: bool = True) -> BurgersState:
    """One unsplit explicit step of gas and particles; all sources use the old state."""
    dt = cfg.dt if dt is None else dt
    u, x, v = state.u, state.x, state.v
    cells = cell_index(x, cfg)
    if check:
        per_cell = cfg.m_p / (cfg.rho_f * cfg.dx)
        max_load = per_cell * float(cell_counts(x, cfg).max())
        _check_dt(cfg, dt, float(np.abs(u).max()), max_load)
    u_at = np.take_along_axis(u, cells, axis=1)
    src = deposit_drag(state, cfg, cells)
    u_new = u - dt * gas_flux_divergence(u, cfg.dx) + dt * src + dt * gas_diffusion(u, cfg.dx, cfg.nu_gas)
    v_new = v + (dt / cfg.tau_p) * (u_at - v)
    carrier = v if cfg.particle_integrator == "explicit_euler" else v_new
    x_new = wrap(x + dt * carrier, cfg.length)
    return BurgersState(u_new, x_new, v_new, state.t + dt)


# -- Eulerian moments of the empirical measure --------------------------------

@dataclass
class EulerianMomentState:
    n: np.ndarray          # number density (R, n_cells), 1/m
    q: np.ndarray          # momentum density n u_l
    u: np.ndarray          # gas velocity
    t: float = 0.0
    clips: int = 0
    clip_log: list = field(default_factory=list)

    def velocity(self, floor: float = 1e-12) -> np.ndarray:
        """Disperse velocity ``q/n``; zero where the density is at vacuum."""
        safe = np.where(self.n > floor, self.n, 1.0)
        return np.where(self.n > floor, self.q / safe, 0.0)

    def copy(self) -> "EulerianMomentState":
        return EulerianMomentState(self.n.copy(), self.q.copy(), self.u.copy(), self.t, self.clips,
                                   list(self.clip_log))


def histogram_state(cfg: BurgersConfig, positions) -> EulerianMomentState:
    """Moments of the empirical measure of a particle draw: cell counts over dx, uniform velocities."""
    counts = cell_counts(wrap(np.atleast_2d(np.asarray(positions, dtype=float)), cfg.length), cfg)
    n = counts / cfg.dx
    r = n.shape[0]
    return EulerianMomentState(n, n * cfg.u0_particles, np.full((r, cfg.n_cells), float(cfg.u0_gas)))


def uniform_moment_state(cfg: BurgersConfig, n_density: float, r: int = 1) -> EulerianMomentState:
    n = np.full((r, cfg.n_cells), float(n_density))
    return EulerianMomentState(n, n * cfg.u0_particles, np.full((r, cfg.n_cells), float(cfg.u0_gas)))


def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _kinetic_flux(nl, ul, nr, ur):
    """Upwind flux of the pressureless system: right-movers from the left, left-movers from the right."""
    pos = nl * np.maximum(ul, 0.0)
    neg = nr * np.minimum(ur, 0.0)
    return pos + neg, pos * ul + neg * ur


def disperse_fluxes(n, w, dt, dx, floor):
    """MUSCL-Hancock fluxes at right faces for primitive ``(n, w)``; first order next to vacuum."""
    occupied = n > floor
    near_vacuum = ~(occupied & np.roll(occupied, 1, axis=-1) & np.roll(occupied, -1, axis=-1))
    dn = _minmod(n - np.roll(n, 1, axis=-1), np.roll(n, -1, axis=-1) - n)
    dw = _minmod(w - np.roll(w, 1, axis=-1), np.roll(w, -1, axis=-1) - w)
    dn = np.where(near_vacuum, 0.0, dn)
    dw = np.where(near_vacuum, 0.0, dw)
    h = 0.5 * dt / dx
    n_half = n - h * (w * dn + n * dw)
    w_half = w - h * w * dw
    n_left = np.maximum(n_half + 0.5 * dn, 0.0)
    w_left = w_half + 0.5 * dw
    n_right = np.maximum(np.roll(n_half - 0.5 * dn, -1, axis=-1), 0.0)
    w_right = np.roll(w_half - 0.5 * dw, -1, axis=-1)
    return _kinetic_flux(n_left, w_left, n_right, w_right)


def step_eulerian_empirical(state: EulerianMomentState, cfg: BurgersConfig, dt: float | None = None,
                            check: bool = True) -> EulerianMomentState:
    """One explicit step of the pressureless disperse moments coupled to the Burgers gas.

    Disperse transport is second order (MUSCL-Hancock, minmod); gas transport
    is the first-order Godunov flux shared with the Lagrangian path; drag uses
    the old state. Densities that come out negative are clipped to zero and
    counted, or raise :class:`PositivityError` when configured to.
    """
    dt = cfg.dt if dt is None else dt
    floor = cfg.density_floor
    n, q, u = state.n, state.q, state.u
    w = state.velocity(floor)
    if check:
        mass_per_cell = cfg.m_p / cfg.rho_f
        _check_dt(cfg, dt, max(float(np.abs(u).max()), float(np.abs(w).max())),
                  mass_per_cell * float(n.max()))
    fn, fq = disperse_fluxes(n, w, dt, cfg.dx, floor)
    lam = dt / cfg.dx
    drag = n * (u - w) / cfg.tau_p
    n_new = n - lam * (fn - np.roll(fn, 1, axis=-1))
    q_new = q - lam * (fq - np.roll(fq, 1, axis=-1)) + dt * drag
    u_new = (u - dt * gas_flux_divergence(u, cfg.dx) - dt * (cfg.m_p / cfg.rho_f) * drag
             + dt * gas_diffusion(u, cfg.dx, cfg.nu_gas))
    clips, log = state.clips, state.clip_log
    neg = n_new < 0.0
    if np.any(neg):
        count = int(neg.sum())
        worst = float(n_new.min())
        if cfg.on_negative_density == "raise":
            raise PositivityError(f"{count} cells with negative density (min {worst:.3g}) at t={state.t + dt:.6g}",
                                  module="burgers")
        n_new = np.where(neg, 0.0, n_new)
        q_new = np.where(neg, 0.0, q_new)
        clips += count
        log = log + [(state.t + dt, count, worst)]
    vac = n_new <= floor
    q_new = np.where(vac, 0.0, q_new)
    return EulerianMomentState(n_new, q_new, u_new, state.t + dt, clips, log)


# -- homogeneous ODE as a scheme ------------------------------------------------

def step_homogeneous(u, ul, cfg: BurgersConfig, dt: float | None = None):
    """Explicit-Euler step of the space-invariant pair with loading ``kappa_m``."""
    dt = cfg.dt if dt is None else dt
    du = cfg.kappa_m * (ul - u) / cfg.tau_p
    dul = (u - ul) / cfg.tau_p
    return u + dt * du, ul + dt * dul
