"""Ensembles over random particle placements, effective relaxation time, Eulerian comparison."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import _parallel
from ..errors import FitFailure, InvalidParameter
from ..rng import RngStream, as_stream
from ..stats import linear_fit, loglog_fit_statistic
from .core import (BurgersConfig, EulerianMomentState, homogeneous_discrete, homogeneous_solution,
                   histogram_state, initial_state, step_eulerian_empirical, step_lagrangian)

# realizations per batch; fixed so output never depends on the worker count
CHUNK_REPS = 50


def _record_indices(cfg: BurgersConfig):
    steps = cfg.steps
    idx = list(range(0, steps + 1, cfg.record_every))
    if idx[-1] != steps:
        idx.append(steps)
    return idx


def run_lagrangian(cfg: BurgersConfig, positions):
    """Advance a batch of realizations; returns (t, mean gas (R, T), mean particle velocity (R, T))."""
    state = initial_state(cfg, positions)
    rec = _record_indices(cfg)
    gas = np.empty((state.u.shape[0], len(rec)))
    part = np.empty_like(gas)
    k = 0
    for s in range(cfg.steps + 1):
        if s == rec[k]:
            gas[:, k] = state.u.mean(axis=1)
            part[:, k] = state.v.mean(axis=1)
            k += 1
        if s < cfg.steps:
            state = step_lagrangian(state, cfg)
    return np.asarray(rec) * cfg.dt, gas, part


def run_eulerian(cfg: BurgersConfig, state: EulerianMomentState):
    """Advance Eulerian moment realizations; returns (t, gas, disperse mean velocity, final state)."""
    rec = _record_indices(cfg)
    gas = np.empty((state.u.shape[0], len(rec)))
    part = np.empty_like(gas)
    k = 0
    for s in range(cfg.steps + 1):
        if s == rec[k]:
            gas[:, k] = state.u.mean(axis=1)
            mass = state.n.sum(axis=1)
            part[:, k] = np.where(mass > 0, state.q.sum(axis=1) / np.where(mass > 0, mass, 1.0), np.nan)
            k += 1
        if s < cfg.steps:
            state = step_eulerian_empirical(state, cfg)
    return np.asarray(rec) * cfg.dt, gas, part, state


def draw_positions(cfg: BurgersConfig, stream: RngStream, n_particles: int, reps) -> np.ndarray:
    """Uniform placements on [0, L); realization ``r`` uses substream ``("burgers", Np, r)``."""
    return np.stack([stream.spawn("burgers", n_particles, r).uniform(size=n_particles) * cfg.length
                     for r in reps])


def _chunk(task):
    cfg, seed, stream_id, scheme, reps = task
    stream = RngStream(seed, stream_id)
    pos = draw_positions(cfg, stream, cfg.n_particles, reps)
    if scheme == "lagrangian":
        t, gas, part = run_lagrangian(cfg, pos)
        return t, gas, part, 0
    t, gas, part, final = run_eulerian(cfg, histogram_state(cfg, pos))
    return t, gas, part, final.clips


@dataclass
class EnsembleCurves:
    n_particles: int
    t: np.ndarray
    gas: np.ndarray        # (reps, T) spatial-mean gas velocity per realization
    particles: np.ndarray  # (reps, T)
    clips: int = 0

    @property
    def mean_gas(self):
        return self.gas.mean(axis=0)

    @property
    def mean_particles(self):
        return self.particles.mean(axis=0)

    @property
    def stderr_gas(self):
        r = self.gas.shape[0]
        return self.gas.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.full(self.t.shape, np.nan)


def run_ensemble(cfg: BurgersConfig, n_particles: int, reps: int, rng=None, scheme: str = "lagrangian",
                 workers: int | None = None) -> EnsembleCurves:
    if scheme not in ("lagrangian", "eulerian_empirical"):
        raise InvalidParameter("ensemble scheme must be lagrangian or eulerian_empirical", module="burgers")
    cfg = cfg.with_particles(n_particles)
    stream = as_stream(rng)
    tasks = [(cfg, stream.seed, stream.stream_id, scheme, list(block))
             for block in _parallel.chunks(reps, CHUNK_REPS)]
    out = _parallel.ordered_map(_chunk, tasks, workers)
    t = out[0][0]
    return EnsembleCurves(n_particles, t, np.concatenate([o[1] for o in out]),
                          np.concatenate([o[2] for o in out]), sum(o[3] for o in out))


def homogeneous_curve(cfg: BurgersConfig, t, tau_p: float | None = None, discrete: bool = False):
    tau = cfg.tau_p if tau_p is None else tau_p
    if discrete:
        return homogeneous_discrete(t, cfg.u0_gas, cfg.u0_particles, cfg.kappa_m, tau, cfg.dt)[0]
    return homogeneous_solution(t, cfg.u0_gas, cfg.u0_particles, cfg.kappa_m, tau)[0]


def deviation_metric(t, curve, reference) -> float:
    """Time integral of ``|curve - reference|`` (trapezoid rule)."""
    return float(np.trapezoid(np.abs(np.asarray(curve) - np.asarray(reference)), t))


@dataclass
class EnsembleResult:
    cfg: BurgersConfig
    curves: list           # EnsembleCurves per Np
    deviation: np.ndarray  # time-integrated |<u> - u_hom| per Np
    fit: object            # RegressionResult of deviation vs Np, None if degenerate

    @property
    def np_list(self):
        return np.array([c.n_particles for c in self.curves])

    def curve_columns(self):
        t = self.curves[0].t
        hom = homogeneous_curve(self.cfg, t)
        names = ["t", "homogeneous_gas_velocity"]
        cols = [t, hom]
        for c in self.curves:
            names += [f"mean_gas_velocity_np{c.n_particles}", f"mean_gas_velocity_np{c.n_particles}_stderr",
                      f"mean_particle_velocity_np{c.n_particles}"]
            cols += [c.mean_gas, c.stderr_gas, c.mean_particles]
        return names, np.column_stack(cols)

    def convergence_columns(self):
        return ["Np", "deviation"], [[int(n), d] for n, d in zip(self.np_list, self.deviation)]

    def footer(self):
        return {} if self.fit is None else self.fit.footer(prefix="deviation_")


def ensemble_experiment(cfg: BurgersConfig, np_list, reps: int = 200, rng=None, workers: int | None = None,
                        scheme: str = "lagrangian") -> EnsembleResult:
    """Ensemble-averaged spatial-mean gas velocity for each Np and its convergence to the homogeneous limit.

    ``kappa_m`` is held fixed, so the particle mass scales as 1/Np. The
    convergence slope is a log-log fit of the deviation against Np with a
    bootstrap over realizations.
    """
    np_list = [int(n) for n in np_list]
    if not np_list or min(np_list) < 1:
        raise InvalidParameter("particle counts must be positive", module="burgers")
    stream = as_stream(rng)
    curves = [run_ensemble(cfg, n, reps, stream, scheme, workers) for n in np_list]
    t = curves[0].t
    hom = homogeneous_curve(cfg, t)
    dev = np.array([deviation_metric(t, c.mean_gas, hom) for c in curves])
    fit = None
    if len(np_list) >= 3 and np.all(dev > 0):
        fit = loglog_fit_statistic(np.asarray(np_list, dtype=float), [c.gas for c in curves],
                                   lambda mean, j: deviation_metric(t, mean, hom),
                                   rng=stream.spawn("fit", "deviation"))
    return EnsembleResult(cfg, curves, dev, fit)


# -- effective relaxation time --------------------------------------------------

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, a: float, b: float, tol: float, max_iter: int = 500):
    """Minimize a unimodal ``f`` on ``[a, b]`` until the bracket is shorter than ``tol``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def fit_tau_single(cfg: BurgersConfig, t, curve, scan=(0.05, 50.0), n_scan: int = 61, discrete: bool = True
                   ) -> float:
    """tau minimizing the squared mismatch between ``curve`` and the homogeneous model.

    A log-spaced scan over ``scan * tau_p`` brackets the minimum, then a
    golden-section search refines it to ``1e-6 tau_p``.
    """
    t = np.asarray(t, dtype=float)
    curve = np.asarray(curve, dtype=float)

    def sse(tau):
        r = curve - homogeneous_curve(cfg, t, tau, discrete=discrete)
        return float(np.dot(r, r))

    lo, hi = scan[0] * cfg.tau_p, scan[1] * cfg.tau_p
    grid = np.geomspace(lo, hi, n_scan)
    if discrete:
        # the explicit-Euler model needs dt (1 + kappa) / tau < 1
        grid = grid[cfg.dt * (1.0 + cfg.kappa_m) / grid < 1.0]
    vals = np.array([sse(g) for g in grid])
    i = int(np.argmin(vals))
    if i == 0 or i == grid.size - 1:
        raise FitFailure(f"mismatch minimum not bracketed in [{grid[0]:.6g}, {grid[-1]:.6g}] (at {grid[i]:.6g})",
                         interval=(float(grid[0]), float(grid[-1])), module="burgers")
    return golden_section(sse, float(grid[i - 1]), float(grid[i + 1]), 1e-6 * cfg.tau_p)


@dataclass
class TauFit:
    n_particles: np.ndarray
    l_t: np.ndarray
    tau_eff: np.ndarray
    alpha: float
    intercept: float
    r_squared: float
    n_fit: int
    ordering_violations: list

    def columns(self):
        return ["Np", "l_t", "tau_eff"], [[int(n), l, te] for n, l, te in zip(self.n_particles, self.l_t,
                                                                               self.tau_eff)]

    def footer(self):
        return {"alpha": self.alpha, "intercept": self.intercept, "r_squared": self.r_squared,
                "n_fit": self.n_fit, "ordering_violations": len(self.ordering_violations)}


def fit_effective_tau(result: EnsembleResult, cfg: BurgersConfig | None = None, n_fit: int = 4,
                      discrete: bool = True) -> TauFit:
    """Effective relaxation time per Np and the closure ``tau_eff = tau_p + alpha l_t``.

    The line is fitted on the ``n_fit`` largest Np (smallest ``l_t = L/Np``).
    ``ordering_violations`` lists consecutive Np pairs where tau_eff increases.
    """
    cfg = cfg or result.cfg
    if len(result.curves) < 4:
        raise InvalidParameter("need ensemble curves for at least 4 particle counts", module="burgers")
    nps = result.np_list
    taus = np.array([fit_tau_single(cfg, c.t, c.mean_gas, discrete=discrete) for c in result.curves])
    lt = cfg.length / nps
    order = np.argsort(nps)
    viol = [(int(nps[order[i]]), int(nps[order[i + 1]])) for i in range(len(order) - 1)
            if taus[order[i + 1]] > taus[order[i]]]
    sel = order[-n_fit:]
    alpha, intercept, r2 = linear_fit(lt[sel], taus[sel])
    return TauFit(nps, lt, taus, alpha, intercept, r2, int(n_fit), viol)


# -- Eulerian versus Lagrangian ------------------------------------------------------

def relative_l2(t, a, b) -> float:
    """``||a - b|| / ||b||`` in L2 over time (trapezoid rule)."""
    num = np.trapezoid((np.asarray(a) - np.asarray(b)) ** 2, t)
    den = np.trapezoid(np.asarray(b) ** 2, t)
    return float(math.sqrt(num / den))


@dataclass
class ConsistencyResult:
    n_particles: np.ndarray
    lagrangian: list
    eulerian: list
    rel_l2: np.ndarray
    clips: np.ndarray

    def columns(self):
        return (["Np", "rel_l2", "density_clips"],
                [[int(n), e, int(c)] for n, e, c in zip(self.n_particles, self.rel_l2, self.clips)])


def eulerian_consistency(cfg: BurgersConfig, np_list=(4, 16, 64), reps: int = 200, rng=None,
                         workers: int | None = None, lagrangian: EnsembleResult | None = None
                         ) -> ConsistencyResult:
    """Eulerian moment ensembles against Lagrangian ensembles built from the same particle draws."""
    stream = as_stream(rng)
    lag, eul, err, clips = [], [], [], []
    for n in np_list:
        lc = None
        if lagrangian is not None:
            lc = next((c for c in lagrangian.curves if c.n_particles == n and c.gas.shape[0] == reps), None)
        if lc is None:
            lc = run_ensemble(cfg, n, reps, stream, "lagrangian", workers)
        ec = run_ensemble(cfg, n, reps, stream, "eulerian_empirical", workers)
        lag.append(lc)
        eul.append(ec)
        err.append(relative_l2(ec.t, ec.mean_gas, lc.mean_gas))
        clips.append(ec.clips)
    return ConsistencyResult(np.asarray(list(np_list)), lag, eul, np.asarray(err), np.asarray(clips))

