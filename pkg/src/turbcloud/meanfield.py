"""Synchronously coupled interacting and mean-field particle systems.

The interacting system

    dX_i = C_i dt
    dC_i = [G(t, z_i) + (1/N) sum_j F(z_i - z_j)] dt + sqrt(2) sigma dW_i

is advanced next to the fictive system, where the empirical interaction is
replaced by the convolution ``F * f_t`` with the exact one-particle law. Both
systems start from identical data and consume identical Brownian increments,
so ``z_i - zbar_i`` isolates the finite-N error.

When ``F`` and ``G`` are affine in ``(x, c)`` the law ``f_t`` stays Gaussian;
its mean and covariance follow closed moment ODEs, giving an exact oracle for
the mean-field limit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _parallel
from .errors import CouplingOrderError, InvalidParameter, UnsupportedConfiguration
from .rng import RngStream, as_stream
from .stats import loglog_fit
from .turbulence import SyntheticField, eval_velocity
from .wasserstein import optimal_matching, assignment_cost

KERNEL_KINDS = ("linear_velocity_alignment", "custom_coefficients")
FIELD_KINDS = ("none", "uniform_drag_to", "synthetic_field_drag")


@dataclass(frozen=True)
class KernelSpec:
    """Odd linear interaction ``F(x, c) = A_x x + A_c c`` acting on velocities.

    ``linear_velocity_alignment`` is ``A_x = 0, A_c = -lam I``. The custom
    kind takes explicit d-by-d coefficient matrices.
    """

    kind: str = "linear_velocity_alignment"
    lam: float = 1.0
    coef_x: tuple | None = None
    coef_c: tuple | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise InvalidParameter(f"unknown kernel kind {self.kind!r}", module="meanfield")
        if self.kind == "custom_coefficients" and (self.coef_x is None or self.coef_c is None):
            raise InvalidParameter("custom_coefficients needs coef_x and coef_c", module="meanfield")

    def matrices(self, d: int):
        if self.kind == "linear_velocity_alignment":
            return np.zeros((d, d)), -self.lam * np.eye(d)
        ax = np.asarray(self.coef_x, dtype=float).reshape(d, d)
        ac = np.asarray(self.coef_c, dtype=float).reshape(d, d)
        return ax, ac

    def __call__(self, dx, dc):
        """F evaluated at the phase-space separation ``(dx, dc)`` (..., d)."""
        dx = np.asarray(dx, dtype=float)
        dc = np.asarray(dc, dtype=float)
        ax, ac = self.matrices(dx.shape[-1])
        return dx @ ax.T + dc @ ac.T

    @property
    def is_zero(self) -> bool:
        if self.kind == "linear_velocity_alignment":
            return self.lam == 0.0
        return not (np.any(self.coef_x) or np.any(self.coef_c))


@dataclass(frozen=True)
class ExternalFieldSpec:
    """External acceleration ``G(t, x, c)``.

    ``uniform_drag_to``: ``(u_const - c)/tau``.
    ``synthetic_field_drag``: ``(u_f(t, x) - c)/tau`` for a sampled field.
    """

    kind: str = "none"
    u_const: float = 0.0
    tau: float = 1.0
    field: SyntheticField | None = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise InvalidParameter(f"unknown external field kind {self.kind!r}", module="meanfield")
        if self.kind != "none" and not self.tau > 0:
            raise InvalidParameter("tau must be positive", module="meanfield")
        if self.kind == "synthetic_field_drag" and self.field is None:
            raise InvalidParameter("synthetic_field_drag needs a field", module="meanfield")

    def __call__(self, t, x, c):
        if self.kind == "none":
            return np.zeros_like(c)
        if self.kind == "uniform_drag_to":
            return (self.u_const - c) / self.tau
        shape = x.shape
        u = eval_velocity(self.field, t, x.reshape(-1, shape[-1])).reshape(shape)
        return (u - c) / self.tau

    def affine(self, d: int):
        """``(g0, G_x, G_c)`` with ``G = g0 + G_x x + G_c c``."""
        if self.kind == "none":
            return np.zeros(d), np.zeros((d, d)), np.zeros((d, d))
        if self.kind == "uniform_drag_to":
            return np.full(d, self.u_const / self.tau), np.zeros((d, d)), -np.eye(d) / self.tau
        raise UnsupportedConfiguration("synthetic_field_drag is not affine; the Gaussian law is unavailable",
                                       module="meanfield")

    def lipschitz(self) -> float:
        """A Lipschitz constant of G in (x, c) for the Euclidean norm."""
        if self.kind == "none":
            return 0.0
        if self.kind == "uniform_drag_to":
            return 1.0 / self.tau
        f = self.field
        grad = float(np.sum(np.linalg.norm(f.amplitudes, axis=1) * np.linalg.norm(f.wavevectors, axis=1)))
        return math.hypot(grad, 1.0) / self.tau


@dataclass
class GaussianLaw:
    """Gaussian on phase space; coordinates ordered ``(x_1..x_d, c_1..c_d)``."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).ravel()
        self.cov = np.asarray(self.cov, dtype=float)
        n = self.mean.size
        if n % 2 or self.cov.shape != (n, n):
            raise InvalidParameter("mean must have even length 2d and cov shape (2d, 2d)", module="meanfield")
        if not np.allclose(self.cov, self.cov.T, atol=1e-12, rtol=0):
            raise InvalidParameter("covariance must be symmetric", module="meanfield")
        if np.linalg.eigvalsh(self.cov).min() < -1e-12:
            raise InvalidParameter("covariance must be positive semidefinite", module="meanfield")

    @classmethod
    def standard(cls, d: int = 1) -> "GaussianLaw":
        return cls(np.zeros(2 * d), np.eye(2 * d))

    @classmethod
    def point_mass(cls, x, c) -> "GaussianLaw":
        m = np.concatenate([np.atleast_1d(x), np.atleast_1d(c)]).astype(float)
        return cls(m, np.zeros((m.size, m.size)))

    @property
    def dim(self) -> int:
        return self.mean.size // 2

    @property
    def mean_x(self):
        return self.mean[: self.dim]

    @property
    def mean_c(self):
        return self.mean[self.dim:]

    def sqrt_cov(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.cov)
        return v * np.sqrt(np.clip(w, 0.0, None))

    def transform(self, xi) -> np.ndarray:
        """Map standard normal vectors (..., 2d) to samples of the law."""
        return self.mean + np.asarray(xi) @ self.sqrt_cov().T

    def sample(self, n: int, rng=None) -> np.ndarray:
        return self.transform(as_stream(rng).standard_normal((n, 2 * self.dim)))


def convolve_law(kernel: KernelSpec, law: GaussianLaw, x, c):
    """``F * f_t`` at ``(x, c)``; exact for linear kernels since only the mean enters."""
    return kernel(np.asarray(x) - law.mean_x, np.asarray(c) - law.mean_c)


def empirical_interaction(kernel: KernelSpec, x, c):
    """``(1/N) sum_j F(z_i - z_j)`` over the particle axis (-2)."""
    return kernel(x - x.mean(axis=-2, keepdims=True), c - c.mean(axis=-2, keepdims=True))


def _moment_system(field: ExternalFieldSpec, kernel: KernelSpec, sigma: float, d: int):
    g0, gx, gc = field.affine(d)
    ax, ac = kernel.matrices(d)
    jac = np.zeros((2 * d, 2 * d))
    jac[:d, d:] = np.eye(d)
    jac[d:, :d] = gx + ax
    jac[d:, d:] = gc + ac
    q = np.zeros((2 * d, 2 * d))
    q[d:, d:] = 2.0 * sigma**2 * np.eye(d)
    # the interaction averages to zero at the mean: drive the mean with G only
    mean_jac = np.zeros_like(jac)
    mean_jac[:d, d:] = np.eye(d)
    mean_jac[d:, :d] = gx
    mean_jac[d:, d:] = gc
    return g0, jac, mean_jac, q


def evolve_gaussian_law(law: GaussianLaw, field: ExternalFieldSpec, kernel: KernelSpec, sigma: float,
                        dt: float, substeps: int = 1) -> GaussianLaw:
    """Advance the exact mean/covariance ODEs of the linear mean-field equation over ``dt``."""
    d = law.dim
    g0, jac, mean_jac, q = _moment_system(field, kernel, sigma, d)

    def rhs(m, s):
        dm = np.concatenate([m[d:], g0 + mean_jac[d:] @ m])
        return dm, jac @ s + s @ jac.T + q

    m, s = law.mean.copy(), law.cov.copy()
    h = dt / substeps
    for _ in range(substeps):
        k1m, k1s = rhs(m, s)
        k2m, k2s = rhs(m + 0.5 * h * k1m, s + 0.5 * h * k1s)
        k3m, k3s = rhs(m + 0.5 * h * k2m, s + 0.5 * h * k2s)
        k4m, k4s = rhs(m + h * k3m, s + h * k3s)
        m = m + h / 6.0 * (k1m + 2 * k2m + 2 * k3m + k4m)
        s = s + h / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s)
    s = 0.5 * (s + s.T)
    return GaussianLaw(m, s)


def law_trajectory(law: GaussianLaw, field, kernel, sigma, dt, steps):
    """Laws at times ``0, dt, ..., steps*dt``."""
    out = [law]
    for _ in range(steps):
        law = evolve_gaussian_law(law, field, kernel, sigma, dt)
        out.append(law)
    return out


@dataclass
class MeanFieldSystem:
    """Interacting state ``(x, c)`` and fictive state ``(xbar, cbar)``, arrays (..., N, d)."""

    x: np.ndarray
    c: np.ndarray
    xbar: np.ndarray
    cbar: np.ndarray
    sigma: float
    kernel: KernelSpec = dc_field(default_factory=KernelSpec)
    field: ExternalFieldSpec = dc_field(default_factory=ExternalFieldSpec)
    noise: np.ndarray | None = None

    @classmethod
    def from_initial(cls, x0, c0, sigma, kernel=None, field=None) -> "MeanFieldSystem":
        x0 = np.array(x0, dtype=float)
        c0 = np.array(c0, dtype=float)
        if x0.ndim == 1:
            x0, c0 = x0[:, None], c0[:, None]
        if x0.shape != c0.shape:
            raise InvalidParameter("x0 and c0 must have the same shape", module="meanfield")
        if sigma < 0:
            raise InvalidParameter("sigma must be nonnegative", module="meanfield")
        return cls(x0, c0, x0.copy(), c0.copy(), float(sigma),
                   kernel or KernelSpec(), field or ExternalFieldSpec())

    @property
    def count(self) -> int:
        return self.x.shape[-2]

    @property
    def dim(self) -> int:
        return self.x.shape[-1]


def _em_update(x, c, drift, dt, sigma, xi):
    return x + dt * c, c + dt * drift + (math.sqrt(2.0 * dt) * sigma) * xi


def em_step_interacting(sys: MeanFieldSystem, t: float, dt: float, rng=None, noise=None) -> MeanFieldSystem:
    """Euler-Maruyama step of the interacting system; stores the increments for the fictive step."""
    if not dt > 0:
        raise InvalidParameter("dt must be positive", module="meanfield")
    xi = as_stream(rng).standard_normal(sys.c.shape) if noise is None else np.asarray(noise, dtype=float)
    drift = sys.field(t, sys.x, sys.c) + empirical_interaction(sys.kernel, sys.x, sys.c)
    sys.x, sys.c = _em_update(sys.x, sys.c, drift, dt, sys.sigma, xi)
    sys.noise = xi
    return sys


def em_step_fictive(sys: MeanFieldSystem, law: GaussianLaw, t: float, dt: float) -> MeanFieldSystem:
    """Euler-Maruyama step of the fictive system in the field ``F * f_t`` with the stored increments."""
    if sys.noise is None:
        raise CouplingOrderError("fictive step needs the increments of a preceding interacting step",
                                 module="meanfield")
    drift = sys.field(t, sys.xbar, sys.cbar) + convolve_law(sys.kernel, law, sys.xbar, sys.cbar)
    sys.xbar, sys.cbar = _em_update(sys.xbar, sys.cbar, drift, dt, sys.sigma, sys.noise)
    sys.noise = None
    return sys


# -- propagation-of-chaos experiment ----------------------------------------

@dataclass(frozen=True)
class ChaosConfig:
    ns: tuple = (8, 16, 32, 64, 128, 256, 512)
    reps: int = 200
    lam: float = 1.0
    sigma: float = 0.5
    t_end: float = 2.0
    dt: float = 1e-3
    dim: int = 1
    field: ExternalFieldSpec = ExternalFieldSpec()
    kernel: KernelSpec | None = None

    def resolved_kernel(self) -> KernelSpec:
        return self.kernel if self.kernel is not None else KernelSpec(lam=self.lam)

    @property
    def steps(self) -> int:
        n = int(round(self.t_end / self.dt))
        if n < 1 or not math.isclose(n * self.dt, self.t_end, rel_tol=1e-9):
            raise InvalidParameter(f"t_end={self.t_end} must be a multiple of dt={self.dt}", module="meanfield")
        return n


@dataclass
class ChaosResult:
    ns: np.ndarray
    per_rep: dict          # name -> (reps, len(ns))
    fits: dict             # name -> RegressionResult, or a reason string when no fit exists

    COLUMNS = ("mean_sq_coupling_dist", "w2sq_onepoint", "w2sq_pairs", "w2sq_bias")

    def means(self, name):
        return self.per_rep[name].mean(axis=0)

    def columns(self):
        names = ["N", *self.COLUMNS, *(f"{c}_stderr" for c in self.COLUMNS)]
        r = self.per_rep[self.COLUMNS[0]].shape[0]
        cols = [self.ns.astype(np.int64)]
        cols += [self.means(c) for c in self.COLUMNS]
        cols += [self.per_rep[c].std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.full(len(self.ns), np.nan)
                 for c in self.COLUMNS]
        return names, [list(row) for row in zip(*cols)]

    def footer(self):
        out = {}
        for name, fit in self.fits.items():
            if isinstance(fit, str):
                out[f"{name}_slope"] = fit
            else:
                out.update(fit.footer(prefix=f"{name}_"))
        return out


# doubles of pre-drawn noise per chunk; fixed so chunking depends on N only
_CHUNK_BUDGET = 1 << 22


def _chunk_reps(steps, n, d):
    return max(1, _CHUNK_BUDGET // (steps * n * d))


def _pair_points(x, c):
    n2 = (x.shape[0] // 2) * 2
    z = np.concatenate([x[:n2], c[:n2]], axis=1)
    return z.reshape(n2 // 2, -1)


def _chaos_chunk(task):
    cfg, seed, stream_id, n, reps, laws, law_end = task
    d = cfg.dim
    kernel = cfg.resolved_kernel()
    steps = cfg.steps
    f0 = GaussianLaw.standard(d)
    root = RngStream(seed, stream_id)
    streams = [root.spawn("chaos", n, r) for r in reps]
    z0 = np.stack([f0.transform(s.standard_normal((n, 2 * d))) for s in streams])
    noise = np.stack([s.standard_normal((steps, n, d)) for s in streams])
    x0, c0 = z0[..., :d], z0[..., d:]
    sys = MeanFieldSystem(x0.copy(), c0.copy(), x0.copy(), c0.copy(), cfg.sigma, kernel, cfg.field)
    for k in range(steps):
        t = k * cfg.dt
        em_step_interacting(sys, t, cfg.dt, noise=noise[:, k])
        em_step_fictive(sys, laws[k], t, cfg.dt)
    out = {name: np.empty(len(reps)) for name in ChaosResult.COLUMNS}
    for i, s in enumerate(streams):
        x, c, xb, cb = sys.x[i], sys.c[i], sys.xbar[i], sys.cbar[i]
        out["mean_sq_coupling_dist"][i] = float(np.sum((x[0] - xb[0]) ** 2) + np.sum((c[0] - cb[0]) ** 2))
        z = np.concatenate([x, c], axis=1)
        fresh_a = law_end.transform(s.standard_normal((n, 2 * d)))
        fresh_b = law_end.transform(s.standard_normal((n, 2 * d)))
        out["w2sq_onepoint"][i] = assignment_cost(*optimal_matching(z, fresh_a, max_size=None)) ** 2
        out["w2sq_bias"][i] = assignment_cost(*optimal_matching(fresh_a, fresh_b, max_size=None)) ** 2
        # fictive particles are i.i.d. f_t, so their disjoint pairs sample f_t (x) f_t
        out["w2sq_pairs"][i] = assignment_cost(*optimal_matching(_pair_points(x, c), _pair_points(xb, cb),
                                                                 max_size=None)) ** 2
    return out


def chaos_convergence_experiment(cfg: ChaosConfig = ChaosConfig(), rng=None, workers: int | None = None
                                 ) -> ChaosResult:
    """Coupled interacting/fictive runs over ensemble sizes, with log-log rate fits.

    Each (N, repetition) owns the substream ``("chaos", N, rep)``: initial
    data are drawn from ``f_0`` (standard Gaussian), then the full noise path,
    then two fresh samples of ``f_t`` used by the one-point estimator and its
    self-distance bias.
    """
    ns = [int(n) for n in cfg.ns]
    if len(ns) < 2 or min(ns) < 2:
        raise InvalidParameter("need at least two ensemble sizes, each >= 2", module="meanfield")
    if cfg.reps < 1:
        raise InvalidParameter("reps must be positive", module="meanfield")
    kernel = cfg.resolved_kernel()
    d = cfg.dim
    steps = cfg.steps
    stream = as_stream(rng)
    laws = law_trajectory(GaussianLaw.standard(d), cfg.field, kernel, cfg.sigma, cfg.dt, steps)
    tasks = []
    for n in ns:
        for block in _parallel.chunks(cfg.reps, _chunk_reps(steps, n, d)):
            tasks.append((cfg, stream.seed, stream.stream_id, n, list(block), laws[:-1], laws[-1]))
    results = _parallel.ordered_map(_chaos_chunk, tasks, workers)

    per_rep = {name: np.empty((cfg.reps, len(ns))) for name in ChaosResult.COLUMNS}
    for task, res in zip(tasks, results):
        j = ns.index(task[3])
        for name in ChaosResult.COLUMNS:
            per_rep[name][task[4], j] = res[name]

    fits = {}
    x = np.asarray(ns, dtype=float)
    for name in ChaosResult.COLUMNS:
        mean = per_rep[name].mean(axis=0)
        if not np.all(mean > 0):
            fits[name] = "degenerate"
        elif len(ns) < 3:
            fits[name] = "insufficient"
        else:
            fits[name] = loglog_fit(x, mean, rng=stream.spawn("fit", name), replicates=per_rep[name])
    return ChaosResult(np.asarray(ns), per_rep, fits)
