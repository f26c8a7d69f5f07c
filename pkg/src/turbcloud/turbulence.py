"""Synthetic spectral turbulence.

The velocity field is a finite sum of random Fourier modes,

    u(t, x) = sum_n a_n cos(omega_n t + k_n . x + phi_n),

whose wavenumber magnitudes split Pope's model spectrum into bands of equal
energy. Mode frequencies follow a Gaussian of width ``a_hunt |k| u0`` and,
for ``dim >= 2``, amplitudes are projected orthogonal to their wavevector so
the field is divergence free.
"""
from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import InvalidParameter, SpectrumNormalizationError, UnsupportedDimension
from .rng import RngStream, as_stream

# Pope model-spectrum constants
_C_L = 6.78
_BETA = 5.2
_P0 = 0.4
_PREFACTOR = 9.0 / 4.0

_QUAD_RTOL = 1e-12
_NODES_PER_DECADE = 8


@dataclass(frozen=True)
class SpectrumParams:
    """Parameters of the model spectrum and of the mode sampling.

    ``epsilon`` defaults to ``u0**3 * k0`` and ``eta`` to the Kolmogorov length
    for which the spectrum integrates to ``1.5 * u0**2``; see :func:`resolve`.
    """

    u0: float = 1.0
    k0: float = 1.0
    epsilon: float | None = None
    eta: float | None = None
    a_hunt: float = 0.5
    n_modes: int = 400
    dim: int = 3
    divergence_free: bool = True

    def __post_init__(self):
        if not self.u0 > 0 or not self.k0 > 0:
            raise InvalidParameter("u0 and k0 must be positive", module="turbulence")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidParameter("epsilon must be positive", module="turbulence")
        if self.eta is not None and not self.eta > 0:
            raise InvalidParameter("eta must be positive", module="turbulence")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise InvalidParameter("n_modes must be a positive integer", module="turbulence")
        if self.dim not in (1, 2, 3):
            raise InvalidParameter(f"dim must be 1, 2 or 3, got {self.dim}", module="turbulence")
        if not 0.4 <= self.a_hunt <= 0.51:
            warnings.warn(f"a_hunt={self.a_hunt} lies outside the usual range [0.4, 0.51]", stacklevel=3)

    @property
    def target_energy(self) -> float:
        return 1.5 * self.u0**2


class SpectralMode(NamedTuple):
    amplitude: np.ndarray
    wavevector: np.ndarray
    omega: float
    phase: float


# ---------------------------------------------------------------------------
# spectrum
# ---------------------------------------------------------------------------

def _energy(k, epsilon, k0, eta):
    x = k / k0
    shape = (x / np.sqrt(x * x + _C_L)) ** (11.0 / 3.0)
    cutoff = np.exp(-_BETA * (((k * eta) ** 4 + _P0**4) ** 0.25 - _P0))
    return _PREFACTOR * epsilon ** (2.0 / 3.0) * k ** (-5.0 / 3.0) * shape * cutoff


def pope_energy(k_mag, p: SpectrumParams):
    """Model energy spectrum E(|k|) in m^3/s^2. Accepts scalars or arrays."""
    k = np.asarray(k_mag, dtype=float)
    if np.any(~(k > 0)):
        raise InvalidParameter("pope_energy requires k_mag > 0", module="turbulence")
    p = resolve(p)
    e = _energy(k, p.epsilon, p.k0, p.eta)
    return float(e) if e.ndim == 0 else e


def _small_k_coefficient(epsilon, k0):
    # E ~ coef * k**2 as k -> 0
    return _PREFACTOR * epsilon ** (2.0 / 3.0) * k0 ** (-11.0 / 3.0) * _C_L ** (-11.0 / 6.0)


def _quad_log(f, a, b):
    """Integral of f(k) dk over [a, b] using the substitution k = exp(s)."""
    if b <= a:
        return 0.0
    val, _ = integrate.quad(lambda s: f(math.exp(s)) * math.exp(s), math.log(a), math.log(b),
                            epsabs=0.0, epsrel=_QUAD_RTOL, limit=200)
    return val


class _CumulativeTable:
    """Node values of the cumulative spectrum on a log grid, k_min = 1e-6 k0 to k_max = 10/eta."""

    def __init__(self, epsilon, k0, eta):
        self.epsilon, self.k0, self.eta = epsilon, k0, eta
        self.k_min = 1e-6 * k0
        self.k_max = max(10.0 / eta, 10.0 * self.k_min)
        n = max(2, int(math.ceil(math.log10(self.k_max / self.k_min) * _NODES_PER_DECADE)) + 1)
        self.nodes = np.geomspace(self.k_min, self.k_max, n)
        f = self.integrand
        seg = [_quad_log(f, a, b) for a, b in zip(self.nodes[:-1], self.nodes[1:])]
        head = _small_k_coefficient(epsilon, k0) * self.k_min**3 / 3.0
        self.cumulative = head + np.concatenate([[0.0], np.cumsum(seg)])
        # beyond 10/eta the cutoff factor is below exp(-49)
        tail = _quad_log(f, self.k_max, 1e3 * self.k_max)
        self.total = float(self.cumulative[-1] + tail)

    def integrand(self, k):
        return _energy(k, self.epsilon, self.k0, self.eta)

    def __call__(self, k: float) -> float:
        if k <= 0.0:
            return 0.0
        if k <= self.k_min:
            return _small_k_coefficient(self.epsilon, self.k0) * k**3 / 3.0
        if k >= self.k_max:
            return float(self.cumulative[-1] + _quad_log(self.integrand, self.k_max, k))
        i = int(np.searchsorted(self.nodes, k, side="right")) - 1
        return float(self.cumulative[i] + _quad_log(self.integrand, self.nodes[i], k))

    def invert(self, target: float, rtol: float = 1e-10) -> float:
        if target <= 0.0:
            raise InvalidParameter("target energy must be positive", module="turbulence")
        head = self.cumulative[0]
        if target <= head:
            return (3.0 * target / _small_k_coefficient(self.epsilon, self.k0)) ** (1.0 / 3.0)
        if target < self.cumulative[-1]:
            i = int(np.searchsorted(self.cumulative, target, side="right")) - 1
            lo, hi = self.nodes[i], self.nodes[i + 1]
        else:
            lo, hi = self.k_max, 2.0 * self.k_max
            while self(hi) < target:
                lo, hi = hi, 2.0 * hi
        # bisection in log k
        while hi - lo > rtol * lo:
            mid = math.sqrt(lo * hi)
            if self(mid) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@functools.lru_cache(maxsize=64)
def _table(epsilon, k0, eta) -> _CumulativeTable:
    return _CumulativeTable(epsilon, k0, eta)


def total_energy(p: SpectrumParams) -> float:
    """Integral of the model spectrum over (0, inf)."""
    p = resolve(p)
    return _table(p.epsilon, p.k0, p.eta).total


@functools.lru_cache(maxsize=64)
def calibrate_eta(u0: float, k0: float, epsilon: float) -> float:
    """Kolmogorov length for which the spectrum integrates to ``1.5 * u0**2``."""
    target = 1.5 * u0**2

    def excess(log_eta):
        return _CumulativeTable(epsilon, k0, math.exp(log_eta)).total - target

    lo, hi = math.log(1e-12 / k0), math.log(1e2 / k0)
    f_lo = excess(lo)
    if f_lo <= 0.0:
        raise SpectrumNormalizationError(
            f"spectrum with epsilon={epsilon}, k0={k0} cannot reach the target energy {target}: "
            f"total energy is only {f_lo + target} even for eta -> 0",
            total_energy=f_lo + target, target=target)
    log_eta = optimize.brentq(excess, lo, hi, xtol=1e-13, rtol=1e-14)
    return math.exp(log_eta)


def resolve(p: SpectrumParams) -> SpectrumParams:
    """Fill in default ``epsilon`` and ``eta``."""
    if p.epsilon is not None and p.eta is not None:
        return p
    eps = p.epsilon if p.epsilon is not None else p.u0**3 * p.k0
    eta = p.eta if p.eta is not None else calibrate_eta(p.u0, p.k0, eps)
    return replace(p, epsilon=eps, eta=eta)


def cumulative_energy(k_mag: float, p: SpectrumParams) -> float:
    """Integral of the model spectrum from 0 to ``k_mag``."""
    if k_mag < 0:
        raise InvalidParameter("cumulative_energy requires k_mag >= 0", module="turbulence")
    p = resolve(p)
    return _table(p.epsilon, p.k0, p.eta)(float(k_mag))


def mode_energy_target(n: int, p: SpectrumParams) -> float:
    return p.target_energy * (2 * n - 1) / (2 * p.n_modes)


def invert_mode_wavenumber(n: int, p: SpectrumParams) -> float:
    """Wavenumber magnitude of mode ``n`` (1-based): cumulative energy equals 1.5 u0^2 (2n-1)/(2N)."""
    if not 1 <= n <= p.n_modes:
        raise InvalidParameter(f"mode index must be in [1, {p.n_modes}], got {n}", module="turbulence")
    p = resolve(p)
    tab = _table(p.epsilon, p.k0, p.eta)
    target = mode_energy_target(n, p)
    if target > tab.total:
        raise SpectrumNormalizationError(
            f"mode {n}: target energy {target:.6g} exceeds total spectral energy {tab.total:.6g}; "
            "(u0, epsilon, eta) are inconsistent",
            total_energy=tab.total, target=target)
    return tab.invert(target)


def mode_wavenumbers(p: SpectrumParams) -> np.ndarray:
    return np.array([invert_mode_wavenumber(n, p) for n in range(1, p.n_modes + 1)])


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SyntheticField:
    """An immutable sampled mode collection; ``params`` is None for hand-built fields."""

    amplitudes: np.ndarray
    wavevectors: np.ndarray
    omegas: np.ndarray
    phases: np.ndarray
    params: SpectrumParams | None = field(default=None, compare=False)

    def __post_init__(self):
        amp = _frozen(self.amplitudes)
        kv = _frozen(self.wavevectors)
        if amp.ndim != 2 or amp.shape != kv.shape:
            raise InvalidParameter("amplitudes and wavevectors must both have shape (n_modes, dim)",
                                   module="turbulence")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "wavevectors", kv)
        object.__setattr__(self, "omegas", _frozen(np.reshape(self.omegas, -1)))
        object.__setattr__(self, "phases", _frozen(np.reshape(self.phases, -1)))
        if self.params is not None and self.params.n_modes != amp.shape[0]:
            raise InvalidParameter("number of modes does not match params.n_modes", module="turbulence")

    @classmethod
    def from_modes(cls, modes: Sequence[SpectralMode], dim: int | None = None) -> "SyntheticField":
        if not modes:
            if dim is None:
                raise InvalidParameter("dim is required for an empty field", module="turbulence")
            return cls(np.zeros((0, dim)), np.zeros((0, dim)), np.zeros(0), np.zeros(0))
        amp = np.array([np.atleast_1d(m.amplitude) for m in modes], dtype=float)
        kv = np.array([np.atleast_1d(m.wavevector) for m in modes], dtype=float)
        return cls(amp, kv, [m.omega for m in modes], [m.phase for m in modes])

    @classmethod
    def zero(cls, dim: int) -> "SyntheticField":
        return cls.from_modes([], dim=dim)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[1]

    @property
    def n_modes(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def modes(self) -> list[SpectralMode]:
        return [SpectralMode(a.copy(), k.copy(), float(w), float(ph))
                for a, k, w, ph in zip(self.amplitudes, self.wavevectors, self.omegas, self.phases)]

    def speed_bound(self) -> float:
        """Upper bound on |u| anywhere: sum of amplitude norms."""
        return float(np.linalg.norm(self.amplitudes, axis=1).sum())

    def kernel_args(self):
        return (np.ascontiguousarray(self.amplitudes), np.ascontiguousarray(self.wavevectors),
                np.ascontiguousarray(self.omegas), np.ascontiguousarray(self.phases))


def _orthogonal_unit(k_hat):
    """Some unit vector orthogonal to k_hat (used only for degenerate projections)."""
    if k_hat.size == 2:
        return np.array([-k_hat[1], k_hat[0]])
    axis = np.zeros(3)
    axis[np.argmin(np.abs(k_hat))] = 1.0
    v = np.cross(k_hat, axis)
    return v / np.linalg.norm(v)


def sample_field(p: SpectrumParams, rng: RngStream | int | None = None) -> SyntheticField:
    """Draw one realization of the synthetic field."""
    rng = as_stream(rng)
    p = resolve(p)
    n, d = p.n_modes, p.dim
    kmag = mode_wavenumbers(p)

    k_dir = rng.uniform_unit_vector(d, size=n)
    a_mag = np.abs(rng.normal(0.0, math.sqrt(2.0 * p.u0**2 / n), size=n))
    a_dir = rng.uniform_unit_vector(d, size=n)
    phases = 2.0 * np.pi * rng.uniform(size=n)
    omegas = rng.normal(0.0, p.a_hunt * kmag * p.u0)

    if d >= 2 and p.divergence_free:
        a_dir = a_dir - np.sum(a_dir * k_dir, axis=1, keepdims=True) * k_dir
        norms = np.linalg.norm(a_dir, axis=1)
        for i in np.flatnonzero(norms < 1e-12):
            a_dir[i] = _orthogonal_unit(k_dir[i])
            norms[i] = 1.0
        a_dir /= norms[:, None]
        # remove the rounding residue of the projection
        a_dir -= np.sum(a_dir * k_dir, axis=1, keepdims=True) * k_dir

    return SyntheticField(a_mag[:, None] * a_dir, kmag[:, None] * k_dir, omegas, phases, params=p)


# phase arguments reach |k||x| ~ 1e5; accumulate them in extended precision
_XP = np.longdouble
_CHUNK = 1 << 18


def _phases(f: SyntheticField, t, pts):
    return (f.omegas.astype(_XP) * _XP(t) + pts.astype(_XP) @ f.wavevectors.T.astype(_XP)
            + f.phases.astype(_XP))


def eval_velocity(f: SyntheticField, t: float, x) -> np.ndarray:
    """Velocity at time ``t`` and position(s) ``x`` of shape ``(dim,)`` or ``(P, dim)``."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != f.dim:
        raise InvalidParameter(f"positions have dimension {pts.shape[1]}, field has {f.dim}", module="turbulence")
    out = np.zeros((pts.shape[0], f.dim))
    if f.n_modes:
        amp = f.amplitudes.astype(_XP)
        step = max(1, _CHUNK // f.n_modes)
        for i in range(0, pts.shape[0], step):
            out[i:i + step] = (np.cos(_phases(f, t, pts[i:i + step])) @ amp).astype(float)
    return out[0] if single else out


def eval_divergence(f: SyntheticField, t: float, x) -> float | np.ndarray:
    """Analytic divergence, -sum (a_n . k_n) sin(omega_n t + k_n . x + phi_n)."""
    if f.dim < 2:
        raise UnsupportedDimension("divergence is only defined for dim >= 2", module="turbulence")
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    ak = np.sum(f.amplitudes * f.wavevectors, axis=1).astype(_XP)
    div = -(np.sin(_phases(f, t, pts)) @ ak).astype(float)
    return float(div[0]) if x.ndim == 1 else div


def binned_spectrum(f: SyntheticField, n_bins: int = 12, k_range=None, min_count: int = 1):
    """Shell-binned energy density from mode energies |a_n|^2 / 2.

    Returns geometric bin centres and energy per unit wavenumber. Bins holding
    fewer than ``min_count`` modes are dropped.
    """
    kmag = np.linalg.norm(f.wavevectors, axis=1)
    energy = 0.5 * np.sum(f.amplitudes**2, axis=1)
    lo, hi = k_range if k_range is not None else (kmag.min(), kmag.max() * (1 + 1e-12))
    edges = np.geomspace(lo, hi, n_bins + 1)
    e_bin, _ = np.histogram(kmag, bins=edges, weights=energy)
    count, _ = np.histogram(kmag, bins=edges)
    centres = np.sqrt(edges[:-1] * edges[1:])
    density = e_bin / np.diff(edges)
    keep = (count >= max(1, min_count)) & (density > 0)
    return centres[keep], density[keep]


def spectrum_slope(f: SyntheticField, p: SpectrumParams, n_bins: int = 12, min_count: int = 3) -> float:
    """Log-log slope of the binned spectrum over the inertial range.

    Equal-energy modes thin out as ``k^(-5/3)``; bins with fewer than
    ``min_count`` modes are dominated by amplitude noise and left out.
    """
    from .stats import linear_fit
    k, e = binned_spectrum(f, n_bins, inertial_range(p), min_count)
    if k.size < 3:
        return math.nan
    return linear_fit(np.log(k), np.log(e))[0]


def inertial_range(p: SpectrumParams) -> tuple[float, float]:
    """Wavenumber band well inside the -5/3 range: [10 k0, 0.01/eta]."""
    p = resolve(p)
    return 10.0 * p.k0, 0.01 / p.eta


def write_modes_csv(f: SyntheticField, path, fmt: str = "csv"):
    from .io import write_table
    d = f.dim
    axes = "xyz"[:d]
    cols = [f"a_{c}" for c in axes] + [f"k_{c}" for c in axes] + ["omega", "phase"]
    rows = np.column_stack([f.amplitudes, f.wavevectors, f.omegas, f.phases])
    write_table(path, cols, rows, fmt=fmt)


def read_modes_csv(path) -> SyntheticField:
    data = np.genfromtxt(path, delimiter=None if str(path).endswith(".tsv") else ",", names=True, comments="#")
    data = np.atleast_1d(data)
    names = data.dtype.names
    axes = [c[2:] for c in names if c.startswith("a_")]
    amp = np.column_stack([data[f"a_{c}"] for c in axes])
    kv = np.column_stack([data[f"k_{c}"] for c in axes])
    return SyntheticField(amp, kv, data["omega"], data["phase"])
