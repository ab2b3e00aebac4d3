"""Exact samplers and densities for the stable ingredients.

Conventions (fixed throughout the package):

* motion generator has characteristic exponent -|z|^alpha, so alpha = 2
  is Brownian motion with per-coordinate variance 2t and the transition
  density obeys p_at(x) = a^(-d/alpha) p_t(a^(-1/alpha) x);
* the branching noise is totally skewed (1+beta)-stable with
  characteristic function exp{-c |z|^(1+beta) (1 - i sgn(z) tan(pi(1+beta)/2))},
  which degenerates to a centered Gaussian of variance 2c at beta = 1.
"""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import special, stats
from scipy.interpolate import CubicSpline

__all__ = [
    "StableMotionSpec", "SkewedStableSpec", "OffspringLaw",
    "sample_motion_increment", "sample_skewed_stable",
    "offspring_pmf", "sample_offspring",
    "transition_density", "apply_semigroup", "DensityTable",
]

_TABLE_POINTS = 2 ** 14       # radial grid size at t = 1
_OFFSPRING_CUTOFF = 10 ** 6


# ---------------------------------------------------------------------------
# Chambers-Mallows-Stuck construction, parametrization with the tan factor
# ---------------------------------------------------------------------------

def _cms_skewed(index: float, rng: np.random.Generator, size) -> np.ndarray:
    """Standard totally-skewed-right stable draw, char. fn
    exp{-|z|^index (1 - i sgn(z) tan(pi*index/2))}, index != 1, != 2."""
    u = np.pi * (rng.random(size) - 0.5)
    w = rng.standard_exponential(size)
    tan_half = np.tan(np.pi * index / 2.0)
    bb = np.arctan(tan_half) / index
    dd = (1.0 + tan_half ** 2) ** (1.0 / (2.0 * index))
    s = np.sin(index * (u + bb)) / np.cos(u) ** (1.0 / index)
    t = (np.cos(u - index * (u + bb)) / w) ** ((1.0 - index) / index)
    return dd * s * t


def _positive_stable(alpha_half: float, t, rng: np.random.Generator, size):
    """Subordinator draw S with E exp(-lam S) = exp(-t lam^alpha_half),
    0 < alpha_half < 1."""
    x = _cms_skewed(alpha_half, rng, size)
    scale = (np.asarray(t) * np.cos(np.pi * alpha_half / 2.0)) ** (1.0 / alpha_half)
    return scale * x


@dataclass(frozen=True)
class StableMotionSpec:
    alpha: float
    dimension: int = 1

    def __post_init__(self):
        if not (0 < self.alpha <= 2):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")


@dataclass(frozen=True)
class SkewedStableSpec:
    """Totally skewed right (1+beta)-stable noise, skewness intensity 1."""
    beta: float
    scale: float = 1.0

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    @property
    def index(self) -> float:
        return 1.0 + self.beta


def sample_motion_increment(spec: StableMotionSpec, dt, rng: np.random.Generator,
                            size: Optional[int] = None) -> np.ndarray:
    """Increment(s) distributed as p_dt.

    dt may be a scalar or an array of per-particle durations; the result
    has shape (n, dimension) for array dt or (size, dimension) otherwise.
    alpha = 2 draws sqrt(2 dt) N(0, I); alpha < 2 subordinates a Gaussian
    by a positive (alpha/2)-stable time change calibrated so the
    characteristic function is exp(-dt |z|^alpha).
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("dt must be > 0")
    if size is None:
        n = dt.size if dt.ndim > 0 else 1
    else:
        n = size
    d = spec.dimension
    z = rng.standard_normal((n, d))
    if spec.alpha == 2:
        return np.sqrt(2.0 * dt).reshape(-1, 1) * z
    s = _positive_stable(spec.alpha / 2.0, dt, rng, n)
    return np.sqrt(2.0 * s).reshape(-1, 1) * z


def sample_skewed_stable(spec: SkewedStableSpec, rng: np.random.Generator,
                         size=None) -> np.ndarray:
    """Draws with char. fn exp{-scale |z|^(1+beta)(1 - i sgn z tan(pi(1+beta)/2))}."""
    shape = () if size is None else size
    if spec.beta == 1:
        return np.sqrt(2.0 * spec.scale) * rng.standard_normal(shape)
    x = _cms_skewed(spec.index, rng, shape)
    return spec.scale ** (1.0 / spec.index) * x


# ---------------------------------------------------------------------------
# Offspring law: generating function s + (1-s)^(1+beta)/(1+beta)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OffspringLaw:
    beta: float
    pmf: np.ndarray = field(repr=False)       # p_0 .. p_cutoff
    cutoff: int
    tail_mass: float                           # sum_{k > cutoff} p_k, exact
    tail_mean: float                           # sum_{k > cutoff} k p_k, exact
    _cdf: np.ndarray = field(repr=False, default=None)

    @property
    def mean(self) -> float:
        k = np.arange(self.pmf.size)
        return float(k @ self.pmf + self.tail_mean)

    def cdf(self) -> np.ndarray:
        if self._cdf is None:
            object.__setattr__(self, "_cdf", np.cumsum(self.pmf))
        return self._cdf


def offspring_pmf(beta: float, cutoff: int = _OFFSPRING_CUTOFF) -> OffspringLaw:
    """Probabilities p_k of the critical (1+beta)-branching law.

    Stable recursion p_0 = 1/(1+beta), p_1 = 0, p_2 = beta/2,
    p_{k+1} = p_k (k-1-beta)/(k+1).  Tail mass and tail mean beyond the
    cutoff have the closed forms (K+1) p_{K+1} / (1+beta) and
    K (K+1) p_{K+1} / beta obtained by telescoping the recursion, so
    criticality is exact in expectation.
    """
    if not (0 < beta <= 1):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if beta == 1:
        pm = np.array([0.5, 0.0, 0.5])
        return OffspringLaw(beta, pm, cutoff=2, tail_mass=0.0, tail_mean=0.0)
    k = np.arange(2, cutoff + 1, dtype=float)
    # p_{k+1}/p_k = (k-1-beta)/(k+1), done in log space for k up to 1e6
    ratios = (k - 1.0 - beta) / (k + 1.0)
    logp = np.empty(cutoff + 1)
    logp[2] = np.log(beta / 2.0)
    np.cumsum(np.log(ratios[:-1]), out=logp[3:])
    logp[3:] += logp[2]
    pmf = np.zeros(cutoff + 1)
    pmf[0] = 1.0 / (1.0 + beta)
    pmf[2:] = np.exp(logp[2:])
    p_next = pmf[cutoff] * (cutoff - 1.0 - beta) / (cutoff + 1.0)
    tail_mass = (cutoff + 1) * p_next / (1.0 + beta)
    tail_mean = cutoff * (cutoff + 1) * p_next / beta
    return OffspringLaw(beta, pmf, cutoff=cutoff,
                        tail_mass=tail_mass, tail_mean=tail_mean)


def sample_offspring(law: OffspringLaw, rng: np.random.Generator,
                     size=None) -> np.ndarray:
    """Inverse-CDF offspring counts; the residual mass beyond the cutoff is
    drawn from the asymptotic p_k ~ k^(-2-beta) shape."""
    shape = () if size is None else size
    u = rng.random(shape)
    cdf = law.cdf()
    k = np.searchsorted(cdf, u, side="right")
    if law.tail_mass > 0.0:
        over = k > law.cutoff
        if np.any(over):
            # continuous Pareto tail matched to P(K > m) ~ (m/K0)^-(1+beta)
            v = rng.random(int(np.count_nonzero(over)))
            kk = np.floor((law.cutoff + 0.5) * v ** (-1.0 / (1.0 + law.beta)))
            k = np.asarray(k)
            k[over] = kk.astype(np.int64) + 1
    return k


# ---------------------------------------------------------------------------
# Transition densities
# ---------------------------------------------------------------------------

def tail_constant(alpha: float, d: int) -> float:
    """A(d, alpha) in p_t(x) ~ t A |x|^(-d-alpha), from the Fourier expansion
    of exp(-t|z|^alpha) to first order."""
    return (alpha * 2 ** (alpha - 1) * special.gamma((d + alpha) / 2.0)
            / (np.pi ** (d / 2.0) * special.gamma(1.0 - alpha / 2.0)))


def _cache_dir() -> Path:
    root = os.environ.get("OCCUFLUCT_CACHE")
    p = Path(root) if root else Path.home() / ".cache" / "occufluct"
    p.mkdir(parents=True, exist_ok=True)
    return p


@dataclass
class DensityTable:
    """Radial density of p_1 for one (alpha, d), cubic-interpolated.

    Built once from the subordination integral
    p_1(x) = E_S[(4 pi S)^(-d/2) exp(-|x|^2 / 4S)] with S the positive
    (alpha/2)-stable time change; beyond the grid the first-order tail
    A(d, alpha) |x|^(-d-alpha) takes over.  Self-similarity serves all t.
    """

    alpha: float
    d: int
    r: np.ndarray
    values: np.ndarray
    _spline: CubicSpline = None

    VERSION = 1

    def __post_init__(self):
        self._spline = CubicSpline(self.r, self.values)
        self._tail_c = tail_constant(self.alpha, self.d)
        self._rmax = self.r[-1]

    def __call__(self, radius) -> np.ndarray:
        radius = np.abs(np.asarray(radius, dtype=float))
        out = np.empty_like(radius)
        inside = radius <= self._rmax
        out[inside] = self._spline(radius[inside])
        far = ~inside
        if np.any(far):
            out[far] = self._tail_c * radius[far] ** (-self.d - self.alpha)
        return np.maximum(out, 0.0)

    def checksum(self) -> str:
        return hashlib.sha256(self.values.tobytes()).hexdigest()

    def save(self, path: Path):
        np.savez(path, version=self.VERSION, alpha=self.alpha, d=self.d,
                 grid_size=self.r.size, r=self.r, values=self.values,
                 checksum=self.checksum())

    @classmethod
    def load(cls, path: Path) -> "DensityTable":
        z = np.load(path, allow_pickle=False)
        if int(z["version"]) != cls.VERSION:
            raise ValueError("density table version mismatch")
        tab = cls(float(z["alpha"]), int(z["d"]), z["r"], z["values"])
        if str(z["checksum"]) != tab.checksum():
            raise ValueError("density table checksum mismatch")
        return tab


def _build_table(alpha: float, d: int, n: int = _TABLE_POINTS) -> DensityTable:
    # subordinator density on a log grid wide enough for both tails
    ah = alpha / 2.0
    c = float(np.cos(np.pi * ah / 2.0) ** (1.0 / ah))
    s = np.geomspace(1e-5, 1e7, 4001)
    fs = stats.levy_stable.pdf(s / c, ah, 1.0) / c
    w = np.empty_like(s)                      # trapezoid weights on log grid
    w[1:-1] = (s[2:] - s[:-2]) / 2.0
    w[0] = (s[1] - s[0]) / 2.0
    w[-1] = (s[-1] - s[-2]) / 2.0
    wf = w * fs
    r_max = 60.0 ** (1.0 / min(alpha, 1.0))   # tail formula takes over beyond
    r = np.concatenate([[0.0], np.geomspace(1e-4, max(r_max, 60.0), n - 1)])
    gauss = (4.0 * np.pi * s) ** (-d / 2.0)
    vals = np.empty_like(r)
    chunk = 256
    for i in range(0, r.size, chunk):
        rr = r[i:i + chunk, None]
        vals[i:i + chunk] = np.sum(
            wf * gauss * np.exp(-(rr ** 2) / (4.0 * s)), axis=1)
    return DensityTable(alpha, d, r, vals)


_tables: dict = {}


def density_table(alpha: float, d: int) -> DensityTable:
    """Cached radial table of p_1 (memory + versioned file cache)."""
    if d > 3:
        raise ValueError("radial density tabulation provided for d <= 3 only")
    key = (round(alpha, 12), d)
    if key in _tables:
        return _tables[key]
    fname = _cache_dir() / f"ptable_a{key[0]}_d{d}_v{DensityTable.VERSION}.npz"
    if fname.exists():
        try:
            tab = DensityTable.load(fname)
            _tables[key] = tab
            return tab
        except ValueError:
            fname.unlink()
    tab = _build_table(alpha, d)
    tab.save(fname)
    _tables[key] = tab
    return tab


_subord_tables: dict = {}


def subordinator_pdf(alpha: float, u, t) -> np.ndarray:
    """Density of the time change S_t with E exp(-lam S_t) = exp(-t lam^(alpha/2)).

    One log-log table of the standard totally-skewed (alpha/2)-stable
    density serves all t through the stable scaling.
    """
    ah = alpha / 2.0
    key = round(ah, 12)
    if key not in _subord_tables:
        x = np.geomspace(1e-9, 1e13, 6001)
        f = stats.levy_stable.pdf(x, ah, 1.0)
        _subord_tables[key] = (np.log(x), np.log(np.maximum(f, 1e-300)))
    lx, lf = _subord_tables[key]
    c = (float(t) * np.cos(np.pi * ah / 2.0)) ** (1.0 / ah)
    u = np.asarray(u, dtype=float) / c
    with np.errstate(divide="ignore"):
        out = np.exp(np.interp(np.log(u), lx, lf,
                               left=-np.inf, right=-np.inf)) / c
    return out


def transition_density(spec: StableMotionSpec, t, x) -> np.ndarray:
    """p_t(x) for the standard symmetric alpha-stable motion.

    alpha = 2 and alpha = 1 use the closed forms; other alpha reduce to
    the tabulated t = 1 radial profile through self-similarity.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be > 0")
    x = np.asarray(x, dtype=float)
    d = spec.dimension
    if x.ndim and x.shape[-1] == d and d > 1:
        radius = np.sqrt(np.sum(x ** 2, axis=-1))
    else:
        radius = np.abs(x)
    a = spec.alpha
    if a == 2:
        return (4.0 * np.pi * t) ** (-d / 2.0) * np.exp(-(radius ** 2) / (4.0 * t))
    if a == 1:
        c_d = special.gamma((d + 1) / 2.0) / np.pi ** ((d + 1) / 2.0)
        return c_d * t / (t ** 2 + radius ** 2) ** ((d + 1) / 2.0)
    tab = density_table(a, d)
    scale = t ** (1.0 / a)
    return t ** (-d / a) * tab(radius / scale)


def apply_semigroup(spec: StableMotionSpec, dt: float, f: np.ndarray,
                    dx: float) -> np.ndarray:
    """T_dt f = p_dt * f on a uniform d = 1 lattice of spacing dx.

    Spectral (FFT) convolution: the DFT is multiplied by exp(-dt |w|^alpha),
    which keeps total mass exactly and makes repeated steps compose
    exactly; periodic wrap is the caller's domain-margin responsibility.
    """
    if spec.dimension != 1:
        raise ValueError("lattice semigroup is d = 1 only")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    f = np.asarray(f, dtype=float)
    n = f.shape[-1]
    if n < 16:
        raise ValueError("grid too small (need >= 16 points)")
    w = 2.0 * np.pi * np.fft.rfftfreq(n, d=dx)
    mult = np.exp(-dt * np.abs(w) ** spec.alpha)
    return np.fft.irfft(np.fft.rfft(f, axis=-1) * mult, n, axis=-1)
