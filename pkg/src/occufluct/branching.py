"""Event-driven Monte Carlo of the branching particle system.

Particles carry exponential(V) death clocks and branch critically at the
death position; motion is advanced by exact stable increments, so
positions at observation-grid times are exact in distribution and the
only discretization error is the trapezoidal occupation quadrature.

For alpha = 2 a far-field fast path puts particles to sleep while a
reflection-principle bound certifies (to ~1e-15 per decision) that they
cannot reach the observables; their death positions are still sampled
exactly, so the branching genealogy is unaffected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy import special

from .observables import Observable, ObservableSet, joint_support_radius
from .regimes import ModelParams
from .stable_core import (OffspringLaw, StableMotionSpec, offspring_pmf,
                          sample_motion_increment, sample_offspring)

_SLEEP_EPS = 1e-9    # per-decision miss probability for the far-field skip
_DEFAULT_CAP = 10 ** 7


class MeasureForm(Enum):
    # Smoothed is the literal density 1/(1 + |x|^gamma), which is
    # Lebesgue/2 at gamma = 0; PurePower is |x|^-gamma (Lebesgue at
    # gamma = 0).  The two differ by bounded factors and give the same
    # limits, so either normalization of the gamma = 0 model is valid.
    SMOOTHED = "Smoothed"
    PURE_POWER = "PurePower"


@dataclass(frozen=True)
class InitialFieldSpec:
    params: ModelParams
    h_t: float = 1.0
    truncation_radius: float = 10.0
    measure_form: MeasureForm = MeasureForm.SMOOTHED

    def __post_init__(self):
        if self.h_t < 1:
            raise ValueError("h_t must be >= 1")
        if self.truncation_radius <= 0:
            raise ValueError("truncation_radius must be > 0")
        if (self.measure_form is MeasureForm.PURE_POWER
                and self.params.gamma >= self.params.d):
            raise ValueError("PurePower measure needs gamma < d "
                             "(non-integrable at the origin otherwise)")
        if not self.params.simulateable:
            raise ValueError(f"d = {self.params.d} is not simulateable "
                             "(analytic continuation only)")


@dataclass
class OccupationSeries:
    observable_id: str
    time_grid: np.ndarray
    values: np.ndarray
    occupation: np.ndarray      # cumulative trapezoid of values
    extinction_time: float      # +inf sentinel when occupied at horizon


def default_truncation_radius(params: ModelParams, horizon: float,
                              obs_radius: float = 1.0) -> float:
    """Documented engineering rule R* = 10 (T t_max)^(1/alpha) + obs radius."""
    return 10.0 * horizon ** (1.0 / params.alpha) + obs_radius


def surface_measure(d: int) -> float:
    return float(2 * np.pi ** (d / 2) / special.gamma(d / 2))


def _radial_density(spec: InitialFieldSpec, r: np.ndarray) -> np.ndarray:
    """Density against dr of the radial part, including the sphere factor."""
    d, g = spec.params.d, spec.params.gamma
    r = np.asarray(r, dtype=float)
    s = surface_measure(int(d))
    if spec.measure_form is MeasureForm.PURE_POWER:
        return s * r ** (d - 1 - g)
    return s * r ** (d - 1) / (1.0 + r ** g)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(48)


def _gl_integrate(f, a: float, b: float) -> float:
    mid, half = (a + b) / 2.0, (b - a) / 2.0
    return float(half * np.sum(_GL_W * f(mid + half * _GL_X)))


def mu_gamma_mass(spec: InitialFieldSpec) -> float:
    """mu_gamma(B_R) by radial quadrature, relative error < 1e-8.

    The integrable power singularity of the PurePower form is absorbed by
    the substitution r = u^(1/(d-gamma)).
    """
    d, g = spec.params.d, spec.params.gamma
    R = spec.truncation_radius
    s = surface_measure(int(d))
    if spec.measure_form is MeasureForm.PURE_POWER:
        return s * R ** (d - g) / (d - g)           # exact
    if g == 0:
        return s * R ** d / (2.0 * d)                # literal 1/(1+1) density
    # piecewise Gauss-Legendre, geometric panels for the near-origin part
    edges = np.concatenate([[0.0], np.geomspace(min(1e-3, R / 8), R, 64)])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += _gl_integrate(lambda r: s * r ** (d - 1) / (1.0 + r ** g), a, b)
    return total


def sample_initial_field(spec: InitialFieldSpec, rng: np.random.Generator,
                         count: Optional[int] = None) -> np.ndarray:
    """Poisson(H_T mu_gamma restricted to B_R) point cloud, shape (n, d)."""
    d = int(spec.params.d)
    g = spec.params.gamma
    R = spec.truncation_radius
    mass = mu_gamma_mass(spec)
    n = rng.poisson(spec.h_t * mass) if count is None else count
    if n == 0:
        return np.zeros((0, d))
    u = rng.random(n)
    if spec.measure_form is MeasureForm.PURE_POWER:
        radii = R * u ** (1.0 / (d - g))            # exact inverse CDF
    elif g == 0:
        radii = R * u ** (1.0 / d)                   # uniform in the ball
    else:
        grid = np.linspace(0.0, R, 4097)
        dens = _radial_density(spec, grid)
        cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0
                                               * np.diff(grid))])
        cdf /= cdf[-1]
        radii = np.interp(u, cdf, grid)
    if d == 1:
        signs = rng.integers(0, 2, n) * 2.0 - 1.0
        return (radii * signs)[:, None]
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return radii[:, None] * z


# ---------------------------------------------------------------------------
# Vectorized batch engine
# ---------------------------------------------------------------------------

@dataclass
class BatchResult:
    checkpoint_steps: np.ndarray
    occupation: np.ndarray          # (n_reps, n_ckpt, n_obs)
    last_positive_step: np.ndarray  # (n_reps, n_obs), -1 when never positive
    exploded: np.ndarray            # (n_reps,) bool
    values: Optional[np.ndarray]    # (n_reps, n_steps+1, n_obs) when stored
    root_count: np.ndarray          # (n_reps,)


class _Batch:
    """One vectorized pass over a batch of replicates sharing an RNG stream."""

    def __init__(self, params: ModelParams, horizon: float, n_steps: int,
                 observables: ObservableSet, rng: np.random.Generator,
                 cap: int = _DEFAULT_CAP):
        self.params = params
        self.d = int(params.d)
        self.motion = StableMotionSpec(params.alpha, self.d)
        self.law = offspring_pmf(params.beta)
        self.horizon = float(horizon)
        self.n_steps = int(n_steps)
        self.dt = self.horizon / self.n_steps
        self.obs = list(observables)
        self.rng = rng
        self.cap = cap
        self.v_scale = 1.0 / params.v_rate
        self.sleep_ok = params.alpha == 2
        self.r_obs = joint_support_radius(self.obs)
        from scipy.stats import chi2
        self._window_div = 2.0 * float(chi2.isf(_SLEEP_EPS / 2.0, self.d))

    # --- sleep bookkeeping -------------------------------------------------
    #
    # Window rule: for symmetric increments, P(sup_{s<=tau}|X_s| >= a)
    # <= 2 P(|X_tau| >= a) (reflect at first passage: from the hitting
    # point the remaining displacement lands in the outward halfspace with
    # probability 1/2).  For alpha = 2, |X_tau|^2 / (2 tau) ~ chi^2_d, so
    # tau <= a^2 / (2 isf_{chi2_d}(eps/2)) certifies a miss probability
    # below eps per decision.

    def _safe_window(self, pos: np.ndarray) -> np.ndarray:
        dist = np.sqrt(np.sum(pos * pos, axis=1)) - self.r_obs
        dist = np.maximum(dist, 0.0)
        return dist ** 2 / self._window_div

    def _schedule(self, pos, sync, death, rep, j_now: int):
        """Split candidates into an active set and future event buckets."""
        if pos.shape[0] == 0 or not self.sleep_ok:
            return pos, sync, death, rep
        tau = self._safe_window(pos)
        wake = sync + tau
        event = np.minimum(wake, death)
        ev_step = np.ceil(event / self.dt - 1e-12).astype(np.int64)
        asleep = (tau >= 2.0 * self.dt) & (ev_step > j_now + 1)
        if not np.any(asleep):
            return pos, sync, death, rep
        drop = asleep & (event > self.horizon) & (death > self.horizon)
        store = asleep & ~drop
        if np.any(drop):
            np.add.at(self.live, rep[drop], -1)
        if np.any(store):
            idx = np.flatnonzero(store)
            steps = np.minimum(ev_step[idx], self.n_steps)
            order = np.argsort(steps, kind="stable")
            idx = idx[order]
            steps = steps[order]
            uniq, starts = np.unique(steps, return_index=True)
            bounds = np.append(starts, steps.size)
            for s_val, lo, hi in zip(uniq, bounds[:-1], bounds[1:]):
                sl = idx[lo:hi]
                self.buckets.setdefault(int(s_val), []).append(
                    (pos[sl], sync[sl], death[sl], rep[sl]))
        keep = ~asleep
        return pos[keep], sync[keep], death[keep], rep[keep]

    # --- increments ----------------------------------------------------------

    def _advance(self, pos: np.ndarray, dt: np.ndarray) -> np.ndarray:
        if pos.shape[0] == 0:
            return pos
        dt = np.broadcast_to(np.asarray(dt, dtype=float), (pos.shape[0],))
        move = dt > 0  # zero-duration hops occur when events land on grid times
        if not np.any(move):
            return pos
        if np.all(move):
            return pos + sample_motion_increment(self.motion, dt, self.rng)
        out = pos.copy()
        out[move] += sample_motion_increment(self.motion, dt[move], self.rng)
        return out

    # --- main loop -----------------------------------------------------------

    def run(self, roots: np.ndarray, roots_rep: np.ndarray, n_reps: int,
            checkpoint_steps: Sequence[int], store_series: bool) -> BatchResult:
        n_obs = len(self.obs)
        ck = np.asarray(sorted(set(int(c) for c in checkpoint_steps)))
        occ_acc = np.zeros((n_reps, n_obs))
        occ_out = np.zeros((n_reps, ck.size, n_obs))
        last_pos = np.full((n_reps, n_obs), -1, dtype=np.int64)
        values = (np.zeros((n_reps, self.n_steps + 1, n_obs))
                  if store_series else None)
        self.live = np.bincount(roots_rep, minlength=n_reps).astype(np.int64)
        self.exploded = np.zeros(n_reps, dtype=bool)
        self.buckets: dict = {}

        prev_vals = self._tally(roots, roots_rep, n_reps, 0, last_pos, values)
        ck_ptr = 0
        if ck.size and ck[0] == 0:
            ck_ptr = 1  # occupation at t = 0 is zero

        zero = np.zeros(0)
        a_pos, a_sync, a_death, a_rep = self._schedule(
            roots, np.zeros(roots.shape[0]), self._lifetimes(roots.shape[0]),
            roots_rep, -1)

        for j in range(1, self.n_steps + 1):
            s_j = j * self.dt
            dead_pos, dead_t, dead_rep = [], [], []

            # scheduled wake/death events due this step
            entries = self.buckets.pop(j, [])
            if entries:
                b_pos = np.concatenate([e[0] for e in entries])
                b_sync = np.concatenate([e[1] for e in entries])
                b_death = np.concatenate([e[2] for e in entries])
                b_rep = np.concatenate([e[3] for e in entries])
                ok = ~self.exploded[b_rep]
                b_pos, b_sync, b_death, b_rep = (b_pos[ok], b_sync[ok],
                                                 b_death[ok], b_rep[ok])
                dies = b_death <= s_j
                if np.any(dies):
                    dp = self._advance(b_pos[dies], b_death[dies] - b_sync[dies])
                    dead_pos.append(dp)
                    dead_t.append(b_death[dies])
                    dead_rep.append(b_rep[dies])
                lives = ~dies
                if np.any(lives):
                    wp = self._advance(b_pos[lives], s_j - b_sync[lives])
                    w_sync = np.full(wp.shape[0], s_j)
                    np2, ns2, nd2, nr2 = self._schedule(
                        wp, w_sync, b_death[lives], b_rep[lives], j)
                    a_pos = np.concatenate([a_pos, np2]) if a_pos.size else np2
                    a_sync = np.concatenate([a_sync, ns2])
                    a_death = np.concatenate([a_death, nd2])
                    a_rep = np.concatenate([a_rep, nr2])

            # active particles: deaths within the step, survivors advance
            if a_pos.shape[0]:
                ok = ~self.exploded[a_rep]
                a_pos, a_sync, a_death, a_rep = (a_pos[ok], a_sync[ok],
                                                 a_death[ok], a_rep[ok])
            if a_pos.shape[0]:
                dies = a_death <= s_j
                if np.any(dies):
                    dp = self._advance(a_pos[dies], a_death[dies] - a_sync[dies])
                    dead_pos.append(dp)
                    dead_t.append(a_death[dies])
                    dead_rep.append(a_rep[dies])
                    keep = ~dies
                    a_pos, a_sync, a_death, a_rep = (a_pos[keep], a_sync[keep],
                                                     a_death[keep], a_rep[keep])
                a_pos = self._advance(a_pos, s_j - a_sync)
                a_sync = np.full(a_pos.shape[0], s_j)

            # branching cascade within (s_{j-1}, s_j]
            if dead_pos:
                q_pos = np.concatenate(dead_pos)
                q_t = np.concatenate(dead_t)
                q_rep = np.concatenate(dead_rep)
                while q_pos.shape[0]:
                    np.add.at(self.live, q_rep, -1)
                    k = sample_offspring(self.law, self.rng, q_pos.shape[0])
                    k = np.asarray(k, dtype=np.int64)
                    c_pos = np.repeat(q_pos, k, axis=0)
                    c_birth = np.repeat(q_t, k)
                    c_rep = np.repeat(q_rep, k)
                    np.add.at(self.live, q_rep, k)
                    newly = self.live > self.cap
                    if np.any(newly & ~self.exploded):
                        self.exploded |= newly
                    if c_pos.shape[0] == 0:
                        break
                    ok = ~self.exploded[c_rep]
                    c_pos, c_birth, c_rep = c_pos[ok], c_birth[ok], c_rep[ok]
                    c_death = c_birth + self._lifetimes(c_pos.shape[0])
                    dies = c_death <= s_j
                    if np.any(dies):
                        q_pos = self._advance(c_pos[dies],
                                              c_death[dies] - c_birth[dies])
                        q_t = c_death[dies]
                        q_rep = c_rep[dies]
                    else:
                        q_pos = np.zeros((0, self.d))
                        q_t = q_rep = zero
                    lives = ~dies
                    if np.any(lives):
                        np2, ns2, nd2, nr2 = self._schedule(
                            c_pos[lives], c_birth[lives], c_death[lives],
                            c_rep[lives], j - 1)
                        if np2.shape[0]:
                            np2 = self._advance(np2, s_j - ns2)
                            ns2 = np.full(np2.shape[0], s_j)
                            a_pos = (np.concatenate([a_pos, np2])
                                     if a_pos.size else np2)
                            a_sync = np.concatenate([a_sync, ns2])
                            a_death = np.concatenate([a_death, nd2])
                            a_rep = np.concatenate([a_rep, nr2])

            # observation tally + trapezoid occupation
            vals = self._tally(a_pos, a_rep, n_reps, j, last_pos, values)
            occ_acc += 0.5 * self.dt * (prev_vals + vals)
            prev_vals = vals
            while ck_ptr < ck.size and ck[ck_ptr] == j:
                occ_out[:, ck_ptr, :] = occ_acc
                ck_ptr += 1

            # opportunistic re-sleep of drifted-away actives
            if self.sleep_ok and a_pos.shape[0]:
                a_pos, a_sync, a_death, a_rep = self._schedule(
                    a_pos, a_sync, a_death, a_rep, j)

        root_count = np.bincount(roots_rep, minlength=n_reps)
        return BatchResult(ck, occ_out, last_pos, self.exploded, values,
                           root_count)

    def _lifetimes(self, n: int) -> np.ndarray:
        return self.rng.exponential(self.v_scale, n)

    def _tally(self, pos, rep, n_reps, j, last_pos, values):
        vals = np.zeros((n_reps, len(self.obs)))
        if pos.shape[0]:
            for i, ob in enumerate(self.obs):
                v = ob.evaluate(pos)
                vals[:, i] = np.bincount(rep, weights=v, minlength=n_reps)
        if values is not None:
            values[:, j, :] = vals
        positive = vals > 0
        last_pos[positive] = j
        return vals


def run_replicate(spec: InitialFieldSpec, observables: ObservableSet,
                  horizon: float, grid_step: float,
                  rng: np.random.Generator,
                  explosion_cap: int = _DEFAULT_CAP,
                  ) -> list[OccupationSeries]:
    """Simulate one replicate; one OccupationSeries per observable.

    Positions are advanced by exact increments only at observation times
    and at branch events, so values at grid times carry no motion
    discretization error.
    """
    if horizon <= 0 or grid_step <= 0:
        raise ValueError("horizon and grid_step must be > 0")
    n_steps = max(int(round(horizon / grid_step)), 1)
    eng = _Batch(spec.params, horizon, n_steps, observables, rng,
                 cap=explosion_cap)
    roots = sample_initial_field(spec, rng)
    res = eng.run(roots, np.zeros(roots.shape[0], dtype=np.int64), 1,
                  checkpoint_steps=[n_steps], store_series=True)
    grid = np.linspace(0.0, horizon, n_steps + 1)
    out = []
    for i, ob in enumerate(observables):
        vals = res.values[0, :, i]
        occ = np.concatenate([[0.0], np.cumsum(
            0.5 * (vals[1:] + vals[:-1]) * (horizon / n_steps))])
        if res.exploded[0]:
            ext = math.nan
        elif res.last_positive_step[0, i] < 0:
            ext = 0.0
        elif res.last_positive_step[0, i] == n_steps:
            ext = math.inf
        else:
            ext = grid[res.last_positive_step[0, i]] + horizon / n_steps
        out.append(OccupationSeries(ob.observable_id, grid, vals, occ, ext))
    return out


def local_extinction_time(series: OccupationSeries) -> float:
    """Last grid time with a particle present, plus one grid step;
    +inf sentinel when the set is occupied at the horizon."""
    vals = series.values
    if vals[-1] > 0:
        return math.inf
    nz = np.flatnonzero(vals > 0)
    if nz.size == 0:
        return 0.0
    step = series.time_grid[1] - series.time_grid[0]
    return float(series.time_grid[nz[-1]] + step)


# ---------------------------------------------------------------------------
# Exact expectations (centering)
# ---------------------------------------------------------------------------

def semigroup_observable_radial(params: ModelParams, obs: Observable,
                                s: float, rho: np.ndarray) -> np.ndarray:
    """(T_s phi)(x) on radial nodes rho = |x - center| for radial phi.

    alpha = 2 uses closed forms (noncentral-chi-square ball mass, Gaussian
    bump convolution); alpha < 2 integrates them against the positive
    (alpha/2)-stable subordinator density, which is exact for every d.
    """
    from .observables import BallIndicator, GaussianBump
    rho = np.asarray(rho, dtype=float)
    d = int(params.d)

    def gaussian_case(var_eff):
        if isinstance(obs, BallIndicator):
            lam = rho ** 2 / var_eff
            return special.chndtr(obs.radius ** 2 / var_eff, d, lam)
        if isinstance(obs, GaussianBump):
            w2 = obs.width ** 2
            return ((w2 / (w2 + var_eff)) ** (d / 2.0)
                    * np.exp(-rho ** 2 / (2.0 * (w2 + var_eff))))
        raise NotImplementedError("radial semigroup needs ball or bump")

    if params.alpha == 2:
        return gaussian_case(2.0 * s)
    from .stable_core import subordinator_pdf
    ah = params.alpha / 2.0
    c = float(np.cos(np.pi * ah / 2.0) ** (1.0 / ah)) * s ** (1.0 / ah)
    u = np.geomspace(1e-6 * c, 1e8 * c, 480)
    fu = subordinator_pdf(params.alpha, u, s)
    w = np.empty_like(u)
    w[1:-1] = (u[2:] - u[:-2]) / 2.0
    w[0] = (u[1] - u[0]) / 2.0
    w[-1] = (u[-1] - u[-2]) / 2.0
    wf = w * fu
    keep = wf > 0
    out = np.zeros_like(rho)
    for ui, wi in zip(u[keep], wf[keep]):
        out += wi * gaussian_case(2.0 * ui)
    return out


def mean_occupation(spec: InitialFieldSpec, obs: Observable, T: float,
                    t: float, s_grid: Optional[np.ndarray] = None) -> float:
    """E int_0^{T t} <N_s, phi> ds for the truncated initial field.

    By criticality the expectation evolves by the motion semigroup alone:
    the integrand is <H_T mu_gamma 1_{B_R}, T_s phi>, evaluated on radial
    mu-cells and integrated over s by the trapezoid rule on ``s_grid``
    (callers comparing against simulated occupation pass the observation
    grid so both sides share the same time quadrature).
    """
    if spec.params.d > 3:
        raise ValueError("mean_occupation supports d <= 3")
    if t == 0:
        return 0.0
    horizon = T * t
    if s_grid is None:
        # geometric spacing resolves the sharp initial decay of
        # <mu, T_s phi> for heavy-tailed motions
        s_grid = np.concatenate([[0.0],
                                 np.geomspace(horizon * 1e-7, horizon, 1024)])
    s_grid = np.asarray(s_grid, dtype=float)
    pairing = _mu_pairing_nodes(spec)
    vals = np.empty(s_grid.size)
    if spec.params.alpha < 2:
        vals = _mean_values_subordinated(spec.params, obs, s_grid, pairing)
    else:
        for i, s in enumerate(s_grid):
            if s == 0.0:
                prof = obs.radial_profile(pairing.rho)
            else:
                prof = semigroup_observable_radial(spec.params, obs, s,
                                                   pairing.rho)
            vals[i] = pairing.weights @ prof
    return float(spec.h_t * np.trapezoid(vals, s_grid))


def _mean_values_subordinated(params: ModelParams, obs: Observable,
                              s_grid: np.ndarray, pairing) -> np.ndarray:
    """<mu, T_s phi> on a whole s-grid at once for alpha < 2.

    The Gaussian-case profile is tabulated on one shared log-grid of
    subordinator values; each s only reweights it by the (alpha/2)-stable
    density, so the cost is one table regardless of the grid size.
    """
    from .stable_core import subordinator_pdf
    ah = params.alpha / 2.0
    cphi = float(np.cos(np.pi * ah / 2.0))
    pos = s_grid[s_grid > 0]
    c_lo = (pos.min() * cphi) ** (1.0 / ah)
    c_hi = (pos.max() * cphi) ** (1.0 / ah)
    u = np.geomspace(1e-6 * c_lo, 1e8 * c_hi, 900)
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / 2.0
    du[0] = (u[1] - u[0]) / 2.0
    du[-1] = (u[-1] - u[-2]) / 2.0
    gauss_par = ModelParams(params.d, 2.0, params.beta, params.gamma,
                            params.v_rate)
    table = np.stack([semigroup_observable_radial(gauss_par, obs, ui,
                                                  pairing.rho) @ pairing.weights
                      for ui in u])
    vals = np.empty(s_grid.size)
    for i, s in enumerate(s_grid):
        if s == 0.0:
            vals[i] = float(pairing.weights @ obs.radial_profile(pairing.rho))
        else:
            w = subordinator_pdf(params.alpha, u, s) * du
            vals[i] = float(w @ table)
    return vals


def conditional_mean_table(params: ModelParams, obs: Observable,
                           horizon: float, n_steps: int,
                           ckpt_steps: Sequence[int], r_max: float,
                           n_r: int = 640) -> tuple[np.ndarray, np.ndarray]:
    """Radial tables of E[trapezoid occupation up to each checkpoint | root].

    Row k gives rho -> sum_{j<=c_k} w_j (T_{s_j} phi)(rho) dt with the same
    trapezoid weights the engine uses, so subtracting the interpolated
    value per root removes the initial-Poisson fluctuation exactly (it is
    o(F_T), hence pure variance reduction for the fluctuation limits).
    """
    dt = horizon / n_steps
    rho = np.linspace(0.0, r_max, n_r)
    ck = sorted(set(int(c) for c in ckpt_steps))
    running = 0.5 * obs.radial_profile(rho)    # half-weight at j = 0
    out = np.zeros((len(ck), n_r))
    ptr = 0
    while ptr < len(ck) and ck[ptr] == 0:
        ptr += 1
    for j in range(1, max(ck) + 1):
        prof = semigroup_observable_radial(params, obs, j * dt, rho)
        running = running + prof
        while ptr < len(ck) and ck[ptr] == j:
            out[ptr] = dt * (running - 0.5 * prof)  # endpoint half-weight
            ptr += 1
    return rho, out


# ---------------------------------------------------------------------------
# Replicate farms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FarmConfig:
    spec: InitialFieldSpec
    observables: tuple
    horizon: float
    n_steps: int
    n_replicates: int
    seed: int
    checkpoints: tuple = (1.0,)       # fractions of the horizon
    store_series: bool = False
    conditional_centering: bool = False
    explosion_cap: int = _DEFAULT_CAP
    batch_rows: int = 150_000


@dataclass
class FarmOutput:
    checkpoint_times: np.ndarray
    occupation: np.ndarray            # (n_reps, n_ckpt, n_obs)
    cond_mean: Optional[np.ndarray]   # same shape; None unless requested
    extinction_time: np.ndarray       # (n_reps, n_obs)
    exploded: np.ndarray
    root_count: np.ndarray
    series: Optional[np.ndarray] = None

    @property
    def n_excluded(self) -> int:
        return int(np.count_nonzero(self.exploded))


def _ckpt_steps(cfg: FarmConfig) -> np.ndarray:
    steps = sorted({max(1, int(round(f * cfg.n_steps)))
                    for f in cfg.checkpoints})
    return np.asarray(steps)


def _farm_batch(cfg: FarmConfig, batch_index: int, rep_lo: int, rep_hi: int,
                mean_tables) -> tuple:
    rng = _batch_stream(cfg.seed, batch_index)
    n_local = rep_hi - rep_lo
    roots, reps = [], []
    for i in range(n_local):
        r = sample_initial_field(cfg.spec, rng)
        roots.append(r)
        reps.append(np.full(r.shape[0], i, dtype=np.int64))
    roots = np.concatenate(roots) if roots else np.zeros((0, int(cfg.spec.params.d)))
    reps = (np.concatenate(reps) if reps
            else np.zeros(0, dtype=np.int64))
    eng = _Batch(cfg.spec.params, cfg.horizon, cfg.n_steps,
                 list(cfg.observables), rng, cap=cfg.explosion_cap)
    res = eng.run(roots, reps, n_local, _ckpt_steps(cfg), cfg.store_series)
    cond = None
    if mean_tables is not None:
        radii = np.sqrt(np.sum(roots * roots, axis=1))
        n_ck = res.checkpoint_steps.size
        cond = np.zeros((n_local, n_ck, len(cfg.observables)))
        for i_ob, (rho, tab) in enumerate(mean_tables):
            for k in range(n_ck):
                per_root = np.interp(radii, rho, tab[k])
                cond[:, k, i_ob] = np.bincount(reps, weights=per_root,
                                               minlength=n_local)
    return res, cond


def _batch_stream(seed: int, batch_index: int) -> np.random.Generator:
    from .rng import stream
    return stream(seed, 0xFA12, batch_index)


def run_farm(cfg: FarmConfig, workers: Optional[int] = None) -> FarmOutput:
    """Deterministic replicate farm; outputs independent of worker count."""
    mass = cfg.spec.h_t * mu_gamma_mass(cfg.spec)
    per_rep = max(int(mass) + 1, 1)
    n_batch = int(np.clip(cfg.batch_rows // per_rep, 1, 1024))
    bounds = list(range(0, cfg.n_replicates, n_batch)) + [cfg.n_replicates]
    jobs = [(i, lo, hi) for i, (lo, hi)
            in enumerate(zip(bounds[:-1], bounds[1:]))]

    mean_tables = None
    if cfg.conditional_centering:
        ck = _ckpt_steps(cfg)
        mean_tables = [conditional_mean_table(
            cfg.spec.params, ob, cfg.horizon, cfg.n_steps, ck,
            r_max=cfg.spec.truncation_radius * 1.02)
            for ob in cfg.observables]

    n_obs = len(cfg.observables)
    ck = _ckpt_steps(cfg)
    dt = cfg.horizon / cfg.n_steps
    occupation = np.zeros((cfg.n_replicates, ck.size, n_obs))
    cond_mean = (np.zeros_like(occupation)
                 if cfg.conditional_centering else None)
    ext = np.zeros((cfg.n_replicates, n_obs))
    exploded = np.zeros(cfg.n_replicates, dtype=bool)
    root_count = np.zeros(cfg.n_replicates, dtype=np.int64)
    series = (np.zeros((cfg.n_replicates, cfg.n_steps + 1, n_obs))
              if cfg.store_series else None)

    def fold(job, out):
        _, lo, hi = job
        res, cond = out
        occupation[lo:hi] = res.occupation
        if cond is not None:
            cond_mean[lo:hi] = cond
        exploded[lo:hi] = res.exploded
        root_count[lo:hi] = res.root_count
        if series is not None:
            series[lo:hi] = res.values
        lp = res.last_positive_step
        e = np.where(lp < 0, 0.0, (lp + 1) * dt)
        e[lp == cfg.n_steps] = np.inf
        ext[lo:hi] = e

    if workers is None:
        workers = min(len(jobs), os_cpu_count())
    if workers <= 1 or len(jobs) == 1:
        for job in jobs:
            fold(job, _farm_batch(cfg, job[0], job[1], job[2], mean_tables))
    else:
        import concurrent.futures as cf
        with cf.ProcessPoolExecutor(max_workers=workers) as pool:
            futs = {job[0]: pool.submit(_farm_batch, cfg, *job, mean_tables)
                    for job in jobs}
            for job in jobs:                       # fixed fold order
                fold(job, futs[job[0]].result())

    return FarmOutput(ck * dt, occupation, cond_mean, ext, exploded,
                      root_count, series)


def os_cpu_count() -> int:
    import os
    return os.cpu_count() or 1


@dataclass
class _Pairing:
    rho: np.ndarray
    weights: np.ndarray


def _mu_pairing_nodes(spec: InitialFieldSpec, n_cells: int = 512) -> _Pairing:
    """Radial midpoint cells carrying exact mu-cell masses."""
    R = spec.truncation_radius
    edges = np.concatenate([[0.0],
                            np.geomspace(min(1e-4 * R, 1e-3), R, n_cells)])
    mids = 0.5 * (edges[1:] + edges[:-1])
    d, g = spec.params.d, spec.params.gamma
    s = surface_measure(int(d))
    if spec.measure_form is MeasureForm.PURE_POWER:
        w = s * (edges[1:] ** (d - g) - edges[:-1] ** (d - g)) / (d - g)
    elif g == 0:
        w = s * (edges[1:] ** d - edges[:-1] ** d) / (2.0 * d)
    else:
        w = np.array([_gl_integrate(
            lambda r: s * r ** (d - 1) / (1.0 + r ** g), a, b)
            for a, b in zip(edges[:-1], edges[1:])])
    return _Pairing(mids, w)
