"""Deterministic solvers for the semilinear mild (log-Laplace) equations.

The occupation-time Laplace functionals of the particle system and the
superprocess are exp(-<mu, v(T)>) with v solving, in mild form,

    particle:     v(t) = int_0^t T_{t-u}[ phi chi (1 - v) - c v^(1+beta) ] du
    superprocess: u(t) = int_0^t T_{t-u}[ phi chi       - c u^(1+beta) ] du

with c = V/(1+beta).  Solutions are computed on a uniform d = 1 lattice
by Picard iteration; each sweep evaluates the triangular time integral
with left-endpoint quadrature through a single FFT-semigroup march, so a
sweep costs n_t convolutions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from .branching import InitialFieldSpec, MeasureForm, surface_measure
from .observables import Observable
from .regimes import ModelParams
from .stable_core import StableMotionSpec, transition_density


class EquationKind(Enum):
    PARTICLE_V = "ParticleV"
    SUPER_U = "SuperU"
    ERGODIC_V = "ErgodicV"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpaceTimeGrid:
    length: float            # lattice on [-L, L)
    n_x: int
    t_final: float
    n_t: int
    alpha: float
    v_rate: float
    beta: float = 1.0

    def __post_init__(self):
        if self.n_x < 16:
            raise ValueError("need at least 16 lattice points")
        if self.n_t < 1 or self.t_final <= 0:
            raise ValueError("bad time grid")

    @property
    def x(self) -> np.ndarray:
        return -self.length + 2 * self.length * np.arange(self.n_x) / self.n_x

    @property
    def dx(self) -> float:
        return 2 * self.length / self.n_x

    @property
    def dt(self) -> float:
        return self.t_final / self.n_t

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.n_t + 1)


@dataclass(frozen=True)
class ChiWeight:
    """chi(t) = integral over (t, 1] of the atom list psi = sum theta_k delta_{t_k}.

    Stored exactly as a right-continuous step function; chi == 1 on [0, 1)
    (the plain occupation-Laplace case) is atoms = ((1.0, 1.0),).
    """
    atoms: tuple = ((1.0, 1.0),)     # (t_k, theta_k)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for tk, th in self.atoms:
            out = out + th * (t < tk)
        return out


@dataclass
class MildSolution:
    grid: SpaceTimeGrid
    equation_kind: EquationKind
    values: np.ndarray               # (n_t + 1, n_x)
    picard_iterations: int
    final_residual: float
    residual_history: list = field(default_factory=list)

    def at_final(self) -> np.ndarray:
        return self.values[-1]


def _chi_panel_weights(grid: SpaceTimeGrid, chi: ChiWeight) -> np.ndarray:
    """chi evaluated at panel midpoints of the macroscopic time argument.

    chi is a step function; sampling it at the left endpoints would zero
    the u = 0 panel (chi(1) = 0), a pure discretization artifact.
    """
    mid = grid.times[:-1] + grid.dt / 2.0
    return chi(1.0 - mid / grid.t_final)


def _semigroup_multiplier(grid: SpaceTimeGrid) -> np.ndarray:
    w = 2.0 * np.pi * np.fft.rfftfreq(grid.n_x, d=grid.dx)
    return np.exp(-grid.dt * np.abs(w) ** grid.alpha)


def _march(source: np.ndarray, mult: np.ndarray, n_x: int,
           dt: float) -> np.ndarray:
    """w_j = sum_{k<j} dt T_{(j-k) dt} S_k via one semigroup march."""
    n_t = source.shape[0]
    out = np.zeros((n_t + 1, n_x))
    w_hat = np.zeros(mult.shape, dtype=complex)
    for j in range(1, n_t + 1):
        w_hat = (w_hat + np.fft.rfft(dt * source[j - 1])) * mult
        out[j] = np.fft.irfft(w_hat, n_x)
    return out


def _picard_solve(grid: SpaceTimeGrid, source_fn: Callable, kind: EquationKind,
                  tol: float = 1e-8, max_iter: int = 200,
                  bound_check: Optional[tuple] = None) -> MildSolution:
    mult = _semigroup_multiplier(grid)
    v = np.zeros((grid.n_t + 1, grid.n_x))
    history = []
    for it in range(1, max_iter + 1):
        src = source_fn(v)
        v_new = _march(src, mult, grid.n_x, grid.dt)
        delta = float(np.max(np.abs(v_new - v)))
        history.append(delta)
        v = v_new
        if delta < tol:
            break
    else:
        raise SolverError(
            f"Picard iteration did not converge: residuals {history[-5:]}")
    if bound_check is not None:
        lo, hi, slack = bound_check
        if np.min(v) < lo - slack or np.max(v) > hi + slack:
            raise SolverError(
                f"solution violates [{lo}, {hi}] bounds by more than {slack}; "
                "grid too coarse")
    return MildSolution(grid, kind, v, picard_iterations=it,
                        final_residual=history[-1],
                        residual_history=history)


def solve_particle_v(grid: SpaceTimeGrid, phi: np.ndarray,
                     chi: ChiWeight = ChiWeight(),
                     tol: float = 1e-8, max_iter: int = 200) -> MildSolution:
    """Mild solution of the particle-system log-Laplace equation.

    chi is evaluated at the macroscopic time (T - u)/T i.e. on the unit
    interval: chi_weights[j] = chi(1 - t_j / t_final).
    """
    phi = np.asarray(phi, dtype=float)
    c = grid.v_rate / (1.0 + grid.beta)
    chi_w = _chi_panel_weights(grid, chi)

    def source(v):
        return (phi * chi_w[:, None] * (1.0 - v[:-1])
                - c * np.abs(v[:-1]) ** (1.0 + grid.beta) * np.sign(v[:-1]))

    return _picard_solve(grid, source, EquationKind.PARTICLE_V, tol, max_iter,
                         bound_check=(0.0, 1.0, 1e-6))


def solve_superprocess_u(grid: SpaceTimeGrid, phi: np.ndarray,
                         chi: ChiWeight = ChiWeight(),
                         tol: float = 1e-8, max_iter: int = 200) -> MildSolution:
    """Superprocess variant: the phi * v coupling term is absent."""
    phi = np.asarray(phi, dtype=float)
    c = grid.v_rate / (1.0 + grid.beta)
    chi_w = _chi_panel_weights(grid, chi)

    def source(v):
        return (phi * chi_w[:, None]
                - c * np.abs(v[:-1]) ** (1.0 + grid.beta) * np.sign(v[:-1]))

    return _picard_solve(grid, source, EquationKind.SUPER_U, tol, max_iter,
                         bound_check=(0.0, np.inf, 1e-8))


def make_grid(params: ModelParams, length: float, n_x: int, t_final: float,
              n_t: int) -> SpaceTimeGrid:
    return SpaceTimeGrid(length, n_x, t_final, n_t, params.alpha,
                         params.v_rate, params.beta)


def laplace_functional(spec: InitialFieldSpec, sol: MildSolution,
                       check_truncation: bool = False) -> float:
    """exp(-<H_T mu_gamma 1_{B_R}, v(., t_final)>) by lattice quadrature."""
    x = sol.grid.x
    v = sol.at_final()
    dens = _mu_density_on_lattice(spec, x)
    pairing = float(np.sum(v * dens) * sol.grid.dx) * spec.h_t
    return float(np.exp(-pairing))


def _mu_density_on_lattice(spec: InitialFieldSpec, x: np.ndarray) -> np.ndarray:
    g = spec.params.gamma
    r = np.abs(x)
    inside = r <= spec.truncation_radius
    if spec.measure_form is MeasureForm.PURE_POWER:
        with np.errstate(divide="ignore"):
            dens = np.where(r > 0, r ** (-g), 0.0)
        # the lattice cell straddling 0 carries the exact cell mass
        if g > 0:
            dx = x[1] - x[0]
            i0 = int(np.argmin(np.abs(x)))
            dens[i0] = 2 * (dx / 2) ** (1 - g) / (1 - g) / dx
        else:
            dens = np.ones_like(r)
    else:
        dens = 1.0 / (1.0 + r ** g)
    return np.where(inside, dens, 0.0)


def solve_ergodic_v(grid: SpaceTimeGrid, thetas: Sequence[float],
                    t_ks: Sequence[float], tau: float, gamma: float,
                    beta: float, tol: float = 1e-8,
                    max_iter: int = 200) -> tuple[MildSolution, float]:
    """Ergodic-limit equation on [0, tau] and its Laplace transform.

    v(x,t) = A(x,t) - c int_0^t T_{t-s} v^(1+beta)(., s) ds with the linear
    part A(x,t) = sum_k theta_k [P((t - tau + t_k) ^ t, x)] assembled from
    the closed-form time-integrated kernel P(h, x) = int_0^h p_w(x) dw.
    Returns (solution, exp(-int v(x, tau) |x|^-gamma dx)).
    """
    from .limits.kernels import time_integrated_density
    if gamma >= 1:
        raise SolverError("the d = 1 lattice transform needs gamma < 1 "
                          "(|x|^-gamma must be integrable on the line)")
    x = grid.x
    times = grid.times
    A = np.zeros((grid.n_t + 1, grid.n_x))
    motion = StableMotionSpec(grid.alpha, 1)
    for th, tk in zip(thetas, t_ks):
        for j, t in enumerate(times):
            h = min(t - tau + tk, t)
            if h > 0:
                A[j] += th * time_integrated_density(grid.alpha, h, x)
    c = grid.v_rate / (1.0 + beta)
    mult = _semigroup_multiplier(grid)

    def source(v):
        return -c * np.abs(v[:-1]) ** (1.0 + beta) * np.sign(v[:-1])

    v = np.zeros((grid.n_t + 1, grid.n_x))
    history = []
    for it in range(1, max_iter + 1):
        v_new = A + _march(source(v), mult, grid.n_x, grid.dt)
        delta = float(np.max(np.abs(v_new - v)))
        history.append(delta)
        v = v_new
        if delta < tol:
            break
    else:
        raise SolverError(f"ergodic Picard did not converge: {history[-5:]}")
    if np.min(v) < -1e-8:
        raise SolverError("ergodic solution went negative; refine the grid")
    sol = MildSolution(grid, EquationKind.ERGODIC_V, v, it, history[-1],
                       history)
    # pairing against |x|^-gamma with exact cell weights near the origin
    dx = grid.dx
    edges = np.concatenate([x - dx / 2, [x[-1] + dx / 2]])
    lo, hi = np.abs(edges[:-1]), np.abs(edges[1:])
    swap = lo > hi
    lo[swap], hi[swap] = hi[swap], lo[swap]
    straddle = (edges[:-1] < 0) & (edges[1:] > 0)
    if gamma > 0:
        w = (hi ** (1 - gamma) - lo ** (1 - gamma)) / (1 - gamma)
        w[straddle] = (hi[straddle] ** (1 - gamma)
                       + lo[straddle] ** (1 - gamma)) / (1 - gamma)
    else:
        w = hi - lo
        w[straddle] = hi[straddle] + lo[straddle]
    transform = float(np.exp(-np.sum(v[-1] * w)))
    return sol, transform


def lattice_observable(obs: Observable, grid: SpaceTimeGrid) -> np.ndarray:
    return obs.evaluate(grid.x[:, None])
