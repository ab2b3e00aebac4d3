"""Path samplers for the limit processes.

The low-dimension limits are sampled by discretizing their stable
integrals on a KernelGrid: one totally-skewed (1+beta)-stable draw per
cell (scale = cell volume) drives the whole path, so increments are
automatically consistent across output times.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..regimes import ModelParams, RegimeCase, classify_regime
from ..stable_core import SkewedStableSpec, sample_skewed_stable
from .grids import KernelGrid, build_kernel_grid


@dataclass
class LimitPath:
    times: np.ndarray
    values: np.ndarray          # (n_paths, n_times)
    process_id: str


def _cell_noise(beta: float, volumes: np.ndarray, rng: np.random.Generator,
                n_paths: int) -> np.ndarray:
    if beta == 1:
        z = rng.standard_normal((n_paths, volumes.size))
        return z * np.sqrt(2.0 * volumes)
    spec = SkewedStableSpec(beta, 1.0)
    s = sample_skewed_stable(spec, rng, (n_paths, volumes.size))
    return s * volumes ** (1.0 / (1.0 + beta))


def _sample_grid_paths(grid: KernelGrid, rng: np.random.Generator,
                       n_paths: int, process_id: str) -> LimitPath:
    noise = _cell_noise(grid.params.beta, grid.cell_volume, rng, n_paths)
    vals = noise @ grid.weights.T                  # (n_paths, n_times)
    times = np.concatenate([[0.0], grid.times])
    vals = np.concatenate([np.zeros((n_paths, 1)), vals], axis=1)
    return LimitPath(times, vals, process_id)


def sample_xi_path(params: ModelParams, times, rng: np.random.Generator,
                   n_paths: int = 1, grid: KernelGrid | None = None,
                   **grid_kw) -> LimitPath:
    """Paths of the interpolating low-dimension limit (case gamma < d)."""
    report = classify_regime(params)
    if report.case_id is not RegimeCase.LOWDIM_GAMMA_LT_D:
        raise ValueError(f"xi sampling requires the low-dimension gamma < d "
                         f"case, got {report.case_id.value}")
    if grid is None:
        grid = build_kernel_grid(params, times, kind="xi", **grid_kw)
    return _sample_grid_paths(grid, rng, n_paths, "Xi")


def sample_zeta_path(params: ModelParams, times, rng: np.random.Generator,
                     n_paths: int = 1, grid: KernelGrid | None = None,
                     **grid_kw) -> LimitPath:
    """Paths of the finite-measure-family limit, needs d < alpha(2+beta)/(1+beta)."""
    a, b = params.alpha, params.beta
    if params.d >= a * (2 + b) / (1 + b):
        raise ValueError("zeta is defined only for d < alpha(2+beta)/(1+beta)")
    if grid is None:
        grid = build_kernel_grid(params, times, kind="zeta", **grid_kw)
    return _sample_grid_paths(grid, rng, n_paths, "Zeta")


def sample_eta_increments(params: ModelParams, times,
                          rng: np.random.Generator,
                          n_paths: int = 1) -> LimitPath:
    """Independent-increment critical-case process.

    Increment over (s, t] is totally-skewed (1+beta)-stable with scale
    t^(1-gamma/alpha) - s^(1-gamma/alpha); gamma = 0 gives stationary
    increments, beta = 1 Gaussian ones.
    """
    times = np.asarray(sorted(set([0.0] + [float(t) for t in times])))
    expo = 1.0 - params.gamma / params.alpha
    scales = np.diff(times ** expo)
    b = params.beta
    if b == 1:
        inc = rng.standard_normal((n_paths, scales.size)) * np.sqrt(2.0 * scales)
    else:
        spec = SkewedStableSpec(b, 1.0)
        inc = (sample_skewed_stable(spec, rng, (n_paths, scales.size))
               * scales ** (1.0 / (1.0 + b)))
    vals = np.concatenate([np.zeros((n_paths, 1)), np.cumsum(inc, axis=1)],
                          axis=1)
    return LimitPath(times, vals, "Eta")


def sample_vartheta(params: ModelParams, rng: np.random.Generator,
                    n_paths: int = 1, times=(1.0,)) -> LimitPath:
    """Time-constant critical-case limit: one standard totally-skewed
    (1+beta)-stable value held for all t > 0."""
    times = np.asarray(sorted(set([0.0] + [float(t) for t in times])))
    draw = sample_skewed_stable(SkewedStableSpec(params.beta, 1.0), rng,
                                (n_paths, 1))
    vals = np.where(times[None, :] > 0, draw, 0.0)
    return LimitPath(times, vals, "Vartheta")
