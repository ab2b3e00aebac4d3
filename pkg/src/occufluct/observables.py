"""Test functions paired with the empirical measure.

Each observable is nonnegative, bounded, and effectively compactly
supported; ``support_radius`` bounds the set where it is numerically
nonzero (used by the far-field fast path), and ``integral`` is exact or
quadrature-accurate to 1e-8.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import integrate


def _radii(positions: np.ndarray, center: np.ndarray) -> np.ndarray:
    diff = np.atleast_2d(positions) - center
    return np.sqrt(np.sum(diff * diff, axis=-1))


@dataclass(frozen=True)
class BallIndicator:
    center: tuple = (0.0,)
    radius: float = 1.0
    observable_id: str = "ball"

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        return (_radii(positions, np.asarray(self.center)) <= self.radius).astype(float)

    def radial_profile(self, rho: np.ndarray) -> np.ndarray:
        return (np.asarray(rho) <= self.radius).astype(float)

    def integral(self, d: int) -> float:
        # volume of the d-ball
        from scipy.special import gamma
        return float(np.pi ** (d / 2) / gamma(d / 2 + 1) * self.radius ** d)

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self.radius)


@dataclass(frozen=True)
class GaussianBump:
    center: tuple = (0.0,)
    width: float = 1.0
    observable_id: str = "bump"

    _CUT = 9.0  # phi < 3e-18 beyond this many widths; treated as zero

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        r = _radii(positions, np.asarray(self.center))
        return np.exp(-0.5 * (r / self.width) ** 2)

    def radial_profile(self, rho: np.ndarray) -> np.ndarray:
        return np.exp(-0.5 * (np.asarray(rho) / self.width) ** 2)

    def integral(self, d: int) -> float:
        return float((2 * np.pi * self.width ** 2) ** (d / 2))

    @property
    def support_radius(self) -> float:
        return float(np.linalg.norm(self.center) + self._CUT * self.width)


@dataclass(frozen=True)
class SmoothCompact:
    """Radial profile given by a table on [0, r_max], zero beyond."""
    profile_r: tuple
    profile_v: tuple
    observable_id: str = "profile"

    def evaluate(self, positions: np.ndarray) -> np.ndarray:
        r = _radii(positions, np.zeros(np.atleast_2d(positions).shape[-1]))
        return self.radial_profile(r)

    def radial_profile(self, rho: np.ndarray) -> np.ndarray:
        r = np.asarray(self.profile_r)
        v = np.asarray(self.profile_v)
        return np.interp(np.asarray(rho), r, v, left=v[0], right=0.0)

    def integral(self, d: int) -> float:
        from scipy.special import gamma
        surf = 2 * np.pi ** (d / 2) / gamma(d / 2)
        val, _ = integrate.quad(
            lambda r: surf * r ** (d - 1) * float(self.radial_profile(r)),
            0.0, self.profile_r[-1], epsabs=1e-12, epsrel=1e-10, limit=200)
        return float(val)

    @property
    def support_radius(self) -> float:
        return float(self.profile_r[-1])


Observable = Union[BallIndicator, GaussianBump, SmoothCompact]
ObservableSet = Sequence[Observable]


def joint_support_radius(observables: ObservableSet) -> float:
    return max(o.support_radius for o in observables)
