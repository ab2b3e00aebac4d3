"""High-dimension limit laws: potential operator and log-characteristic
functionals of the independent-increment / time-constant limits."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from ..observables import Observable
from ..regimes import LimitProcess, ModelParams, RegimeCase, classify_regime
from .kernels import _gl_nodes, _panels


def riesz_constant(alpha: float, d: int) -> float:
    """C_{alpha,d} = Gamma((d-alpha)/2) / (2^alpha pi^(d/2) Gamma(alpha/2))."""
    if d <= alpha:
        raise ValueError("potential operator exists only for d > alpha")
    return float(special.gamma((d - alpha) / 2.0)
                 / (2.0 ** alpha * np.pi ** (d / 2.0)
                    * special.gamma(alpha / 2.0)))


def potential_radial(params: ModelParams, obs: Observable,
                     r: np.ndarray) -> np.ndarray:
    """G phi on radial nodes for radial phi.

    alpha = 2 uses the Newton shell identity (the potential of a uniform
    shell of radius s is s^(d-2)-harmonic: proportional to max(r, s)^(2-d)),
    valid in every d > 2.  d = 1 with alpha < 1 integrates the Riesz
    kernel |x - y|^(alpha-1) directly.
    """
    d, a = int(params.d), params.alpha
    if d <= a:
        raise ValueError("potential operator needs d > alpha")
    r = np.asarray(r, dtype=float)
    if a == 2:
        surf = 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)
        c = riesz_constant(2.0, d) * surf
        s, w = _gl_nodes(_panels(1e-9, obs.support_radius, 48))
        prof = obs.radial_profile(s)
        kern = np.maximum(r[:, None], s[None, :]) ** (2.0 - d)
        return c * (kern * (w * s ** (d - 1) * prof)).sum(axis=1)
    if d == 1:
        c = riesz_constant(a, 1)
        S = obs.support_radius
        out = np.empty_like(r)
        for i, rv in enumerate(r):
            # geometric panels closing on the interior |y - rv| singularity
            cuts = sorted({1e-12, S} | ({rv} if 0 < rv < S else set()))
            edges = []
            for lo, hi in zip(cuts[:-1], cuts[1:]):
                seg = np.concatenate([
                    lo + np.geomspace((hi - lo) * 1e-10, (hi - lo) / 2, 20),
                    hi - np.geomspace((hi - lo) * 1e-10, (hi - lo) / 2, 20)[::-1],
                    [lo, hi]])
                edges.append(np.unique(seg))
            y, w = _gl_nodes(np.unique(np.concatenate(edges)))
            prof = obs.radial_profile(y)
            km = np.abs(rv - y) ** (a - 1.0) + np.abs(rv + y) ** (a - 1.0)
            out[i] = c * np.sum(w * prof * km)
        return out
    raise NotImplementedError("radial potential: alpha = 2 (d > 2) or d = 1")


def potential_of_mu_gamma(params: ModelParams, r: np.ndarray,
                          s_max: float = 1e4) -> np.ndarray:
    """G mu_gamma as a radial density; finite for gamma > alpha."""
    d, a, g = int(params.d), params.alpha, params.gamma
    if g <= a:
        raise ValueError("G mu_gamma requires gamma > alpha")
    if a != 2:
        raise NotImplementedError("G mu_gamma implemented for alpha = 2")
    surf = 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)
    c = riesz_constant(2.0, d) * surf
    r = np.asarray(r, dtype=float)
    s, w = _gl_nodes(_panels(1e-9, s_max, 96))
    dens = 1.0 / (1.0 + s ** g)
    kern = np.maximum(r[:, None], s[None, :]) ** (2.0 - d)
    out = c * (kern * (w * s ** (d - 1) * dens)).sum(axis=1)
    # analytic tail beyond s_max: integrand ~ s^(1-gamma)
    out += c * s_max ** (2.0 - g) / (g - 2.0)
    return out


@dataclass
class HighDimChar:
    """Pieces of the high-dimension log-characteristic exponent with K = 1."""
    stable_integral: float      # int (G phi)^(1+beta) against the case weight
    coupling_integral: float    # int phi G phi against the case weight
    c_beta: float
    case: RegimeCase

    def log_char(self, z: float, t: float, s: float, params: ModelParams,
                 v_rate: Optional[float] = None) -> complex:
        V = params.v_rate if v_rate is None else v_rate
        b = params.beta
        tau = np.tan(np.pi * (1.0 + b) / 2.0) if b < 1 else 0.0
        if self.case is RegimeCase.HIGH_A:
            factor = (t ** (1.0 - params.gamma / params.alpha)
                      - s ** (1.0 - params.gamma / params.alpha))
        else:
            factor = float(t > 0) - float(s > 0)   # time-constant limits
        stable = (V * abs(z) ** (1.0 + b)
                  * (1.0 - 1j * np.sign(z) * tau) * self.stable_integral)
        coupling = 2.0 * self.c_beta * z ** 2 * self.coupling_integral
        return -factor * (stable + coupling)


def highdim_char(params: ModelParams, obs: Observable,
                 superprocess: bool = False,
                 r_max: Optional[float] = None) -> HighDimChar:
    """Numeric evaluation of the high-dimension characteristic integrals.

    The superprocess flag forces c_beta = 0 (the phi G phi coupling is
    absent from its log-Laplace equation); otherwise c_beta = 1 at
    beta = 1 and 0 for beta < 1.
    """
    report = classify_regime(params)
    if report.limit_process_id not in (LimitProcess.HIGHDIM_INDEP_INCREMENTS,
                                       LimitProcess.HIGHDIM_TIME_CONSTANT):
        raise ValueError(f"{report.case_id.value} is not a high-dimension case")
    d, a, b, g = int(params.d), params.alpha, params.beta, params.gamma
    c_beta = 0.0 if (superprocess or b < 1) else 1.0
    if r_max is None:
        r_max = 60.0 * max(obs.support_radius, 1.0)
    r, w = _gl_nodes(_panels(1e-8, r_max, 84))
    surf = 2.0 * np.pi ** (d / 2.0) / special.gamma(d / 2.0)
    gphi = potential_radial(params, obs, r)
    phi = obs.radial_profile(r)
    if report.case_id is RegimeCase.HIGH_C:
        weight = potential_of_mu_gamma(params, r)
    else:
        weight = np.ones_like(r)
    vol = w * surf * r ** (d - 1) * weight
    stable = float(np.sum(vol * gphi ** (1.0 + b)))
    coupling = float(np.sum(vol * phi * gphi))
    return HighDimChar(stable, coupling, c_beta, report.case_id)


def log_char_highdim(params: ModelParams, obs: Observable, z: float,
                     t: float, s: float, superprocess: bool = False) -> complex:
    """log E exp{i z <X_t - X_s, phi>} with the constant K normalized to 1."""
    if s > t:
        raise ValueError("need s <= t")
    ch = highdim_char(params, obs, superprocess=superprocess)
    return ch.log_char(z, t, s, params)
