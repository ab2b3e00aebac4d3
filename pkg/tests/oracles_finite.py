"""Exact finite-T moment oracles used by the test-suite (independent of the
simulation code paths).

For beta = 1 (binary branching, rate V) with a Poisson(mu) start, the
occupation of phi over [0, T] has

    Var = Var_Poisson + Var_branch
    Var_Poisson = 2 int_0^T int_u^T <mu, T_u(phi T_{w-u} phi)> dw du
    Var_branch  = V int_0^T <mu, T_s[g_s^2]> ds,
    g_s(y) = int_0^{T-s} T_w phi(y) dw.

Everything is radial for centered balls in d = 3 with alpha = 2, so the
quadratures below are exact up to panel resolution.  The conditional
centering used by the farms removes exactly the Poisson part.
"""
from __future__ import annotations

import numpy as np

from occufluct.branching import InitialFieldSpec, _mu_pairing_nodes
from occufluct.observables import BallIndicator
from occufluct.regimes import ModelParams

_GLX, _GLW = np.polynomial.legendre.leggauss(12)


def _nodes(edges):
    mid = (edges[1:] + edges[:-1]) / 2
    half = (edges[1:] - edges[:-1]) / 2
    return ((mid[:, None] + half[:, None] * _GLX).ravel(),
            (half[:, None] * _GLW + 0 * _GLX).ravel())


def ball_mass_3d(w: float, rho: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """T_w 1_{B(0,b)}(rho) for 3d Gaussian motion with per-coord var 2w."""
    from scipy.special import chndtr
    return chndtr(radius ** 2 / (2 * w), 3, rho ** 2 / (2 * w))


def radial_heat_3d(s: float, x: np.ndarray, y: np.ndarray,
                   f_y: np.ndarray, w_y: np.ndarray) -> np.ndarray:
    """(T_s f)(x) for radial f given on nodes y with quadrature weights."""
    xx = np.maximum(x[:, None], 1e-9)
    yy = y[None, :]
    e1 = np.exp(-((xx - yy) ** 2) / (4 * s))
    e2 = np.exp(-((xx + yy) ** 2) / (4 * s))
    K = yy * (e1 - e2) / (xx * np.sqrt(4 * np.pi * s))
    return K @ (w_y * f_y)


def branch_variance_beta1(params: ModelParams, spec: InitialFieldSpec,
                          T: float, radius: float = 1.0,
                          n_w: int = 40, n_y: int = 360) -> float:
    """Exact Var_branch of the ball occupation over [0, T], truncated mu."""
    assert params.alpha == 2 and int(params.d) == 3 and params.beta == 1
    y_max = spec.truncation_radius + 4.5 * np.sqrt(4 * T) + radius
    y, wy = _nodes(np.concatenate([[0], np.geomspace(1e-3, y_max, n_y)]))
    w_edges = np.concatenate([[0], np.geomspace(T * 1e-5, T, n_w)])
    wn, ww = _nodes(w_edges)
    M = np.empty((wn.size, y.size))
    for i, w in enumerate(wn):
        M[i] = ball_mass_3d(w, y, radius)
    # g at h = panel boundaries via prefix sums of the w-quadrature
    per_panel = (ww * M.T).reshape(y.size, -1, _GLX.size).sum(axis=2)
    prefix = np.concatenate([np.zeros((y.size, 1)),
                             np.cumsum(per_panel, axis=1)], axis=1)
    pairing = _mu_pairing_nodes(spec, n_cells=320)
    total = 0.0
    hs = w_edges                     # s = T - h
    for k in range(1, hs.size):
        h_lo, h_hi = hs[k - 1], hs[k]
        g_lo, g_hi = prefix[:, k - 1], prefix[:, k]
        for q in range(_GLX.size):
            frac = (_GLX[q] + 1) / 2
            h = h_lo + (h_hi - h_lo) * frac
            g = g_lo + (g_hi - g_lo) * frac      # linear in h within panel
            s = T - h
            if s <= 1e-9:
                val = np.interp(pairing.rho, y, g ** 2)
            else:
                val = radial_heat_3d(s, pairing.rho, y, g ** 2, wy)
            total += (_GLW[q] / 2) * (h_hi - h_lo) * float(pairing.weights @ val)
    return params.v_rate * spec.h_t * total


def branch_covariance_beta1(params: ModelParams, spec: InitialFieldSpec,
                            t_s: float, t_t: float, radius: float = 1.0,
                            n_w: int = 40, n_y: int = 360) -> float:
    """Exact Cov_branch(occ(t_s), occ(t_t)) of ball occupations."""
    assert params.alpha == 2 and int(params.d) == 3 and params.beta == 1
    t_s, t_t = min(t_s, t_t), max(t_s, t_t)
    y_max = spec.truncation_radius + 4.5 * np.sqrt(4 * t_t) + radius
    y, wy = _nodes(np.concatenate([[0], np.geomspace(1e-3, y_max, n_y)]))
    w_edges = np.concatenate([[0], np.geomspace(t_s * 1e-5, t_t, n_w)])
    wn, ww = _nodes(w_edges)
    M = np.empty((wn.size, y.size))
    for i, w in enumerate(wn):
        M[i] = ball_mass_3d(w, y, radius)
    per_panel = (ww * M.T).reshape(y.size, -1, _GLX.size).sum(axis=2)
    prefix = np.concatenate([np.zeros((y.size, 1)),
                             np.cumsum(per_panel, axis=1)], axis=1)

    def g_at(h):
        """int_0^h T_w phi dw by panel interpolation."""
        if h <= 0:
            return np.zeros(y.size)
        k = np.searchsorted(w_edges, h) - 1
        k = min(max(k, 0), w_edges.size - 2)
        lo, hi = w_edges[k], w_edges[k + 1]
        frac = (h - lo) / (hi - lo)
        return prefix[:, k] + frac * (prefix[:, k + 1] - prefix[:, k])

    pairing = _mu_pairing_nodes(spec, n_cells=288)
    rn, rw = _nodes(np.concatenate([[0], np.geomspace(t_s * 1e-5, t_s, 32)]))
    total = 0.0
    for r, w_r in zip(rn, rw):
        gg = g_at(t_s - r) * g_at(t_t - r)
        if r <= 1e-9:
            val = np.interp(pairing.rho, y, gg)
        else:
            val = radial_heat_3d(r, pairing.rho, y, gg, wy)
        total += w_r * float(pairing.weights @ val)
    return params.v_rate * spec.h_t * total


def path_covariance_beta1(params: ModelParams, spec: InitialFieldSpec,
                          t_s: float, t_t: float, radius: float = 1.0,
                          n_y: int = 200, n_u: int = 32) -> float:
    """Exact single-line covariance part: Cov_path(occ(t_s), occ(t_t)) =
    int mu [E(O_s O_t line) - m_s m_t] with
    E[O_s O_t | line] = int_0^{t_s} T_u(phi (g~_{t_s - u} + g~_{t_t - u})) du."""
    assert params.alpha == 2 and int(params.d) == 3 and params.beta == 1
    t_s, t_t = min(t_s, t_t), max(t_s, t_t)
    y, wy = _nodes(np.concatenate([[0], np.linspace(1e-4, radius, n_y)]))
    pairing = _mu_pairing_nodes(spec, n_cells=256)

    def g_tilde(h):
        if h <= 0:
            return np.zeros(y.size)
        wn, ww = _nodes(np.concatenate([[0], np.geomspace(h * 1e-5, h, 24)]))
        g = np.zeros(y.size)
        for w, w_w in zip(wn, ww):
            g += w_w * ball_mass_3d(w, y, radius)
        return g

    un, uw = _nodes(np.concatenate([[0], np.geomspace(t_s * 1e-5, t_s, n_u)]))
    second = 0.0
    for u, w_u in zip(un, uw):
        integrand = g_tilde(t_s - u) + g_tilde(t_t - u)
        if u <= 1e-9:
            val = np.interp(pairing.rho, y, integrand, right=0.0)
        else:
            val = radial_heat_3d(u, pairing.rho, y, integrand, wy)
        second += w_u * float(pairing.weights @ val)
    # subtract int mu m_s m_t
    wn, ww = _nodes(np.concatenate([[0], np.geomspace(t_t * 1e-5, t_t, 40)]))
    m_s = np.zeros_like(pairing.rho)
    m_t = np.zeros_like(pairing.rho)
    for w, wt in zip(wn, ww):
        bm = ball_mass_3d(w, pairing.rho, radius)
        if w <= t_s:
            m_s += wt * bm
        m_t += wt * bm
    mm = float(pairing.weights @ (m_s * m_t))
    return spec.h_t * (second - mm)


def poisson_variance_beta1(params: ModelParams, spec: InitialFieldSpec,
                           T: float, radius: float = 1.0,
                           n_w: int = 40, n_y: int = 200) -> float:
    """Var_Poisson = 2 int_0^T <mu, T_u(phi g_u~)> du with
    g_u~(y) = int_0^{T-u} T_w phi(y) dw restricted to the ball."""
    assert params.alpha == 2 and int(params.d) == 3 and params.beta == 1
    y, wy = _nodes(np.concatenate([[0], np.linspace(1e-4, radius, n_y)]))
    w_edges = np.concatenate([[0], np.geomspace(T * 1e-5, T, n_w)])
    wn, ww = _nodes(w_edges)
    M = np.empty((wn.size, y.size))
    for i, w in enumerate(wn):
        M[i] = ball_mass_3d(w, y, radius)
    per_panel = (ww * M.T).reshape(y.size, -1, _GLX.size).sum(axis=2)
    prefix = np.concatenate([np.zeros((y.size, 1)),
                             np.cumsum(per_panel, axis=1)], axis=1)
    pairing = _mu_pairing_nodes(spec, n_cells=256)
    total = 0.0
    hs = w_edges                                    # u = T - h
    for k in range(1, hs.size):
        h_lo, h_hi = hs[k - 1], hs[k]
        g_lo, g_hi = prefix[:, k - 1], prefix[:, k]
        for q in range(_GLX.size):
            frac = (_GLX[q] + 1) / 2
            h = h_lo + (h_hi - h_lo) * frac
            g = g_lo + (g_hi - g_lo) * frac
            u = T - h
            if u <= 1e-9:
                val = np.interp(pairing.rho, y, g, right=0.0)
            else:
                val = radial_heat_3d(u, pairing.rho, y, g, wy)
            total += ((_GLW[q] / 2) * (h_hi - h_lo)
                      * float(pairing.weights @ val))
    return 2.0 * spec.h_t * total
