"""Kernel ingredients of the stable-integral limit processes.

The low-dimension limits integrate, against an independently scattered
(1+beta)-stable noise on (r, x), kernels of the form

    weight(r, x; t) = g(r, x)^(1/(1+beta)) * P(t - r, x),

where P(h, x) = int_0^h p_w(x) dw is the time-integrated transition
density and g is either the gamma-weighted density mass
g_gamma(r, x) = int p_r(x - y) |y|^-gamma dy (the interpolating family)
or p_r(x) itself (the finite-measure family).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from ..stable_core import StableMotionSpec, density_table, transition_density

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _panels(a: float, b: float, n: int, geometric: bool = True) -> np.ndarray:
    if geometric and a > 0:
        return np.geomspace(a, b, n + 1)
    return np.linspace(a, b, n + 1)


def _gl_nodes(edges: np.ndarray):
    mid = (edges[1:] + edges[:-1]) / 2.0
    half = (edges[1:] - edges[:-1]) / 2.0
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    weights = half[:, None] * _GL_W[None, :]
    return nodes.ravel(), weights.ravel()


class _PIntTable:
    """P(1, .) on a radial grid; self-similarity serves every h:
    P(h, x) = h^(1 - d/alpha) P(1, x h^(-1/alpha))."""

    def __init__(self, alpha: float, d: int):
        self.alpha, self.d = alpha, d
        tab = density_table(alpha, d)
        nodes, weights = _gl_nodes(_panels(1e-10, 1.0, 32))
        scale = nodes ** (1.0 / alpha)
        self.r = np.concatenate([[0.0], np.geomspace(1e-5, 80.0, 4001)])
        vals = np.zeros_like(self.r)
        for w, n, s in zip(weights, nodes, scale):
            vals += w * n ** (-d / alpha) * tab(self.r / s)
        self.values = vals
        # first-order far tail: p_w(x) ~ w A |x|^(-d-alpha) integrates to A/2
        from ..stable_core import tail_constant
        self._tail = tail_constant(alpha, d) / 2.0

    def __call__(self, radius: np.ndarray) -> np.ndarray:
        radius = np.abs(np.asarray(radius, dtype=float))
        out = np.interp(radius, self.r, self.values)
        far = radius > self.r[-1]
        if np.any(far):
            out[far] = self._tail * radius[far] ** (-self.d - self.alpha)
        return out


_pint_tables: dict = {}


def time_integrated_density(alpha: float, h, x, d: int = 1) -> np.ndarray:
    """P(h, x) = int_0^h p_w(x) dw, vectorized over x (scalar h).

    Closed forms for alpha = 2 (d = 1, 3) and alpha = 1 (d = 1); other
    alpha via a cached radial table of P(1, .) plus self-similarity.
    """
    x = np.asarray(x, dtype=float)
    r = np.abs(x)
    h = float(h)
    if h <= 0:
        return np.zeros_like(r)
    if alpha == 2 and d == 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (np.sqrt(h / np.pi) * np.exp(-r ** 2 / (4.0 * h))
                   - (r / 2.0) * special.erfc(r / (2.0 * np.sqrt(h))))
        return np.maximum(val, 0.0)
    if alpha == 2 and d == 3:
        out = np.empty_like(r)
        pos = r > 0
        out[pos] = special.erfc(r[pos] / (2.0 * np.sqrt(h))) / (4.0 * np.pi * r[pos])
        out[~pos] = np.inf
        return out
    if alpha == 1 and d == 1:
        # diverges logarithmically at x = 0 (recurrent case); callers keep
        # their quadrature nodes away from 0 exactly
        safe = np.where(r > 0, r, 1e-300)
        return np.log((h ** 2 + safe ** 2) / safe ** 2) / (2 * np.pi)
    key = (round(alpha, 12), d)
    if key not in _pint_tables:
        _pint_tables[key] = _PIntTable(alpha, d)
    tab = _pint_tables[key]
    return h ** (1.0 - d / alpha) * tab(r * h ** (-1.0 / alpha))


@dataclass
class GammaWeightTable:
    """g_gamma(1, w) = int p_1(w - y) |y|^-gamma dy on a radial grid (d <= 2).

    Self-similarity gives g_gamma(r, x) = r^(-gamma/alpha) * G(x r^(-1/alpha));
    beyond the tabulated range G(w) ~ |w|^-gamma.
    """

    alpha: float
    gamma: float
    d: int
    w: np.ndarray
    values: np.ndarray

    def g1(self, w) -> np.ndarray:
        w = np.abs(np.asarray(w, dtype=float))
        out = np.interp(w, self.w, self.values)
        far = w > self.w[-1]
        if np.any(far):
            out[far] = w[far] ** (-self.gamma)
        return out

    def __call__(self, r, x) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        x = np.asarray(x, dtype=float)
        return r ** (-self.gamma / self.alpha) * self.g1(x * r ** (-1.0 / self.alpha))


def _p1_radial(alpha: float, d: int):
    spec = StableMotionSpec(alpha, d)
    if alpha in (1.0, 2.0):
        return lambda rr: transition_density(spec, 1.0, np.abs(rr))
    tab = density_table(alpha, d)
    return tab


def build_gamma_weight_table(alpha: float, gamma: float, d: int = 1,
                             w_max: float = 256.0, n: int = 1536
                             ) -> GammaWeightTable:
    if not (0 <= gamma < d):
        raise ValueError("gamma weight needs 0 <= gamma < d")
    if d > 2:
        raise ValueError("gamma weight table implemented for d <= 2")
    p1 = _p1_radial(alpha, d)
    w = np.concatenate([[0.0], np.geomspace(1e-3, w_max, n - 1)])
    if gamma == 0:
        return GammaWeightTable(alpha, gamma, d, w, np.ones_like(w))
    if d == 1:
        # singular part: y in [0, 1] with u = y^(1-gamma) absorbing |y|^-gamma
        u_nodes, u_weights = _gl_nodes(np.linspace(0.0, 1.0, 33))
        y_sing = u_nodes ** (1.0 / (1.0 - gamma))
        w_sing = u_weights / (1.0 - gamma)
        # regular part: y in [1, y_max]
        y_max = w_max + 80.0
        y_reg, w_reg = _gl_nodes(_panels(1.0, y_max, 96))
        w_reg = w_reg * y_reg ** (-gamma)
        y_all = np.concatenate([y_sing, y_reg])
        w_all = np.concatenate([w_sing, w_reg])
        vals = np.empty_like(w)
        chunk = 128
        for i in range(0, w.size, chunk):
            ww = w[i:i + chunk, None]
            vals[i:i + chunk] = np.sum(
                w_all * (p1(ww - y_all) + p1(ww + y_all)), axis=1)
        return GammaWeightTable(alpha, gamma, d, w, vals)
    # d == 2: polar integration with an inner angular Gauss panel
    th, th_w = _gl_nodes(np.linspace(0.0, np.pi, 17))
    u_nodes, u_weights = _gl_nodes(np.linspace(0.0, 1.0, 17))
    s_sing = u_nodes ** (1.0 / (2.0 - gamma))          # absorbs s^(1-gamma)
    w_sing = u_weights / (2.0 - gamma)
    s_reg, sw_reg = _gl_nodes(_panels(1.0, w_max + 60.0, 64))
    sw_reg = sw_reg * s_reg ** (1.0 - gamma)
    vals = np.empty_like(w)
    for i, ww in enumerate(w):
        def ring(s_arr, s_wts):
            rr = np.sqrt(ww ** 2 + s_arr[:, None] ** 2
                         - 2.0 * ww * s_arr[:, None] * np.cos(th)[None, :])
            return np.sum(s_wts * (2.0 * (th_w * p1(rr)).sum(axis=1)))
        vals[i] = ring(s_sing, w_sing) + ring(s_reg, sw_reg)
    return GammaWeightTable(alpha, gamma, d, w, vals)


def gamma_weight_d3_gaussian(gamma: float, r, x) -> np.ndarray:
    """g_gamma(r, x) for alpha = 2, d = 3, by the spherical-shell identity
    int_{|y|=s} p_r(x - y) dS = 4 pi s^2 (4 pi r)^{-3/2} e^{-(|x|^2+s^2)/(4r)}
    sinh(|x| s / (2r)) / (|x| s / (2r))."""
    r = np.asarray(r, dtype=float)
    rho = np.abs(np.asarray(x, dtype=float))
    s, sw = _gl_nodes(_panels(1e-8, 60.0, 80))
    s2 = s[None, :]
    rr = r.reshape(-1, 1)
    pp = rho.reshape(-1, 1)
    arg = pp * s2 / (2.0 * rr)
    with np.errstate(over="ignore"):
        ratio = np.where(arg > 1e-8, np.sinh(np.minimum(arg, 700.0)) / np.where(arg > 0, arg, 1.0), 1.0)
    shell = (4.0 * np.pi * s2 ** 2 * (4.0 * np.pi * rr) ** (-1.5)
             * np.exp(-(pp ** 2 + s2 ** 2) / (4.0 * rr) + 0.0) * ratio)
    vals = (sw * s2 ** (-gamma) * shell).sum(axis=1)
    return vals.reshape(np.broadcast(r, rho).shape)


def kernel_weight_xi(alpha: float, beta: float, gamma: float, r, x, t,
                     table: GammaWeightTable | None = None,
                     d: int = 1) -> np.ndarray:
    """Integrand weight of the interpolating limit at output time t."""
    if table is None:
        table = build_gamma_weight_table(alpha, gamma, d)
    r = np.asarray(r, dtype=float)
    out = np.zeros(np.broadcast(r, np.asarray(x)).shape)
    live = r < t
    if np.any(live):
        g = table(r, x) if table.gamma > 0 else np.ones_like(out)
        p_int = _p_int_grid(alpha, t, r, x, d)
        out = np.where(live, g ** (1.0 / (1.0 + beta)) * p_int, 0.0)
    return out


def _p_int_grid(alpha, t, r, x, d):
    r = np.asarray(r, dtype=float)
    x = np.asarray(x, dtype=float)
    rb, xb = np.broadcast_arrays(r, x)
    out = np.zeros(rb.shape)
    for rv in np.unique(rb):
        if rv >= t:
            continue
        m = rb == rv
        out[m] = time_integrated_density(alpha, t - rv, xb[m], d)
    return out


def kernel_weight_zeta(alpha: float, beta: float, r, x, t,
                       d: int = 1) -> np.ndarray:
    """Finite-measure-family weight p_r(x)^(1/(1+beta)) P(t-r, x)."""
    spec = StableMotionSpec(alpha, d)
    r = np.asarray(r, dtype=float)
    pr = transition_density(spec, np.maximum(r, 1e-300), np.asarray(x))
    out = pr ** (1.0 / (1.0 + beta)) * _p_int_grid(alpha, t, r, x, d)
    return np.where(r < t, out, 0.0)
