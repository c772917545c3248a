"""Composite Gauss-Legendre machinery behind the analytic oracles.

Weight expectations always use the substitution u = W**(-beta), u = exp(v),
which turns E[fn(W)] into the integral of fn(exp(-v/beta)) * exp(v) over
v <= 0 with a bounded integrand.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numba as nb
import numpy as np
from numpy.polynomial import chebyshev, legendre

from . import tolerances as tol
from .errors import NumericalFailure


@lru_cache(maxsize=None)
def _gl_unit(order):
    x, w = legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def composite_rule(breaks, order=tol.PANEL_ORDER):
    """Nodes and weights of the composite rule on consecutive breakpoints."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _gl_unit(order)
    h = np.diff(breaks)
    nodes = breaks[:-1, None] + h[:, None] * x[None, :]
    weights = h[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def bisect_panels(breaks, times=1):
    breaks = np.asarray(breaks, dtype=float)
    for _ in range(times):
        mid = (breaks[:-1] + breaks[1:]) / 2
        out = np.empty(2 * len(breaks) - 1)
        out[0::2] = breaks
        out[1::2] = mid
        breaks = out
    return breaks


def refine_until_stable(estimate, rtol=tol.INTEGRAL_RTOL, max_level=tol.MAX_REFINEMENTS, what="integral",
                        scale_floor=0.0):
    """Call estimate(level) for level = 0, 1, ... until two successive
    results agree to rtol (elementwise, relative to max(|result|, scale_floor)).
    Returns the finer one."""
    older = None
    prev = np.asarray(estimate(0), dtype=float)
    for level in range(1, max_level + 1):
        try:
            cur = np.asarray(estimate(level), dtype=float)
        except NumericalFailure as exc:
            # a resource cap was hit before convergence
            raise NumericalFailure(f"{what}: {exc}", estimates=(older, prev)) from None
        scale = np.maximum(np.abs(cur), max(scale_floor, np.finfo(float).tiny))
        if np.all(np.abs(cur - prev) <= rtol * scale):
            return cur
        older, prev = prev, cur
    raise NumericalFailure(
        f"{what} did not converge after {max_level} refinements",
        estimates=(prev, cur),
    )


# --- E[1 - exp(-z W)] -----------------------------------------------------

def _v_breaks(v_lo, beta):
    width = min(1.0, beta)
    n = max(1, int(math.ceil(-v_lo / width)))
    return np.linspace(-n * width, 0.0, n + 1)


def edge_mass(z, beta, order=16):
    """E[1 - exp(-z W)] for Pareto(beta) weights, by direct quadrature.

    Vectorised over z >= 0. The panel range reaches below min(log z, 0) by 38
    units of v, where the neglected mass exp(v) is under 1e-16 of the result.
    """
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    pos = flat[flat > 0]
    t_min = math.log(pos.min()) if pos.size else 0.0
    v, wv = composite_rule(_v_breaks(min(t_min, 0.0) - 38.0, beta), order)
    jac = wv * np.exp(v)
    inv = np.exp(-v / beta)
    out = np.empty_like(flat)
    for start in range(0, flat.size, 256):
        chunk = flat[start:start + 256]
        out[start:start + 256] = -np.expm1(-chunk[:, None] * inv[None, :]) @ jac
    return out.reshape(z.shape)


@nb.njit(cache=True)
def _clenshaw_log_f(t, coef, t_lo, t_hi):
    if t >= t_hi:
        return 0.0
    m = int(math.floor(t - t_lo))
    if m < 0:
        m = 0
    x = 2.0 * (t - t_lo - m) - 1.0
    deg = coef.shape[1] - 1
    b1 = 0.0
    b2 = 0.0
    for k in range(deg, 0, -1):
        b0 = coef[m, k] + 2.0 * x * b1 - b2
        b2 = b1
        b1 = b0
    return coef[m, 0] + x * b1 - b2


@nb.njit(cache=True)
def _table_eval(t, coef, t_lo, t_hi):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = math.exp(_clenshaw_log_f(t[i], coef, t_lo, t_hi))
    return out


@nb.njit(cache=True)
def _weighted_sums(shift, tau, omega, coef, t_lo, t_hi):
    # out[j] = sum_k omega[k] * F(exp(shift[j] + tau[k]))
    out = np.empty(shift.shape[0])
    for j in range(shift.shape[0]):
        acc = 0.0
        for k in range(tau.shape[0]):
            acc += omega[k] * math.exp(_clenshaw_log_f(shift[j] + tau[k], coef, t_lo, t_hi))
        out[j] = acc
    return out


class EdgeMassTable:
    """Piecewise Chebyshev interpolant of log E[1 - exp(-z W)] in t = log z.

    Unit-width panels cover [t_lo, FTABLE_T_MAX]; above the range the mass is
    1 to double precision (E[exp(-zW)] < exp(-148)).
    """

    def __init__(self, beta, t_lo):
        self.beta = beta
        self.t_lo = float(math.floor(t_lo))
        self.t_hi = tol.FTABLE_T_MAX
        deg = tol.FTABLE_DEGREE
        npan = int(self.t_hi - self.t_lo)
        xk = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
        t = self.t_lo + np.arange(npan)[:, None] + (xk[None, :] + 1) / 2
        vals = np.log(edge_mass(np.exp(t), beta))
        self.coef = np.array([chebyshev.chebfit(xk, vals[m], deg) for m in range(npan)])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        t = np.log(z.ravel())
        if t.size and t.min() < self.t_lo:
            raise ValueError("argument below table range")
        return _table_eval(t, self.coef, self.t_lo, self.t_hi).reshape(z.shape)

    def weighted_sums(self, shift, tau, omega):
        if tau.size and float(np.min(shift)) + float(tau.min()) < self.t_lo:
            raise ValueError("argument below table range")
        return _weighted_sums(np.asarray(shift, dtype=float), tau, omega, self.coef, self.t_lo, self.t_hi)


_TABLES: dict[float, EdgeMassTable] = {}


def edge_mass_table(beta, t_lo):
    """Cached table for this beta that reaches at least down to t_lo."""
    tab = _TABLES.get(beta)
    if tab is None or tab.t_lo > t_lo:
        lo = min(t_lo, tab.t_lo if tab else -40.0) - 10.0
        tab = _TABLES[beta] = EdgeMassTable(beta, lo)
    return tab


# --- spatial rule over the torus cell ---------------------------------------

def _axis_breaks(h0):
    b = [0.0]
    h = h0
    while h < 0.5:
        b.append(h)
        h *= 2.0
    b.append(0.5)
    if b[-1] - b[-2] < 0.25 * b[-2]:  # merge a sliver panel at the top
        del b[-2]
    return np.array(b)


class SpatialRule:
    """Tensor-grid rule for integrals of radial functions over (-1/2, 1/2]^d.

    Panels along each axis of the positive orthant grow geometrically from
    ``h0`` toward 1/2; the 2**d reflections of the orthant are folded into the
    weights. Level L halves every panel L times.
    """

    def __init__(self, d, h0):
        self.d = d
        self.breaks = _axis_breaks(min(h0, 0.125))
        self._cache = {}

    def size(self, level):
        return ((len(self.breaks) - 1) * 2 ** level * tol.PANEL_ORDER) ** self.d

    def nodes(self, level):
        hit = self._cache.get(level)
        if hit is None:
            if self.size(level) > tol.MAX_SPATIAL_NODES:
                raise NumericalFailure(f"spatial grid at level {level} exceeds {tol.MAX_SPATIAL_NODES} nodes")
            x, w = composite_rule(bisect_panels(self.breaks, level))
            r2 = x * x
            weight = w * 2.0 ** self.d
            for _ in range(self.d - 1):
                r2 = np.add.outer(r2, x * x).ravel()
                weight = np.multiply.outer(weight, w).ravel()
            hit = (np.sqrt(r2, out=r2), weight)
            if len(r2) <= 1_000_000:
                self._cache[level] = hit
        return hit


# --- weight expectations ------------------------------------------------------

def weight_expectation(fn, beta, *, w_max=math.inf, tail_bound=None, rtol=tol.INTEGRAL_RTOL,
                       max_panels=4000, scale_floor=0.0):
    """E[fn(W); W <= w_max] for Pareto(beta) weights.

    ``fn`` maps an array of weights to an array of values. With an infinite
    ``w_max`` the panel range is extended leftwards in v until
    ``tail_bound(w_edge)``, an upper bound on E[|fn(W)|; W > w_edge], drops
    below rtol/100 of the running total. ``scale_floor`` lets a caller that
    adds a known remainder judge convergence against the full sum.
    """
    if w_max <= 1:
        return 0.0
    width = min(1.0, beta)
    if math.isfinite(w_max):
        v_min = -beta * math.log(w_max)
        n = max(1, int(math.ceil(-v_min / width)))
        breaks = np.linspace(v_min, 0.0, n + 1)
        # integrands cut off at w_max often switch on in a thin layer below it
        layer = v_min + (breaks[1] - v_min) * 2.0 ** -np.arange(52, 0, -1)
        breaks = np.concatenate([[v_min], layer, breaks[1:]])
    else:
        if tail_bound is None:
            raise ValueError("an infinite range needs a tail bound")
        edges = [0.0]
        total = 0.0
        while True:
            lo = edges[-1] - width
            v, wv = composite_rule([lo, edges[-1]])
            total += float(np.dot(fn(np.exp(-v / beta)), wv * np.exp(v)))
            edges.append(lo)
            bound = tail_bound(math.exp(-lo / beta))
            if bound <= 0.01 * rtol * abs(total) or (total == 0 and bound == 0):
                break
            if len(edges) > max_panels:
                raise NumericalFailure("weight expectation tail did not become negligible",
                                       estimates=(total, bound))
        breaks = np.array(edges[::-1])

    def estimate(level):
        v, wv = composite_rule(bisect_panels(breaks, level))
        return float(np.dot(fn(np.exp(-v / beta)), wv * np.exp(v)))

    return float(refine_until_stable(estimate, rtol, what="weight expectation", scale_floor=scale_floor))
