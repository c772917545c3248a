"""Deterministic evaluation of the model's constants, scaling laws and
finite-intensity expectations.

Everything here is quadrature or closed form; these values are the oracles
that the Monte Carlo experiments are checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import tolerances as tol
from .errors import DomainError, InvalidArgument, NumericalFailure, RegimeError
from .model import ModelParams, unit_ball_volume
from .quadrature import (
    SpatialRule,
    bisect_panels,
    composite_rule,
    edge_mass,
    edge_mass_table,
    refine_until_stable,
    weight_expectation,
)
from .special import gamma


# --- c0 and the scaling law ----------------------------------------------------

def c0_constant(params: ModelParams, *, allow_outside_regime=False) -> float:
    """Integral over R^d of the mean connection probability of a unit-weight
    vertex, divided by nothing: int E[1 - exp(-eta W / |x|^alpha)] dx.

    Needs alpha > d and alpha*beta > d to be finite; beta > 1 (the
    finite-degree regime) is enforced unless ``allow_outside_regime``.
    Equals  A_d * alpha*beta / (d*(alpha*beta - d)) * eta**(d/alpha) * Gamma(1 - d/alpha)
    with A_d the sphere area d*theta_d (or 2*pi when ``paper_literal_c0``).
    """
    params.require("eta>0", "alpha>d", "alpha*beta>d")
    params.require("beta>1", override=allow_outside_regime)
    d, a, b = params.d, params.alpha, params.beta
    return (params.angular_factor() * a * b / (d * (a * b - d))
            * params.eta ** (d / a) * gamma(1.0 - d / a))


def scaling_rhs(params: ModelParams, s: float, k: int, xi: float) -> float:
    """log s + (k-1) log log s + xi + log(alpha*beta / (k! d))."""
    loglog = (k - 1) * math.log(math.log(s)) if k != 1 else 0.0
    return (math.log(s) + loglog + xi + math.log(params.alpha * params.beta / params.d)
            - math.lgamma(k + 1))


def _min_valid_intensity(params, k, xi):
    lo = math.e if k != 1 else 1.0
    f = lambda logs: scaling_rhs(params, math.exp(logs), k, xi)
    a = math.log(lo) + 1e-9
    b = max(a + 1.0, 2.0)
    while f(b) <= 0:
        b *= 2.0
    if f(a) > 0:
        return lo
    return math.exp(optimize.brentq(f, a, b, xtol=1e-12))


@dataclass(frozen=True)
class ScalingSpec:
    params: ModelParams
    k: int
    xi: float
    s: float
    c0: float
    r_s: float

    @property
    def rhs(self):
        """c0 * s * r_s**d, i.e. the right-hand side of the scaling law."""
        return self.c0 * self.s * self.r_s ** self.params.d


def scaling_radius(params: ModelParams, s: float, k: int, xi: float, *,
                   allow_outside_regime=False) -> ScalingSpec:
    if k < 0 or int(k) != k:
        raise InvalidArgument(f"k must be a non-negative integer, got {k}")
    k = int(k)
    if k != 1 and not s > math.e:
        raise InvalidArgument(f"intensity must exceed e for k != 1, got s={s}")
    if not s > 1:
        raise InvalidArgument(f"intensity must exceed 1, got s={s}")
    c0 = c0_constant(params, allow_outside_regime=allow_outside_regime)
    rhs = scaling_rhs(params, s, k, xi)
    if not rhs > 0:
        smin = _min_valid_intensity(params, k, xi)
        raise DomainError(
            f"scaling right-hand side is {rhs:.6g} <= 0 at s={s}; it is positive for s > {smin:.6g}",
            min_s=smin,
        )
    return ScalingSpec(params, k, float(xi), float(s), c0, (rhs / (c0 * s)) ** (1.0 / params.d))


# --- lower envelope of the profile integral ----------------------------------------

def lambda_constants(params: ModelParams):
    """(c1, c2, c3) of the inner-ball lower bound."""
    params.require("eta>0", "alpha>d", "beta>1")
    d, a, b, eta = params.d, params.alpha, params.beta, params.eta
    c1 = a * eta * 2.0 ** (a - d) / (d * (a - d))
    c2 = b * c1 / (b - 1)
    c3 = params.angular_factor() * b * c2
    return c1, c2, c3


def lambda_s(params: ModelParams, r_s: float, w):
    """max(0, c0 w^(d/alpha) - c3 w r_s^(alpha-d)); vectorised over w."""
    c0 = c0_constant(params)
    _, _, c3 = lambda_constants(params)
    w = np.asarray(w, dtype=float)
    out = np.maximum(0.0, c0 * w ** (params.d / params.alpha) - c3 * w * r_s ** (params.alpha - params.d))
    return float(out) if out.ndim == 0 else out


def lambda_cutoff(params: ModelParams, r_s: float) -> float:
    """Weight above which lambda_s vanishes: (c0/c3)^(alpha/(alpha-d)) r_s^-alpha."""
    c0 = c0_constant(params)
    _, _, c3 = lambda_constants(params)
    a, d = params.alpha, params.d
    return (c0 / c3) ** (a / (a - d)) * r_s ** (-a)


# --- profile integral ----------------------------------------------------------------

_RULES: dict = {}


def _spatial_rule(d, h0):
    key = (d, h0)
    rule = _RULES.get(key)
    if rule is None:
        if len(_RULES) > 32:
            _RULES.clear()
        rule = _RULES[key] = SpatialRule(d, h0)
    return rule


def profile_integral(params: ModelParams, r_s: float, w, *, allow_outside_regime=False,
                     rtol=tol.INTEGRAL_RTOL):
    """I(w) = int_S E[1 - exp(-eta w W (r_s / |x|)^alpha)] dx over the torus cell.

    Tensor-grid quadrature over the cell with geometric panels toward the
    origin, refined until every requested w is stable to ``rtol``.
    Accepts a scalar or an array of weights (each >= 1).
    """
    params.require("eta>0", "alpha>d", "beta>1", override=allow_outside_regime)
    if not r_s > 0:
        raise InvalidArgument(f"r_s must be positive, got {r_s}")
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w_arr < 1):
        raise InvalidArgument("weights must be >= 1")
    d, a, eta = params.d, params.alpha, params.eta
    t_floor = math.log(eta) + a * math.log(r_s / (math.sqrt(d) / 2)) + math.log(w_arr.min())
    table = edge_mass_table(params.beta, t_floor - 1.0)
    rule = _spatial_rule(d, r_s * eta ** (1.0 / a) / 64.0)
    shift = np.log(eta * w_arr)

    def estimate(level):
        radius, weight = rule.nodes(level)
        tau = a * (math.log(r_s) - np.log(radius))
        return table.weighted_sums(shift, tau, weight)

    out = refine_until_stable(estimate, rtol, what="profile integral")
    return float(out[0]) if np.ndim(w) == 0 else out


# --- finite-s expectation of D_k ----------------------------------------------------

def _poisson_term(lam, k):
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore"):
        logp = k * np.log(lam) - lam - math.lgamma(k + 1)
    if k == 0:
        logp = -lam
    return np.exp(logp)


def expected_Dk(params: ModelParams, s: float, k: int, xi: float, *, allow_outside_regime=False) -> float:
    """nu = s E_W0[ (s I(W0))^k / k! exp(-s I(W0)) ], exact at finite s."""
    params.require("eta>0", "alpha>d", "beta>1", override=allow_outside_regime)
    sc = scaling_radius(params, s, k, xi, allow_outside_regime=allow_outside_regime)
    r_s, beta = sc.r_s, params.beta

    def mean_degree(W):
        return s * profile_integral(params, r_s, W, allow_outside_regime=allow_outside_regime)

    def fn(W):
        return s * _poisson_term(mean_degree(W), k)

    def tail(w_edge):
        lam = float(mean_degree(np.array([w_edge]))[0])
        return s * w_edge ** (-beta) * float(_poisson_term(max(lam, k), k))

    return weight_expectation(fn, beta, tail_bound=tail)


# --- lemma-style weight integrals -----------------------------------------------------

def _upper_envelope_expectation(params, sc, j, jm):
    """E[(A W^(d/alpha))^jm exp(-j s r^d Lambda(W))] with A = c0 s r^d.

    Quadrature below the Lambda cutoff plus the closed-form tail above it,
    where the exponential factor is 1.
    """
    d, a, b = params.d, params.alpha, params.beta
    A = sc.rhs
    srd = sc.s * sc.r_s ** d
    p = jm * d / a
    if not b > p:
        raise RegimeError(f"requires alpha*beta > j*m*d for a finite expectation "
                          f"(alpha*beta={a * b}, j*m*d={jm * d})")
    w_c = lambda_cutoff(params, sc.r_s)

    def fn(W):
        logv = jm * (math.log(A) + (d / a) * np.log(W)) if jm else 0.0
        return np.exp(logv - j * srd * lambda_s(params, sc.r_s, W))

    w0 = max(w_c, 1.0)
    tail = A ** jm * b * w0 ** (p - b) / (b - p)
    return weight_expectation(fn, b, w_max=w_c, scale_floor=tail) + tail


def f_j_integral(params: ModelParams, s: float, k: int, xi: float, j: int, m: int) -> float:
    """E[(c0 s r_s^d W^(d/alpha))^(j m) exp(-j s r_s^d Lambda_s(W))]."""
    if j < 1 or m < 1:
        raise InvalidArgument("j and m must be >= 1")
    params.require("eta>0", "alpha>d", "beta>1")
    sc = scaling_radius(params, s, k, xi)
    return _upper_envelope_expectation(params, sc, j, j * m)


LEMMAS = ("L1", "L2", "UB", "U")


def lemma_value(which, params: ModelParams, s, k, xi, j=1, m=1):
    """Left-hand side of the named limit statement at intensity s.

    L1: s E[exp(-A W^(d/alpha))], k = 0.
    L2: s/k! E[(s r^d Lambda(W))^k exp(-A W^(d/alpha))], k >= 1.
    UB: s^j E[exp(-j s r^d Lambda(W))], k = 0.
    U:  (s/k!)^j E[(A W^(d/alpha))^(j m) exp(-j s r^d Lambda(W))], k >= 1.
    Here A = c0 s r_s^d with r_s from the degree-k scaling.
    """
    d, a, b = params.d, params.alpha, params.beta
    params.require("eta>0", "alpha>d", "beta>1")
    if which == "L1":
        if k != 0:
            raise InvalidArgument("L1 is stated for k = 0")
        sc = scaling_radius(params, s, k, xi)
        A = sc.rhs
        fn = lambda W: s * np.exp(-A * W ** (d / a))
        tail = lambda w: s * w ** (-b) * math.exp(-A * w ** (d / a))
        return weight_expectation(fn, b, tail_bound=tail)
    if which == "L2":
        if k < 1:
            raise InvalidArgument("L2 is stated for k >= 1")
        sc = scaling_radius(params, s, k, xi)
        A, srd = sc.rhs, s * sc.r_s ** d
        lgk = math.lgamma(k + 1)

        def fn(W):
            lam = lambda_s(params, sc.r_s, W)
            with np.errstate(divide="ignore"):
                logv = math.log(s) - lgk + k * np.log(srd * lam) - A * W ** (d / a)
            return np.exp(logv)

        return weight_expectation(fn, b, w_max=lambda_cutoff(params, sc.r_s))
    if which == "UB":
        if k != 0:
            raise InvalidArgument("UB is stated for k = 0")
        if not a * b > j * d:
            raise RegimeError(f"UB requires alpha*beta > j*d (alpha*beta={a * b}, j*d={j * d})")
        sc = scaling_radius(params, s, k, xi)
        return s ** j * _upper_envelope_expectation(params, sc, j, 0)
    if which == "U":
        if k < 1 or j < 1 or m < 1:
            raise InvalidArgument("U is stated for k >= 1, j >= 1, m >= 1")
        sc = scaling_radius(params, s, k, xi)
        return math.exp(j * (math.log(s) - math.lgamma(k + 1))) * _upper_envelope_expectation(params, sc, j, j * m)
    raise InvalidArgument(f"unknown lemma {which!r}; expected one of {LEMMAS}")


def lemma_limit(which, params: ModelParams, s, xi, j=1):
    """The limiting expression each lemma value is normalised by."""
    if which in ("L1", "L2"):
        return math.exp(-xi)
    ab_d = params.alpha * params.beta / params.d
    return ab_d ** (1 - j) * math.exp(-j * xi) * math.log(s) ** (j - 1) / j


def lemma_limit_sequence(which, params: ModelParams, k, xi, j, m, s_ladder):
    """Lemma values along s_ladder, each divided by its limiting expression."""
    return [lemma_value(which, params, s, k, xi, j, m) / lemma_limit(which, params, s, xi, j)
            for s in s_ladder]


# --- connectivity constants -------------------------------------------------------

def kappa_constant(params: ModelParams, *, allow_outside_regime=False) -> float:
    """int over B(0,1) of E[1 - exp(-eta W / |z|^alpha)] dz, radially reduced."""
    params.require("eta>0", "alpha>d", "beta>1", override=allow_outside_regime)
    d, a, eta, b = params.d, params.alpha, params.eta, params.beta
    # geometric panels down to where eta r^-alpha > 1e4 (integrand is 1 there)
    r_flat = min(1.0, (eta / 1e4) ** (1.0 / a))
    levels = max(1, int(math.ceil(-math.log2(r_flat))) + 2)
    breaks = np.concatenate([[0.0], 2.0 ** -np.arange(levels, -1, -1)])
    area = d * unit_ball_volume(d)

    def estimate(level):
        r, w = composite_rule(bisect_panels(breaks, level))
        return area * float(np.dot(w * r ** (d - 1), edge_mass(eta * r ** (-a), b)))

    return float(refine_until_stable(estimate, what="kappa"))


def T_of_gamma(params: ModelParams, kappa: float, gamma_):
    d = params.d
    g = np.asarray(gamma_, dtype=float)
    reach = 1.0 + (kappa / (g * unit_ball_volume(d))) ** (1.0 / d)
    out = -np.expm1(-params.eta * reach ** (-params.alpha))
    return float(out) if out.ndim == 0 else out


def Q_of_gamma(params: ModelParams, kappa: float, gamma_):
    out = np.asarray(gamma_, dtype=float) * T_of_gamma(params, kappa, gamma_)
    return float(out) if np.ndim(out) == 0 else out


def rho_root(params: ModelParams, kappa: float | None = None) -> float:
    """Unique gamma with Q(gamma) = 1, by bisection on a doubled bracket."""
    if kappa is None:
        kappa = kappa_constant(params)
    f = lambda g: Q_of_gamma(params, kappa, g) - 1.0
    lo, hi = 1e-12, 1.0
    for _ in range(2000):
        if f(hi) > 0:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericalFailure("could not bracket the root of Q(gamma) = 1", estimates=(lo, hi))
    return optimize.bisect(f, lo, hi, xtol=tol.ROOT_XTOL, maxiter=500)


def hat_radius(params: ModelParams, kappa: float, s: float, gamma_: float) -> float:
    """(gamma log s / (kappa s))^(1/d)."""
    if not s > 1:
        raise InvalidArgument(f"intensity must exceed 1, got s={s}")
    if not gamma_ > 0:
        raise InvalidArgument(f"gamma must be positive, got {gamma_}")
    return (gamma_ * math.log(s) / (kappa * s)) ** (1.0 / params.d)


def tilde_radius(params: ModelParams, s: float, b: float) -> float:
    """(b log s / (theta_d s))^(1/d): the neighbourhood radius of the one-hop argument."""
    return (b * math.log(s) / (unit_ball_volume(params.d) * s)) ** (1.0 / params.d)


def cover_factor(params: ModelParams, kappa: float, gamma_: float) -> float:
    """A b > 1 with gamma T(gamma / b) > 1, halfway to the largest such b.

    Returns 1.0 when gamma <= rho (no admissible b exists).
    """
    g = lambda b: gamma_ * T_of_gamma(params, kappa, gamma_ / b) - 1.0
    if g(1.0) <= 0:
        return 1.0
    hi = 2.0
    while g(hi) > 0:
        hi *= 2.0
    b_star = optimize.brentq(g, 1.0, hi, xtol=1e-12)
    return 1.0 + (b_star - 1.0) / 2.0


@dataclass(frozen=True)
class ConnectivitySpec:
    params: ModelParams
    kappa: float
    theta_d: float
    gamma: float
    rho: float
    s: float
    r_hat_s: float


def connectivity_spec(params: ModelParams, s: float, gamma_: float, kappa=None, rho=None) -> ConnectivitySpec:
    if kappa is None:
        kappa = kappa_constant(params)
    if rho is None:
        rho = rho_root(params, kappa)
    return ConnectivitySpec(params, kappa, unit_ball_volume(params.d), float(gamma_), rho, float(s),
                            hat_radius(params, kappa, s, gamma_))
