"""Torus geometry, Pareto weights and the connection probability."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, RegimeError
from .special import gamma


@dataclass(frozen=True)
class ModelParams:
    """Dimension and exponents of the scale-free random connection model.

    ``eta == 0`` is accepted as the degenerate edgeless model so that it can
    be sampled; every analytic constant requires ``eta > 0``.
    ``paper_literal_c0`` swaps the d-dimensional sphere area for a flat 2*pi
    in the angular factor of c0 and c3 (identical at d=2).
    """

    d: int
    alpha: float
    beta: float
    eta: float = 1.0
    paper_literal_c0: bool = False

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise InvalidArgument(f"d must be an integer >= 2, got {self.d}")
        object.__setattr__(self, "d", int(self.d))
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgument(f"{name} must be positive and finite, got {v}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise InvalidArgument(f"eta must be non-negative and finite, got {self.eta}")

    @property
    def finite_degree_regime(self) -> bool:
        return self.alpha > self.d and self.beta > 1

    def require(self, *conditions: str, override: bool = False) -> None:
        """Raise RegimeError naming the first failed condition.

        Known conditions: ``"alpha>d"``, ``"beta>1"``, ``"alpha*beta>d"``,
        ``"eta>0"``. ``override`` skips everything except ``eta>0``.
        """
        d, a, b = self.d, self.alpha, self.beta
        checks = {
            "eta>0": (self.eta > 0, f"eta > 0 (eta={self.eta})"),
            "alpha>d": (a > d, f"alpha > d (alpha={a}, d={d})"),
            "beta>1": (b > 1, f"beta > 1 (beta={b})"),
            "alpha*beta>d": (a * b > d, f"alpha*beta > d (alpha*beta={a * b}, d={d})"),
        }
        for cond in conditions:
            ok, text = checks[cond]
            if not ok and (cond == "eta>0" or not override):
                raise RegimeError(f"requires {text}")

    def angular_factor(self) -> float:
        if self.paper_literal_c0:
            return 2.0 * math.pi
        return self.d * unit_ball_volume(self.d)


def wrap(coords):
    """Map coordinates to the canonical cell (-1/2, 1/2]."""
    x = np.asarray(coords, dtype=float)
    return x - np.ceil(x - 0.5)


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple

    def __init__(self, coords: Sequence[float]):
        object.__setattr__(self, "coords", tuple(float(c) for c in wrap(coords)))

    @property
    def d(self):
        return len(self.coords)


@dataclass(frozen=True)
class MarkedPoint:
    position: TorusPoint
    weight: float

    def __post_init__(self):
        if not isinstance(self.position, TorusPoint):
            object.__setattr__(self, "position", TorusPoint(self.position))
        if not self.weight >= 1:
            raise InvalidArgument(f"weight must be >= 1, got {self.weight}")


def _coords(p):
    if isinstance(p, MarkedPoint):
        p = p.position
    if isinstance(p, TorusPoint):
        return np.asarray(p.coords)
    return wrap(p)


def torus_distance(x, y, d: int | None = None) -> float:
    """Euclidean length of the minimal-image difference of two torus points."""
    a, b = _coords(x), _coords(y)
    if a.shape != b.shape or (d is not None and a.shape[-1] != d):
        raise InvalidArgument(f"dimension mismatch: {a.shape}, {b.shape}, d={d}")
    delta = a - b
    delta -= np.round(delta)
    return float(np.sqrt(np.sum(delta * delta)))


def edge_probability(eta, wx, wy, ratio, alpha):
    """1 - exp(-eta*wx*wy / ratio**alpha) where ratio = distance / r.

    Vectorised; ratio == 0 gives exactly 1.
    """
    ratio = np.asarray(ratio, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        lead = np.exp(-alpha * np.log(ratio))
        x = eta * np.asarray(wx) * np.asarray(wy) * lead
        x = np.where(ratio == 0, np.inf, x)
        x = np.where(eta * np.asarray(wx) * np.asarray(wy) == 0, 0.0, x)
    return -np.expm1(-x)


def connection_prob(params: ModelParams, r: float, x: MarkedPoint, y: MarkedPoint) -> float:
    if not r > 0:
        raise InvalidArgument(f"scale radius must be positive, got {r}")
    dist = torus_distance(x, y, params.d)
    return float(edge_probability(params.eta, x.weight, y.weight, dist / r, params.alpha))


def pareto_quantile(beta, u):
    """Inverse survival function of the weight law: u**(-1/beta).

    Accepts scalars or arrays; every u must lie in (0, 1].
    """
    if not beta > 0:
        raise InvalidArgument(f"beta must be positive, got {beta}")
    arr = np.asarray(u, dtype=float)
    if np.any(~((arr > 0) & (arr <= 1))):
        raise InvalidArgument("u must lie in (0, 1]")
    out = arr ** (-1.0 / beta)
    return float(out) if out.ndim == 0 else out


def unit_ball_volume(d: int) -> float:
    if d < 1:
        raise InvalidArgument(f"d must be >= 1, got {d}")
    return math.pi ** (d / 2) / gamma(d / 2 + 1)
