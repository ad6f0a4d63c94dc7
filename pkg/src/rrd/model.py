"""Interarrival and jump-size distributions.

Two parametric interarrival families are supported:

* ``beta1``: density ``theta * (1-x)**(theta-1)`` on [0, 1].  Its value at
  zero is ``theta > 0``, which is what the small-step count-probability
  envelopes require.
* ``exponential``: density ``theta * exp(-theta*x)`` on [0, inf).  Included
  because it makes the window count Poisson, giving closed-form oracles.

The jump law is a finite mixture of uniform and Laplace components.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

FAMILIES = ("beta1", "exponential")

#: Compact parameter box the estimated interarrival parameter is clamped to.
DEFAULT_THETA_BOX = (0.5, 10.0)


@dataclass(frozen=True)
class RenewalModel:
    """Parametric interarrival distribution of a renewal process.

    ``quadrature_steps`` fixes the resolution of the composite-trapezoid
    grids used wherever an integral has no closed form (count probabilities,
    numerical cross-checks).
    """

    family: str
    theta: float
    quadrature_steps: int = 4096

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown interarrival family {self.family!r}")
        if self.theta <= 0:
            raise ValueError("interarrival parameter must be positive")
        if self.quadrature_steps < 2:
            raise ValueError("quadrature_steps must be >= 2")

    # -- interarrival law ---------------------------------------------------

    @property
    def support_end(self) -> float:
        """Right end of the interarrival support (inf for exponential)."""
        return 1.0 if self.family == "beta1" else math.inf

    def interarrival_pdf(self, x):
        """Density of the gaps between consecutive jumps, vectorized."""
        x = np.asarray(x, dtype=float)
        if self.family == "beta1":
            inside = (x >= 0.0) & (x < 1.0)
            out = np.zeros_like(x)
            xm = np.where(inside, x, 0.0)
            out = np.where(inside, self.theta * (1.0 - xm) ** (self.theta - 1.0), 0.0)
            if self.theta == 1.0:
                out = np.where(x == 1.0, 1.0, out)
            return out if out.ndim else float(out)
        out = np.where(x >= 0.0, self.theta * np.exp(-self.theta * np.minimum(x, 700 / self.theta)), 0.0)
        return out if out.ndim else float(out)

    def interarrival_cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "beta1":
            xc = np.clip(x, 0.0, 1.0)
            out = 1.0 - (1.0 - xc) ** self.theta
        else:
            out = np.where(x > 0.0, -np.expm1(-self.theta * np.maximum(x, 0.0)), 0.0)
        return out if out.ndim else float(out)

    def interarrival_ppf(self, u):
        """Inverse CDF of the gap law; u in [0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.family == "beta1":
            out = 1.0 - (1.0 - u) ** (1.0 / self.theta)
        else:
            out = -np.log1p(-u) / self.theta
        return out if out.ndim else float(out)

    def mean_interarrival(self) -> float:
        """Mean gap length; 1/(theta+1) for beta1, 1/theta for exponential."""
        if self.family == "beta1":
            return 1.0 / (self.theta + 1.0)
        return 1.0 / self.theta

    # -- stationary delay ---------------------------------------------------
    # The first gap of a stationary path has density (1 - F(x)) / mu.  For
    # beta1 that is another beta1 law with parameter theta+1; for the
    # exponential it coincides with the gap law (memorylessness).

    def stationary_delay_pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = (1.0 - self.interarrival_cdf(x)) / self.mean_interarrival()
        out = np.where(x >= 0.0, out, 0.0)
        return out if out.ndim else float(out)

    def stationary_delay_cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "beta1":
            xc = np.clip(x, 0.0, 1.0)
            out = 1.0 - (1.0 - xc) ** (self.theta + 1.0)
        else:
            out = self.interarrival_cdf(x)
        return np.where(x > 0.0, out, 0.0) if np.ndim(out) else float(out)

    def stationary_delay_ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "beta1":
            out = 1.0 - (1.0 - u) ** (1.0 / (self.theta + 1.0))
        else:
            out = -np.log1p(-u) / self.theta
        return out if out.ndim else float(out)

    # -- nonzero-increment probability --------------------------------------

    def nonzero_prob(self, delta: float) -> float:
        """Probability that a window of length ``delta`` of a stationary path
        contains at least one jump: the stationary-delay CDF at ``delta``.
        """
        if delta <= 0:
            raise ValueError("delta must be positive")
        if self.family == "beta1":
            if delta >= 1.0:
                return 1.0
            return -math.expm1((self.theta + 1.0) * math.log1p(-delta))
        return -math.expm1(-self.theta * delta)

    def envelope_delta(self) -> float:
        """Largest step at which the small-step count-probability envelopes
        are guaranteed: the gap CDF stays <= 1/2 and the gap density stays
        <= twice its value at zero, both checked on a quadrature grid.
        """
        end = self.support_end if math.isfinite(self.support_end) else 10.0 / self.theta
        grid = np.linspace(0.0, end, self.quadrature_steps + 1)
        pdf = self.interarrival_pdf(grid)
        ok = (self.interarrival_cdf(grid) <= 0.5) & (
            np.maximum.accumulate(pdf) <= 2.0 * pdf[0]
        )
        bad = np.nonzero(~ok)[0]
        if len(bad) == 0:
            return float(grid[-1])
        if bad[0] == 0:
            raise ValueError("count-probability envelopes fail at zero step")
        return float(grid[bad[0] - 1])


def invert_q(family: str, q_hat: float, delta: float) -> float:
    """Parameter for which the nonzero-increment probability at step
    ``delta`` equals ``q_hat``.  Closed form for both families; the result
    is returned unclamped (it may land outside any parameter box).
    """
    if not 0.0 < q_hat < 1.0:
        raise ValueError("q_hat must lie strictly between 0 and 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if family == "beta1":
        if delta >= 1.0:
            raise ValueError("beta1 inversion needs delta < 1")
        return math.log1p(-q_hat) / math.log1p(-delta) - 1.0
    if family == "exponential":
        return -math.log1p(-q_hat) / delta
    raise ValueError(f"unknown interarrival family {family!r}")


def invert_q_bisect(
    family: str,
    q_hat: float,
    delta: float,
    bracket: tuple[float, float] = (1e-8, 1e4),
    tol: float = 1e-10,
) -> float:
    """Generic inversion of ``theta -> nonzero_prob`` by bisection.

    The map is strictly increasing in theta for both families, so a sign
    change over the bracket pins the root.  Kept as a family-agnostic
    fallback and as an independent cross-check of the closed forms.
    """
    if not 0.0 < q_hat < 1.0:
        raise ValueError("q_hat must lie strictly between 0 and 1")

    def g(theta):
        return RenewalModel(family, theta).nonzero_prob(delta) - q_hat

    lo, hi = bracket
    glo, ghi = g(lo), g(hi)
    if glo > 0 or ghi < 0:
        raise ValueError(f"no sign change over bracket {bracket} for q_hat={q_hat}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clamp_theta(theta: float, box: tuple[float, float] = DEFAULT_THETA_BOX) -> float:
    """Clamp an estimated parameter to the compact box, warning on clips."""
    lo, hi = box
    if theta < lo or theta > hi:
        logger.warning("estimated parameter %.6g clamped to [%g, %g]", theta, lo, hi)
        return min(max(theta, lo), hi)
    return theta


# -- jump mixture -----------------------------------------------------------


@dataclass(frozen=True)
class UniformComponent:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("uniform component needs lo < hi")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def ppf(self, u):
        return self.lo + np.asarray(u, dtype=float) * (self.hi - self.lo)


@dataclass(frozen=True)
class LaplaceComponent:
    loc: float
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("laplace scale must be positive")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-np.abs(x - self.loc) / self.scale) / (2.0 * self.scale)

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        centred = u - 0.5
        return self.loc - self.scale * np.sign(centred) * np.log1p(-2.0 * np.abs(centred))


@dataclass(frozen=True)
class JumpMixture:
    """Jump-size density: a weighted mixture of primitive components."""

    components: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise ValueError("components and weights must be nonempty and aligned")
        if any(w < 0 or w > 1 for w in self.weights):
            raise ValueError("weights must lie in [0, 1]")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("mixture weights must sum to 1")

    @classmethod
    def from_specs(cls, specs) -> "JumpMixture":
        """Build from a list of dicts such as
        ``{"kind": "uniform", "lo": -2, "hi": 2, "weight": 0.5}`` or
        ``{"kind": "laplace", "loc": 1.0, "scale": 0.5, "weight": 0.5}``.
        """
        comps, weights = [], []
        for spec in specs:
            kind = spec.get("kind")
            if kind == "uniform":
                comps.append(UniformComponent(float(spec["lo"]), float(spec["hi"])))
            elif kind == "laplace":
                comps.append(LaplaceComponent(float(spec["loc"]), float(spec["scale"])))
            else:
                raise ValueError(f"unknown jump component kind {kind!r}")
            weights.append(float(spec["weight"]))
        return cls(tuple(comps), tuple(weights))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for comp, w in zip(self.components, self.weights):
            out = out + w * comp.pdf(x)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw ``n`` jump sizes: component choice then inverse-CDF draw."""
        if n == 0:
            return np.empty(0)
        choice = rng.random(n)
        u = rng.random(n)
        out = np.empty(n)
        edges = np.cumsum(self.weights)
        lo = 0.0
        for comp, hi in zip(self.components, edges):
            mask = (choice >= lo) & (choice < hi)
            out[mask] = comp.ppf(u[mask])
            lo = hi
        out[choice >= edges[-1]] = self.components[-1].ppf(u[choice >= edges[-1]])
        return out
