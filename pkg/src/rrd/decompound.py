"""Decompounding: undoing the multi-jump contamination of increments.

Conditional on being nonzero, a step-``delta`` increment is distributed as a
count-weighted mixture of self-convolutions of the jump density.  This
module computes the count weights by quadrature, inverts the compounding
map both as a grid fixed-point iteration and as a truncated power-series
inverse, and assembles the plug-in estimators built from those pieces.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .model import DEFAULT_THETA_BOX, RenewalModel, clamp_theta, invert_q
from .simulate import IncrementSeries, SamplePath, block_sums, nonzero_increments
from .wavelet import DensityEstimate, WaveletConfig, density_estimate

logger = logging.getLogger(__name__)

#: Default cap on the L1 norm of fixed-point iterates; iterating past it is
#: treated as a contraction failure.
DEFAULT_L1_BOUND = 1.645


class InsufficientDataError(ValueError):
    """A series or path does not carry enough usable observations."""


class ContractionError(RuntimeError):
    """Fixed-point iterates left the admissible ball instead of converging."""


# -- grid densities ----------------------------------------------------------


@dataclass(frozen=True)
class GridDensity:
    """A function sampled on a uniform grid ``start + mesh*arange(n)``.

    Lengths are powers of two so convolutions run through the FFT, and the
    grid must contain zero at a node so self-convolutions land back on it.
    """

    start: float
    mesh: float
    values: np.ndarray

    def __post_init__(self):
        n = len(self.values)
        if n < 2 or n & (n - 1):
            raise ValueError("grid length must be a power of two")
        if self.mesh <= 0:
            raise ValueError("mesh must be positive")

    @property
    def n(self) -> int:
        return len(self.values)

    def grid(self) -> np.ndarray:
        return self.start + self.mesh * np.arange(self.n)

    def integral(self) -> float:
        return float(self.mesh * self.values.sum())

    def l1_norm(self) -> float:
        return float(self.mesh * np.abs(self.values).sum())

    def with_values(self, values: np.ndarray) -> "GridDensity":
        return GridDensity(self.start, self.mesh, values)

    @classmethod
    def from_pdf(cls, pdf, half_width: float, n: int) -> "GridDensity":
        """Sample a callable density on a symmetric grid [-half_width, half_width)."""
        mesh = 2.0 * half_width / n
        start = -half_width
        x = start + mesh * np.arange(n)
        return cls(start, mesh, np.asarray(pdf(x), dtype=float))


def grid_convolve(a: GridDensity, b: GridDensity) -> GridDensity:
    """Convolution of two grid densities, windowed back onto their grid.

    The FFT convolution is zero-padded (no wraparound); mass that falls
    outside the grid window is dropped, so callers must choose grids wide
    enough for the leak to be negligible.
    """
    if a.n != b.n or a.mesh != b.mesh or a.start != b.start:
        raise ValueError("operands must share one grid")
    offset = -a.start / a.mesh
    k = round(offset)
    if abs(offset - k) > 1e-9:
        raise ValueError("grid must contain zero at a node")
    full = fftconvolve(a.values, b.values) * a.mesh
    out = np.zeros(a.n)
    lo = max(k, 0)
    hi = min(k + a.n, len(full))
    if lo < hi:
        out[lo - k : hi - k] = full[lo:hi]
    return a.with_values(out)


def apply_compounding(g: GridDensity, p, n_terms: int | None = None) -> GridDensity:
    """Count-weighted sum of self-convolutions: p[0]*g + p[1]*g*g + ...

    The output is not renormalized; convolution mass is multiplicative, so
    the integral of the result should match sum(p[m-1] * integral(g)**m) up
    to the grid-truncation leak.
    """
    p = np.asarray(p, dtype=float)
    m_max = len(p) if n_terms is None else min(n_terms, len(p))
    if m_max < 1:
        raise ValueError("need at least one count weight")
    power = g
    out = p[0] * power.values
    for m in range(2, m_max + 1):
        power = grid_convolve(power, g)
        out = out + p[m - 1] * power.values
    return g.with_values(out)


def fixed_point_inverse(
    p_in: GridDensity,
    p,
    iterations: int,
    l1_bound: float = DEFAULT_L1_BOUND,
) -> GridDensity:
    """Iterate h -> p_in + h - compounding(h) from h = p_in.

    The jump density is the fixed point of that map, and for small steps
    the map contracts, so the iterates approach it geometrically.  Zero
    iterations return the input.  Iterates whose L1 norm passes
    ``l1_bound`` have left the admissible ball; that is reported as a
    contraction failure.
    """
    if iterations < 0:
        raise ValueError("iterations must be nonnegative")
    h = p_in
    for step in range(iterations):
        compounded = apply_compounding(h, p)
        h = p_in.with_values(p_in.values + h.values - compounded.values)
        if h.l1_norm() > l1_bound:
            raise ContractionError(
                f"iterate {step + 1} has L1 norm {h.l1_norm():.4g} > bound {l1_bound}"
            )
    return h


def contraction_factor(
    density_at_zero: float, delta: float, l1_bound: float = DEFAULT_L1_BOUND
) -> float:
    """Theoretical contraction constant 2*B*(exp(2*t0*delta)-1) + 2*t0*delta
    of the inversion map, where t0 is the interarrival density at zero and
    B bounds the L1 norm of the iterates.
    """
    a = 2.0 * density_at_zero * delta
    return 2.0 * l1_bound * math.expm1(a) + a


# -- count probabilities -----------------------------------------------------


def truncation_order(
    density_at_zero: float, delta: float, tol: float = 1e-12, cap: int = 64
) -> int:
    """Smallest order M whose envelope tail sum_{m>M} 2*(2*t0*delta)^(m-1)/m!
    drops below ``tol``; capped.
    """
    a = 2.0 * density_at_zero * delta
    terms = [(2, a)]  # 2*a^(m-1)/m! at m=2
    while terms[-1][1] > tol * 1e-6 and terms[-1][0] < cap + 400:
        m, term = terms[-1]
        terms.append((m + 1, term * a / (m + 1)))
    order = 1
    suffix = 0.0
    for m, term in reversed(terms):
        suffix += term  # tail of an order-(m-1) truncation
        if suffix >= tol:
            order = m
            break
        order = m - 1
    return max(1, min(order, cap))


def count_probs(model: RenewalModel, delta: float, m_max: int) -> np.ndarray:
    """Conditional window-count probabilities p_m, m = 1..m_max.

    p_m is the chance of exactly m jumps in a stationary window of length
    ``delta`` given at least one.  Computed from arrival-time CDFs: the time
    of the m-th jump is a stationary-delay gap plus m-1 plain gaps, so its
    CDF at delta comes from repeated convolution on a trapezoid grid over
    [0, delta] with step delta/quadrature_steps.

    Raises if the probability mass past ``m_max`` exceeds 1e-9 (order too
    small for this step).
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    steps = model.quadrature_steps
    h = delta / steps
    x = np.linspace(0.0, delta, steps + 1)
    gap_pdf = np.asarray(model.interarrival_pdf(x), dtype=float)
    u = np.asarray(model.stationary_delay_pdf(x), dtype=float)

    def conv_trap(a, b):
        out = fftconvolve(a, b)[: steps + 1]
        out = out - 0.5 * (a[0] * b + b[0] * a)
        return out * h

    cdf = np.empty(m_max + 1)
    cdf[0] = np.trapezoid(u, dx=h)
    for m in range(1, m_max + 1):
        u = conv_trap(u, gap_pdf)
        cdf[m] = np.trapezoid(u, dx=h)

    # cdf[0] is the quadrature value of the nonzero-window probability;
    # normalizing by it (rather than the closed form) telescopes the sum of
    # the p_m to exactly 1 - tail.
    q = cdf[0]
    p = (cdf[:-1] - cdf[1:]) / q
    p = np.where((p < 0.0) & (p > -1e-12), 0.0, p)
    if (p < 0.0).any():
        raise RuntimeError("count-probability quadrature produced negative mass")
    tail = cdf[m_max] / q
    if tail > 1e-9:
        raise ValueError(
            f"count mass {tail:.3g} beyond order {m_max}; increase the order"
        )
    return p


# -- power-series inverse ----------------------------------------------------


def _truncated_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # Coefficient arrays are indexed by degree-1 (no constant term); the
    # product keeps degrees up to the common truncation length.
    deg = len(a)
    full = np.convolve(a, b)
    out = np.zeros(deg)
    out[1:] = full[: deg - 1]
    return out


def _compose_counts(p: np.ndarray, a: np.ndarray) -> np.ndarray:
    # sum_k p_k * A(z)^k, truncated to len(a) coefficients.
    deg = len(a)
    power = a.copy()
    total = p[0] * power
    for k in range(2, deg + 1):
        power = _truncated_product(power, a)
        total = total + p[k - 1] * power
    return total


def correction_coeffs(p, order: int) -> np.ndarray:
    """Coefficients l_1..l_{order+1} of the truncated inverse of the
    compounding map.

    One application of the inversion map to its own starting point expands
    to (2 - p_1) z - p_2 z^2 - ... in powers of the compounded density;
    further applications substitute the running polynomial into the count
    series, truncating at degree order+1 throughout (higher degrees cannot
    feed back into lower ones).  Order zero is the identity.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return np.array([1.0])
    p = np.asarray(p, dtype=float)
    if len(p) < order + 1:
        raise ValueError(f"need count probabilities up to order {order + 1}")
    deg = order + 1
    pk = p[:deg]
    coeff = np.zeros(deg)
    coeff[0] = 2.0 - pk[0]
    coeff[1:] = -pk[1:]
    unit = np.zeros(deg)
    unit[0] = 1.0
    for _ in range(order - 1):
        coeff = unit + coeff - _compose_counts(pk, coeff)
    return coeff


@dataclass(frozen=True)
class CorrectionCoeffs:
    """Count probabilities and inverse coefficients for one (delta, order)."""

    delta: float
    order: int
    p: np.ndarray
    l: np.ndarray

    @property
    def truncation(self) -> int:
        return len(self.p)


def build_correction(model: RenewalModel, delta: float, order: int) -> CorrectionCoeffs:
    """Assemble count probabilities (auto-truncated) and inverse coefficients."""
    t0 = float(model.interarrival_pdf(0.0))
    m_max = max(truncation_order(t0, delta), order + 1)
    p = count_probs(model, delta, m_max)
    return CorrectionCoeffs(delta, order, p, correction_coeffs(p, order))


# -- estimators ---------------------------------------------------------------


def estimate_theta(
    series: IncrementSeries,
    family: str,
    delta: float,
    theta_box: tuple[float, float] = DEFAULT_THETA_BOX,
) -> float:
    """Interarrival parameter from the empirical nonzero fraction, clamped."""
    n = series.size
    n_nonzero = series.nonzero_count
    if n_nonzero == 0 or n_nonzero == n:
        raise InsufficientDataError(
            f"series with {n_nonzero}/{n} nonzero increments pins no parameter"
        )
    return clamp_theta(invert_q(family, n_nonzero / n, delta), theta_box)


def naive_estimator(
    series: IncrementSeries, cfg: WaveletConfig, horizon: float
) -> DensityEstimate:
    """Threshold estimate treating every nonzero increment as one jump."""
    _, values, n_nonzero = nonzero_increments(series)
    return density_estimate(values, max(n_nonzero, 1), horizon, cfg)


def convolution_power_estimator(
    series: IncrementSeries, m: int, cfg: WaveletConfig, horizon: float
) -> DensityEstimate:
    """Threshold estimate of the m-fold self-convolution of the nonzero
    increment law, built from strided m-fold block sums.
    """
    _, values, n_nonzero = nonzero_increments(series)
    if n_nonzero < m:
        raise InsufficientDataError(
            f"need at least {m} nonzero increments, found {n_nonzero}"
        )
    sums = block_sums(values, m)
    return density_estimate(sums, len(sums), horizon, cfg)


def corrected_estimator(
    series: IncrementSeries,
    family: str,
    delta: float,
    order: int,
    cfg: WaveletConfig,
    horizon: float,
    theta_box: tuple[float, float] = DEFAULT_THETA_BOX,
) -> DensityEstimate:
    """Inverse-weighted combination of convolution-power estimates.

    Order zero coincides with the plain nonzero-increment estimator, so it
    short-circuits there; higher orders estimate the interarrival parameter,
    derive the inverse coefficients at it, and sum the first order+1
    convolution-power estimates with those weights.
    """
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order == 0:
        return naive_estimator(series, cfg, horizon)
    _, _, n_nonzero = nonzero_increments(series)
    if n_nonzero < order + 1:
        raise InsufficientDataError(
            f"order {order} needs {order + 1} nonzero increments, found {n_nonzero}"
        )
    theta = estimate_theta(series, family, delta, theta_box)
    correction = build_correction(RenewalModel(family, theta), delta, order)
    parts = [
        convolution_power_estimator(series, m, cfg, horizon)
        for m in range(1, order + 2)
    ]
    values = np.zeros_like(parts[0].values)
    for weight, part in zip(correction.l, parts):
        values = values + weight * part.values
    return DensityEstimate(
        parts[0].grid_lo,
        parts[0].grid_hi,
        parts[0].mesh,
        values,
        n_samples=n_nonzero,
        degenerate=False,
    )


def oracle_estimator(
    path: SamplePath, cfg: WaveletConfig, horizon: float
) -> DensityEstimate:
    """Threshold estimate from the true jump marks; the benchmark every
    increment-based estimator is compared against.
    """
    if path.jump_count == 0:
        raise InsufficientDataError("path has no jumps")
    if path.jump_count == 1:
        logger.warning("single-jump path: estimate is a spike")
    return density_estimate(path.jump_sizes, path.jump_count, horizon, cfg)
