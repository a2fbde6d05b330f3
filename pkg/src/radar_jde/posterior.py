"""
Gridded joint posterior p(v, x | y) for the single-target channel.

With N0 = 1 and alpha = rho, averaging the likelihood over the unknown phase
gives, up to a constant in y,

    p(v, x | y)  ~  pi(v) pi(x) exp(-v rho^2) I0(2 v rho |u(x)^H y|).

Everything is kept in the log domain. The field stores the detector marginal
log P(v | y) and the two conditional log-densities log p(x | y, v) separately,
so the chain rule p(v, x | y) = P(v | y) p(x | y, v) holds by construction.

The uniform delay prior is discretized with the same trapezoid weights used
for every integral, i.e. pi(x) = 1 / sum(w). When snr = 0 the posterior is
computed through the same arithmetic as the prior and comes out bit-identical
to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import i0e

from .signal_model import PreconditionError, Snapshot, SystemConfig, sinc_matrix

LN2 = np.log(2.0)

# Below this argument ln I0 is summed from its power series; above it
# log(i0e(z)) + z has no cancellation problem.
_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 14


class InvalidInputError(ValueError):
    """Non-finite or otherwise unusable numerical input."""


class DegenerateConditioningError(ValueError):
    """Conditioning on an event of zero probability."""


def log_i0(z):
    """ln I0(z) for z >= 0, without overflow.

    Small arguments use ln(1 + sum_{k>=1} (z^2/4)^k / (k!)^2) via log1p;
    larger ones use the exponentially scaled Bessel function,
    ln I0(z) = ln(i0e(z)) + z.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0) or np.any(np.isnan(z)):
        raise PreconditionError("log_i0 is defined for z >= 0 only")
    out = np.empty_like(z)
    small = z <= _SERIES_CUTOFF
    if np.any(small):
        q = 0.25 * z[small] ** 2
        # Horner on sum_{k=1}^{K} q^k / (k!)^2
        acc = np.zeros_like(q)
        for k in range(_SERIES_TERMS, 0, -1):
            acc = q / (k * k) * (1.0 + acc)
        out[small] = np.log1p(acc)
    big = ~small
    if np.any(big):
        out[big] = np.log(i0e(z[big])) + z[big]
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class DelayGrid:
    """Uniform grid over [-N/2, N/2] with ``oversample`` points per unit delay."""

    points: np.ndarray = field(repr=False)
    spacing: float

    @classmethod
    def for_config(cls, config: SystemConfig) -> "DelayGrid":
        n, l = config.n_samples, config.oversample
        half = n // 2
        # integer-based construction keeps the grid exactly symmetric about 0
        points = np.arange(-half * l, half * l + 1) / l
        return cls(points=points, spacing=1.0 / l)

    @property
    def size(self) -> int:
        return self.points.size

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights (read-only)."""
        w = np.full(self.points.size, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        w.flags.writeable = False
        return w

    @cached_property
    def prior_log_density(self) -> np.ndarray:
        shape = np.zeros(self.size)
        out = shape - _log_normalizer(shape, self.weights)
        out.flags.writeable = False
        return out

    @cached_property
    def prior_cell_log_density(self) -> np.ndarray:
        out = cell_log_density(self.prior_log_density)
        out.flags.writeable = False
        return out

    @property
    def length(self) -> float:
        return float(self.points[-1] - self.points[0])

    def trapezoid(self, values, axis=-1):
        return np.sum(np.asarray(values) * self.weights, axis=axis)


def cell_log_density(log_density: np.ndarray) -> np.ndarray:
    """Log density of each grid cell: log of the mean of its two end values."""
    return np.logaddexp(log_density[..., :-1], log_density[..., 1:]) - LN2


def _log_normalizer(log_shape: np.ndarray, weights: np.ndarray):
    """log of sum_i w_i exp(log_shape_i), along the last axis."""
    peak = np.max(log_shape, axis=-1, keepdims=True)
    total = np.sum(weights * np.exp(log_shape - peak), axis=-1)
    return peak[..., 0] + np.log(total)


def prior_log_density(grid: DelayGrid) -> np.ndarray:
    """Discretized uniform delay prior, evaluated on the grid (natural log)."""
    return grid.prior_log_density


@dataclass(frozen=True)
class PosteriorField:
    """Posterior over (v, x) on a delay grid.

    ``log_detect[v]`` is ln P(v | y) and ``log_cond[v]`` is ln p(x | y, v) on
    the grid; ``log_detect_ratio[v]`` is ln[P(v | y) / pi(v)], kept separately
    because it is exactly zero when y carries no information. Natural logs.
    """

    grid: DelayGrid
    prior_present: float
    log_detect: np.ndarray
    log_detect_ratio: np.ndarray
    log_cond: np.ndarray = field(repr=False)
    p_present: float
    log_norm: float

    @property
    def log_joint(self) -> np.ndarray:
        """ln p(v, x | y), shape (2, grid size)."""
        return self.log_detect[:, None] + self.log_cond

    @property
    def log_prior_detect(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log([1.0 - self.prior_present, self.prior_present])

    def probability(self, v: int) -> float:
        return self.p_present if v == 1 else self.p_absent

    @property
    def p_absent(self) -> float:
        return float((1.0 - self.prior_present) * np.exp(self.log_detect_ratio[0]))

    def total_mass(self) -> float:
        return float(self.grid.trapezoid(np.exp(self.log_joint)).sum())


def log_bessel_terms(mf_magnitude, config: SystemConfig) -> np.ndarray:
    """ln I0(2 rho |u^H y|) for the v = 1 hypothesis."""
    mf_magnitude = np.asarray(mf_magnitude, dtype=float)
    if not np.all(np.isfinite(mf_magnitude)):
        raise InvalidInputError("matched-filter output contains non-finite values")
    return log_i0(2.0 * config.amplitude * mf_magnitude)


def field_from_bessel_terms(log_terms: np.ndarray, config: SystemConfig, grid: DelayGrid) -> PosteriorField:
    """Assemble the posterior from g(x) = ln I0(2 rho |u(x)^H y|) on the grid."""
    w = grid.weights
    log_w_total = np.log(np.sum(w))
    log_z1 = _log_normalizer(log_terms, w)
    log_cond = np.vstack([prior_log_density(grid), log_terms - log_z1])

    # ln J1 = ln[(1/|X|) int exp(-rho^2) I0(...) dx]; J0 = 1.
    log_j1 = -config.snr + (log_z1 - log_w_total)
    pi1 = config.prior_present
    pi0 = 1.0 - pi1
    # ln(pi0 + pi1 J1), evaluated so the exponent never overflows
    if pi0 == 0.0:
        log_den = log_j1
    elif log_j1 <= 0:
        log_den = np.log(pi0 + pi1 * np.exp(log_j1))
    else:
        log_den = log_j1 + np.log(pi1 + pi0 * np.exp(-log_j1))
    ratio = np.array([-log_den, log_j1 - log_den])
    with np.errstate(divide="ignore"):
        log_detect = np.log([pi0, pi1]) + ratio
    p_present = float(pi1 * np.exp(ratio[1]))
    p_present = min(max(p_present, 0.0), 1.0)

    # nu = pi0 + pi1 J1 once the common factors are dropped
    log_norm = float(log_den)
    return PosteriorField(
        grid=grid,
        prior_present=pi1,
        log_detect=log_detect,
        log_detect_ratio=ratio,
        log_cond=log_cond,
        p_present=p_present,
        log_norm=log_norm,
    )


def compute_posterior(snapshot: Snapshot, config: SystemConfig, grid: DelayGrid | None = None) -> PosteriorField:
    """Exact gridded posterior p(v, x | y) of one snapshot."""
    if grid is None:
        grid = DelayGrid.for_config(config)
    if grid.points[0] != -config.half_width or grid.points[-1] != config.half_width:
        raise PreconditionError("grid must span the observation interval [-N/2, N/2]")
    mf = sinc_matrix(config, grid.points) @ snapshot.samples
    return field_from_bessel_terms(log_bessel_terms(np.abs(mf), config), config, grid)


def detector_posterior(field: PosteriorField) -> float:
    """P(v = 1 | y)."""
    return field.p_present


def estimator_posterior(field: PosteriorField, v: int) -> np.ndarray:
    """p(x | y, v) on the grid (linear scale)."""
    if v not in (0, 1):
        raise PreconditionError(f"v must be 0 or 1, got {v}")
    if field.log_detect[v] == -np.inf:
        raise DegenerateConditioningError(f"P(v={v} | y) = 0")
    return np.exp(field.log_cond[v])
