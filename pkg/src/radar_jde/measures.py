"""
Information measures of a joint detection/estimation system, in bits.

The posterior entropy of the mixed discrete/continuous parameter (v, x) is
split as h(VX | y) = H(V | y) + sum_v P(v | y) h(X | y, v). Entropy error and
entropy deviation follow the product forms

    sigma^2(VX|Y) = 2^(2 H(V|Y)) * (1 / 2 pi e) 2^(2 h(X|YV))
    sigma(VX|Y)   = 2^H(V|Y)     * (1 / sqrt(2 pi e)) 2^h(X|YV)

where the 1 / (2 pi e) constant belongs to the continuous factor only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .posterior import LN2, DelayGrid, InvalidInputError, PosteriorField, estimator_posterior
from .signal_model import PreconditionError

TWO_PI_E = 2.0 * np.pi * np.e


def discrete_entropy(p) -> float:
    """Binary entropy -p log2 p - (1-p) log2(1-p), with 0 log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"probability must lie in [0, 1], got {p}")
    return float(-(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)) / LN2)


def distribution_entropy(probs) -> float:
    """Entropy in bits of an arbitrary discrete distribution."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < 0):
        raise PreconditionError("probabilities must be nonnegative")
    return float(-math.fsum(xlogy(probs, probs)) / LN2)


def differential_entropy(density, grid: DelayGrid, tol: float = 1e-6) -> float:
    """-int p log2 p dx by the trapezoid rule on ``grid``."""
    density = np.asarray(density, dtype=float)
    if density.shape != grid.points.shape or np.any(density < 0) or not np.all(np.isfinite(density)):
        raise InvalidInputError("density must be finite, nonnegative and sampled on the grid")
    mass = grid.trapezoid(density)
    if abs(mass - 1.0) > tol:
        raise InvalidInputError(f"density integrates to {mass}, not 1")
    return float(-grid.trapezoid(xlogy(density, density)) / LN2)


def _log_density_entropy(log_density: np.ndarray, grid: DelayGrid) -> float:
    # same quantity as differential_entropy, without exp/log round trips
    p = np.exp(log_density)
    return float(-grid.trapezoid(np.where(p > 0, p * log_density, 0.0)) / LN2)


def entropy_number(h: float) -> float:
    """2^H: the effective number of equiprobable outcomes."""
    return float(2.0**h)


@dataclass(frozen=True)
class EntropyBreakdown:
    """Posterior entropies of one snapshot, in bits."""

    h_detect: float
    h_estimate: float
    h_estimate_present: float
    h_estimate_absent: float

    @property
    def h_joint(self) -> float:
        return self.h_detect + self.h_estimate


@dataclass(frozen=True)
class ErrorDeviation:
    ee_joint: float
    ed_joint: float
    ee_detect: float
    ed_detect: float
    ee_estimate: float
    ed_estimate: float


def snapshot_entropy(field: PosteriorField) -> EntropyBreakdown:
    """H(V|y), sum_v P(v|y) h(X|y,v) and their sum for one posterior field."""
    grid = field.grid
    h_detect = discrete_entropy(field.p_present)
    h_absent = _log_density_entropy(field.log_cond[0], grid)
    h_present = _log_density_entropy(field.log_cond[1], grid)
    h_estimate = 0.0
    if field.log_detect[0] > -np.inf:
        h_estimate += field.p_absent * h_absent
    if field.log_detect[1] > -np.inf:
        h_estimate += field.p_present * h_present
    return EntropyBreakdown(h_detect, h_estimate, h_present, h_absent)


def estimation_density_entropy(field: PosteriorField, v: int) -> float:
    """h(X | y, v) through the public density accessor."""
    return differential_entropy(estimator_posterior(field, v), field.grid)


def entropy_error_deviation(b: EntropyBreakdown) -> ErrorDeviation:
    ee_detect = 2.0 ** (2.0 * b.h_detect)
    ed_detect = 2.0**b.h_detect
    ee_estimate = 2.0 ** (2.0 * b.h_estimate) / TWO_PI_E
    ed_estimate = 2.0**b.h_estimate / math.sqrt(TWO_PI_E)
    return ErrorDeviation(
        ee_joint=ee_detect * ee_estimate,
        ed_joint=ed_detect * ed_estimate,
        ee_detect=ee_detect,
        ed_detect=ed_detect,
        ee_estimate=ee_estimate,
        ed_estimate=ed_estimate,
    )


@dataclass(frozen=True)
class InfoReport:
    """Monte Carlo estimate of the theoretical limits, in bits.

    ``mc_std_err`` is the standard error of ``i_joint``.
    """

    i_joint: float
    i_detect: float
    i_estimate: float
    h_prior_joint: float
    h_detect: float
    h_estimate: float
    ee_joint: float
    ee_detect: float
    ee_estimate: float
    ed_joint: float
    ed_detect: float
    ed_estimate: float
    mc_std_err: float
    n_mc: int

    @property
    def h_joint(self) -> float:
        return self.h_detect + self.h_estimate


def mean(values) -> float:
    """Exactly rounded mean; independent of summation order."""
    values = np.asarray(values, dtype=float)
    return math.fsum(values) / values.size


def std_err(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    centred = values - mean(values)
    return math.sqrt(math.fsum(centred * centred) / (values.size - 1) / values.size)


def info_report(
    info_detect,
    info_estimate,
    h_detect,
    h_estimate,
    prior_present: float,
    prior_estimate_entropy: float,
) -> InfoReport:
    """Reduce per-snapshot information contributions to an :class:`InfoReport`.

    ``info_detect[m] = H(pi) - H(V|y_m)`` and
    ``info_estimate[m] = P(1|y_m) (h(X) - h(X|y_m, 1))``; the v = 0 branch
    contributes nothing because its conditional is the prior.
    """
    info_detect = np.asarray(info_detect, dtype=float)
    info_estimate = np.asarray(info_estimate, dtype=float)
    i_detect = mean(info_detect)
    i_estimate = mean(info_estimate)
    mean_h_detect = mean(h_detect)
    mean_h_estimate = mean(h_estimate)
    ed = entropy_error_deviation(EntropyBreakdown(mean_h_detect, mean_h_estimate, np.nan, np.nan))
    return InfoReport(
        i_joint=i_detect + i_estimate,
        i_detect=i_detect,
        i_estimate=i_estimate,
        h_prior_joint=discrete_entropy(prior_present) + prior_estimate_entropy,
        h_detect=mean_h_detect,
        h_estimate=mean_h_estimate,
        ee_joint=ed.ee_joint,
        ee_detect=ed.ee_detect,
        ee_estimate=ed.ee_estimate,
        ed_joint=ed.ed_joint,
        ed_detect=ed.ed_detect,
        ed_estimate=ed.ed_estimate,
        mc_std_err=std_err(info_detect + info_estimate),
        n_mc=int(info_detect.size),
    )


def snapshot_information(field: PosteriorField, breakdown: EntropyBreakdown, prior_estimate_entropy: float):
    """Per-snapshot (detection, estimation) information contributions in bits."""
    d_detect = discrete_entropy(field.prior_present) - breakdown.h_detect
    d_estimate = field.p_present * (prior_estimate_entropy - breakdown.h_estimate_present)
    return d_detect, d_estimate


def theoretical_info(config, n_mc: int, seed: int | None = None, workers: int = 1) -> InfoReport:
    """Joint, detection and estimation information averaged over ``n_mc`` snapshots."""
    from .harness import CampaignResult, simulate

    if n_mc < 100:
        raise PreconditionError("n_mc must be at least 100")
    if seed is not None:
        config = config.replace(seed=seed)
    records = simulate(config, n_mc, rules=(), workers=workers)
    return CampaignResult(config, n_mc, (), (n_mc,), records).theoretical
