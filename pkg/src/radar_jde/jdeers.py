"""
Joint detector-estimators (JDEers) acting on a posterior field.

Scores are in bits and use the hybrid convention
log2 P(v_hat | y) + log2 p(x_hat | y, v_hat). Sampled decisions treat the
gridded density as piecewise constant: a cell is picked with probability
equal to its trapezoid mass, the delay is uniform inside the cell, and the
score uses that same cell density.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .posterior import LN2, PosteriorField, cell_log_density, prior_log_density
from .signal_model import JointTargetParameter


class Rule(str, enum.Enum):
    MAP = "map"
    SAP = "sap"
    CASCADED = "cascaded"


@dataclass(frozen=True)
class Decision:
    """A decision gamma_hat with its posterior and prior log-scores (bits).

    ``detect_log_ratio`` and ``estimate_log_ratio`` split
    ``log_post - log_prior`` into the detection and estimation stages.
    ``state_probability`` is the posterior probability of the declared state.
    """

    estimate: JointTargetParameter
    log_post: float
    log_prior: float
    detect_log_ratio: float
    estimate_log_ratio: float
    state_probability: float
    rule: Rule

    @property
    def log_ratio(self) -> float:
        return self.detect_log_ratio + self.estimate_log_ratio


def _prior_cell_log_density(field: PosteriorField) -> np.ndarray:
    return field.grid.prior_cell_log_density


def _sample_cell(cell_log: np.ndarray, stream: np.random.Generator) -> int:
    weights = np.exp(cell_log - np.max(cell_log))
    cdf = np.cumsum(weights)
    k = int(np.searchsorted(cdf, stream.random() * cdf[-1], side="right"))
    return min(k, cdf.size - 1)


def _draw_state(field: PosteriorField, stream: np.random.Generator) -> int:
    return int(stream.random() < field.p_present)


def _draw_delay(field: PosteriorField, v: int, stream: np.random.Generator):
    cells = cell_log_density(field.log_cond[v])
    k = _sample_cell(cells, stream)
    x = field.grid.points[k] + field.grid.spacing * stream.random()
    return float(x), k, cells


def _build(field: PosteriorField, v: int, x: float, log_cond_value: float, log_prior_x: float, rule: Rule) -> Decision:
    log_prior_v = field.log_prior_detect[v]
    return Decision(
        estimate=JointTargetParameter(v, x),
        log_post=float((field.log_detect[v] + log_cond_value) / LN2),
        log_prior=float((log_prior_v + log_prior_x) / LN2),
        detect_log_ratio=float(field.log_detect_ratio[v] / LN2),
        estimate_log_ratio=float((log_cond_value - log_prior_x) / LN2),
        state_probability=field.probability(v),
        rule=rule,
    )


def map_decide(field: PosteriorField) -> Decision:
    """argmax over (v, x) of p(v, x | y).

    Ties in v go to absence, ties in x to the smallest grid point. Under
    v_hat = 0 the delay is reported as 0.
    """
    joint = field.log_joint
    best_x = np.argmax(joint, axis=1)  # first occurrence -> smallest x
    peak = joint[np.arange(2), best_x]
    v = 1 if peak[1] > peak[0] else 0
    if v == 0:
        k = int(np.argmin(np.abs(field.grid.points)))
    else:
        k = int(best_x[1])
    x = float(field.grid.points[k])
    prior_x = prior_log_density(field.grid)[k]
    return _build(field, v, x, field.log_cond[v][k], prior_x, Rule.MAP)


def sap_decide(field: PosteriorField, stream: np.random.Generator) -> Decision:
    """Sample (v_hat, x_hat) from p(v, x | y)."""
    v = _draw_state(field, stream)
    x, k, cells = _draw_delay(field, v, stream)
    return _build(field, v, x, cells[k], _prior_cell_log_density(field)[k], Rule.SAP)


def detect_stage(field: PosteriorField, stream: np.random.Generator) -> tuple[int, float]:
    """SAP detector: a sampled state and its posterior probability."""
    v = _draw_state(field, stream)
    return v, field.probability(v)


def estimate_stage(field: PosteriorField, stream: np.random.Generator) -> tuple[float, int, np.ndarray]:
    """SAP estimator: x_hat drawn from p(x | y, v = 1)."""
    return _draw_delay(field, 1, stream)


def cascaded_decide(field: PosteriorField, stream: np.random.Generator, counter: Counter | None = None) -> Decision:
    """SAP detector followed by a SAP estimator that only runs on v_hat = 1.

    With v_hat = 0 the delay is drawn from the uniform prior so the decision
    stays total; that draw carries zero estimation information. ``counter``,
    if given, counts estimator runs under the key ``"estimator"``.
    """
    v, _ = detect_stage(field, stream)
    prior_cells = _prior_cell_log_density(field)
    if v == 1:
        if counter is not None:
            counter["estimator"] += 1
        x, k, cells = estimate_stage(field, stream)
        return _build(field, 1, x, cells[k], prior_cells[k], Rule.CASCADED)
    k = _sample_cell(prior_cells, stream)
    x = float(field.grid.points[k] + field.grid.spacing * stream.random())
    return _build(field, 0, x, prior_cells[k], prior_cells[k], Rule.CASCADED)


def decide(rule: Rule, field: PosteriorField, stream: np.random.Generator | None = None) -> Decision:
    rule = Rule(rule)
    if rule is Rule.MAP:
        return map_decide(field)
    if rule is Rule.SAP:
        return sap_decide(field, stream)
    return cascaded_decide(field, stream)
