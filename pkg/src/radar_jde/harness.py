"""
Monte Carlo campaigns over independent snapshots.

Every snapshot index owns its own random substreams, derived from
(master seed, index, purpose), so results do not depend on how the indices
are scheduled. Matched filtering is done in fixed-size, index-aligned
batches: a given snapshot always meets the same matrix product shape, which
keeps the BLAS rounding identical across worker counts and run lengths.
Sums are exactly rounded (``math.fsum``), so reductions are order-free.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jdeers
from .jdeers import Rule
from .measures import (
    TWO_PI_E,
    InfoReport,
    _log_density_entropy,
    info_report,
    snapshot_entropy,
    snapshot_information,
    std_err,
)
from .posterior import DelayGrid, field_from_bessel_terms, log_bessel_terms, prior_log_density
from .signal_model import PreconditionError, SystemConfig, draw_truth, sinc_matrix, synthesize_snapshot

BATCH_SIZE = 64

_CHANNEL, _SAP_STREAM, _CASCADED_STREAM = 0, 1, 2
_RULE_STREAM = {Rule.SAP: _SAP_STREAM, Rule.CASCADED: _CASCADED_STREAM}


def substream(seed: int, index: int, purpose: int) -> np.random.Generator:
    """Independent generator for one (snapshot index, purpose) pair."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index, purpose)))


def snr_db_to_linear(snr_db: float) -> float:
    """rho^2 = 10^(dB/10); -inf dB maps to exactly 0."""
    if snr_db == -math.inf:
        return 0.0
    return 10.0 ** (snr_db / 10.0)


def snr_linear_to_db(snr: float) -> float:
    return -math.inf if snr == 0 else 10.0 * math.log10(snr)


_RECORD_FIELDS = ("truth_v", "truth_x", "p_present", "h_detect", "h_estimate", "info_detect", "info_estimate")
_RULE_FIELDS = ("v_hat", "x_hat", "log_post", "detect_ratio", "estimate_ratio")


def _simulate_batch(config: SystemConfig, rules: tuple[Rule, ...], start: int, stop: int) -> dict[str, np.ndarray]:
    grid = DelayGrid.for_config(config)
    prior_entropy = _log_density_entropy(prior_log_density(grid), grid)
    count = stop - start
    samples = np.zeros((BATCH_SIZE, config.n_samples), dtype=complex)
    truths = []
    for row, index in enumerate(range(start, stop)):
        stream = substream(config.seed, index, _CHANNEL)
        truth = draw_truth(config, stream)
        samples[row] = synthesize_snapshot(config, truth, stream).samples
        truths.append(truth)

    u = sinc_matrix(config, grid.points)
    stacked = np.vstack([samples.real, samples.imag]) @ u.T
    magnitude = np.hypot(stacked[:BATCH_SIZE], stacked[BATCH_SIZE:])
    log_terms = log_bessel_terms(magnitude[:count], config)

    out = {name: np.empty(count) for name in _RECORD_FIELDS}
    for rule in rules:
        for name in _RULE_FIELDS:
            out[f"{rule.value}.{name}"] = np.empty(count)

    for row, index in enumerate(range(start, stop)):
        posterior = field_from_bessel_terms(log_terms[row], config, grid)
        breakdown = snapshot_entropy(posterior)
        d_detect, d_estimate = snapshot_information(posterior, breakdown, prior_entropy)
        out["truth_v"][row] = truths[row].present
        out["truth_x"][row] = truths[row].delay
        out["p_present"][row] = posterior.p_present
        out["h_detect"][row] = breakdown.h_detect
        out["h_estimate"][row] = breakdown.h_estimate
        out["info_detect"][row] = d_detect
        out["info_estimate"][row] = d_estimate
        for rule in rules:
            stream = substream(config.seed, index, _RULE_STREAM[rule]) if rule in _RULE_STREAM else None
            d = jdeers.decide(rule, posterior, stream)
            prefix = rule.value + "."
            out[prefix + "v_hat"][row] = d.estimate.present
            out[prefix + "x_hat"][row] = d.estimate.delay
            out[prefix + "log_post"][row] = d.log_post
            out[prefix + "detect_ratio"][row] = d.detect_log_ratio
            out[prefix + "estimate_ratio"][row] = d.estimate_log_ratio
    return out


def _batch_job(args):
    return _simulate_batch(*args)


def simulate(
    config: SystemConfig,
    m: int,
    rules: Iterable[Rule] = (),
    workers: int = 1,
) -> dict[str, np.ndarray]:
    """Per-snapshot records for indices 0 .. m-1, concatenated in index order."""
    rules = tuple(Rule(r) for r in rules)
    jobs = [(config, rules, s, min(s + BATCH_SIZE, m)) for s in range(0, m, BATCH_SIZE)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_batch_job, jobs))
    else:
        parts = [_simulate_batch(*job) for job in jobs]
    return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}


@dataclass(frozen=True)
class EmpiricalStats:
    """Empirical measures of one decision rule over M snapshots (bits).

    Holds the per-snapshot scores; the sums are exactly rounded so merging
    is associative and independent of order.
    """

    neg_log_post: np.ndarray = field(repr=False)
    detect_ratio: np.ndarray = field(repr=False)
    estimate_ratio: np.ndarray = field(repr=False)

    @property
    def m(self) -> int:
        return int(self.neg_log_post.size)

    @property
    def log_ratio(self) -> np.ndarray:
        return self.detect_ratio + self.estimate_ratio

    @property
    def sum_neg_log_post(self) -> float:
        return math.fsum(self.neg_log_post)

    @property
    def sum_log_ratio(self) -> float:
        return math.fsum(self.log_ratio)

    @property
    def sum_detect_ratio(self) -> float:
        return math.fsum(self.detect_ratio)

    @property
    def sum_estimate_ratio(self) -> float:
        return math.fsum(self.estimate_ratio)

    @property
    def entropy(self) -> float:
        return self.sum_neg_log_post / self.m

    @property
    def entropy_error(self) -> float:
        return 2.0 ** (2.0 * self.entropy) / TWO_PI_E

    @property
    def entropy_deviation(self) -> float:
        return 2.0**self.entropy / math.sqrt(TWO_PI_E)

    @property
    def information(self) -> float:
        return self.sum_log_ratio / self.m

    @property
    def detect_information(self) -> float:
        return self.sum_detect_ratio / self.m

    @property
    def estimate_information(self) -> float:
        return self.sum_estimate_ratio / self.m

    @property
    def std_err(self) -> float:
        return std_err(self.log_ratio)

    def merge(self, other: "EmpiricalStats") -> "EmpiricalStats":
        return EmpiricalStats(
            np.concatenate([self.neg_log_post, other.neg_log_post]),
            np.concatenate([self.detect_ratio, other.detect_ratio]),
            np.concatenate([self.estimate_ratio, other.estimate_ratio]),
        )

    def prefix(self, m: int) -> "EmpiricalStats":
        return EmpiricalStats(self.neg_log_post[:m], self.detect_ratio[:m], self.estimate_ratio[:m])


@dataclass(frozen=True)
class Checkpoint:
    m: int
    information: float
    entropy_deviation: float


@dataclass(frozen=True)
class CampaignResult:
    config: SystemConfig
    m: int
    rules: tuple[Rule, ...]
    checkpoints: tuple[int, ...]
    records: dict = field(repr=False)

    def report(self, m: int | None = None) -> InfoReport:
        """Theoretical measures estimated on the first ``m`` snapshots."""
        m = self.m if m is None else m
        r = {k: v[:m] for k, v in self.records.items()}
        grid = DelayGrid.for_config(self.config)
        prior_entropy = _log_density_entropy(prior_log_density(grid), grid)
        return info_report(
            r["info_detect"], r["info_estimate"], r["h_detect"], r["h_estimate"],
            self.config.prior_present, prior_entropy,
        )

    @property
    def theoretical(self) -> InfoReport:
        return self.report()

    def stats(self, rule: Rule, m: int | None = None) -> EmpiricalStats:
        rule = Rule(rule)
        if rule not in self.rules:
            raise KeyError(f"rule {rule.value} was not run in this campaign")
        m = self.m if m is None else m
        p = rule.value + "."
        return EmpiricalStats(
            -self.records[p + "log_post"][:m],
            self.records[p + "detect_ratio"][:m],
            self.records[p + "estimate_ratio"][:m],
        )

    @property
    def per_rule(self) -> dict[Rule, EmpiricalStats]:
        return {rule: self.stats(rule) for rule in self.rules}

    def decisions(self, rule: Rule, m: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(v_hat, x_hat) of a rule over the first ``m`` snapshots."""
        m = self.m if m is None else m
        p = Rule(rule).value + "."
        return self.records[p + "v_hat"][:m], self.records[p + "x_hat"][:m]

    @property
    def series(self) -> list[Checkpoint]:
        """(M, I^(M), sigma^(M)) of the SAP rule (or the first rule run)."""
        rule = Rule.SAP if Rule.SAP in self.rules else self.rules[0]
        out = []
        for m in self.checkpoints:
            s = self.stats(rule, m)
            out.append(Checkpoint(m, s.information, s.entropy_deviation))
        return out


def run_campaign(
    config: SystemConfig,
    m: int,
    rules: Iterable[Rule] = (Rule.SAP, Rule.CASCADED, Rule.MAP),
    checkpoints: Sequence[int] | None = None,
    workers: int = 1,
) -> CampaignResult:
    """Simulate ``m`` snapshots and apply every rule to each posterior."""
    rules = tuple(dict.fromkeys(Rule(r) for r in rules))
    if not rules:
        raise PreconditionError("at least one rule is required")
    if m < 1:
        raise PreconditionError("m must be positive")
    checkpoints = tuple(sorted(set(checkpoints))) if checkpoints else (m,)
    if checkpoints[0] < 1 or checkpoints[-1] > m:
        raise PreconditionError(f"checkpoints must lie in [1, m={m}], got {checkpoints}")
    records = simulate(config, m, rules, workers)
    return CampaignResult(config, m, rules, checkpoints, records)


def snr_sweep(
    base: SystemConfig,
    snr_db_list: Sequence[float],
    m: int,
    rules: Iterable[Rule] = (Rule.SAP, Rule.CASCADED),
    checkpoints: Sequence[int] | None = None,
    workers: int = 1,
) -> list[CampaignResult]:
    """One campaign per SNR (dB; -inf means rho^2 = 0), all on the master seed.

    Sharing the seed gives every SNR the same truths, phases and noise, so
    differences between sweep points are not masked by sampling noise.
    """
    if not snr_db_list:
        raise PreconditionError("snr_db_list must not be empty")
    if any(b <= a for a, b in zip(snr_db_list, snr_db_list[1:])):
        raise PreconditionError("snr_db_list must be strictly ascending")
    return [
        run_campaign(base.replace(snr=snr_db_to_linear(db)), m, rules, checkpoints, workers)
        for db in snr_db_list
    ]


def plugin_information(decided, actual) -> tuple[float, float, int]:
    """Plug-in mutual information (bits) between two discrete sequences.

    Returns (estimate, delta-method standard error, degrees of freedom),
    where the degrees of freedom count (rows - 1)(cols - 1) over observed
    symbols.
    """
    decided = np.asarray(decided).astype(int)
    actual = np.asarray(actual).astype(int)
    n = decided.size
    a_vals, a_idx = np.unique(decided, return_inverse=True)
    b_vals, b_idx = np.unique(actual, return_inverse=True)
    table = np.zeros((a_vals.size, b_vals.size))
    np.add.at(table, (a_idx, b_idx), 1.0)
    p = table / n
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.where(p > 0, np.log2(p / (pa * pb)), 0.0)
    mi = max(math.fsum((p * pmi).ravel()), 0.0)
    second = math.fsum((p * pmi * pmi).ravel())
    se = math.sqrt(max(second - mi * mi, 0.0) / n)
    dof = (a_vals.size - 1) * (b_vals.size - 1)
    return mi, se, dof


@dataclass(frozen=True)
class JointVerdict:
    passed: bool
    achievability_passed: bool
    converse_passed: bool
    i_joint: float
    i_detect: float
    i_emp_sap: float
    i_emp_map: float
    achievability_deviation: float
    achievability_tolerance: float
    detection_plugin_information: float
    converse_tolerance: float
    m: int

    @property
    def achievability_margin(self) -> float:
        return self.achievability_tolerance - self.achievability_deviation

    @property
    def converse_margin(self) -> float:
        return self.i_detect + self.converse_tolerance - self.detection_plugin_information

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["achievability_margin"] = self.achievability_margin
        out["converse_margin"] = self.converse_margin
        return out


def converse_check(v_hat, v_true, i_detect: float) -> tuple[bool, float, float]:
    """Decision-truth information of the detection stage against I(Y; V).

    The plug-in estimate is Miller-Madow corrected; the tolerance combines
    its delta-method standard error with the spread of the null
    chi-square law, so an uninformative detector is not flagged by bias.
    """
    mi, se, dof = plugin_information(v_hat, v_true)
    n = len(v_hat)
    scale = 2.0 * n * math.log(2.0)
    corrected = mi - dof / scale
    tolerance = 3.0 * math.hypot(se, math.sqrt(2.0 * dof) / scale)
    return corrected <= i_detect + tolerance, mi, tolerance


def verify_joint_theorem(config: SystemConfig, m: int, workers: int = 1, result: CampaignResult | None = None) -> JointVerdict:
    """Achievability of I(Y; VX) by the SAP rule, plus the detection converse.

    MAP's empirical information is reported but never judged.
    """
    if m < 1000:
        raise PreconditionError("verification needs m >= 1000")
    if result is None:
        result = run_campaign(config, m, rules=(Rule.SAP, Rule.MAP), workers=workers)
    theory = result.report(m)
    sap = result.stats(Rule.SAP, m)
    deviation = abs(sap.information - theory.i_joint)
    tolerance = 3.0 * (sap.std_err + theory.mc_std_err)
    v_hat, _ = result.decisions(Rule.SAP, m)
    converse_ok, mi, converse_tol = converse_check(v_hat, result.records["truth_v"][:m], theory.i_detect)
    achievable = deviation <= tolerance
    map_info = result.stats(Rule.MAP, m).information if Rule.MAP in result.rules else math.nan
    return JointVerdict(
        passed=achievable and converse_ok,
        achievability_passed=achievable,
        converse_passed=converse_ok,
        i_joint=theory.i_joint,
        i_detect=theory.i_detect,
        i_emp_sap=sap.information,
        i_emp_map=map_info,
        achievability_deviation=deviation,
        achievability_tolerance=tolerance,
        detection_plugin_information=mi,
        converse_tolerance=converse_tol,
        m=m,
    )


@dataclass(frozen=True)
class CascadedVerdict:
    passed: bool
    i_joint: float
    i_detect: float
    i_estimate: float
    i_emp_detect: float
    i_emp_estimate: float
    deviation: float
    tolerance: float
    estimator_runs: int
    m: int

    @property
    def margin(self) -> float:
        return self.tolerance - self.deviation

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["margin"] = self.margin
        return out


def verify_cascaded_theorem(config: SystemConfig, m: int, workers: int = 1, result: CampaignResult | None = None) -> CascadedVerdict:
    """Detection plus estimation information of the cascaded rule against I(Y; VX).

    The estimation term is averaged over all M snapshots, so the fraction of
    declared-present snapshots supplies the pi(1) weight.
    """
    if m < 1000:
        raise PreconditionError("verification needs m >= 1000")
    if result is None:
        result = run_campaign(config, m, rules=(Rule.CASCADED,), workers=workers)
    theory = result.report(m)
    stats = result.stats(Rule.CASCADED, m)
    v_hat, _ = result.decisions(Rule.CASCADED, m)
    i_d = stats.detect_information
    i_e = math.fsum(stats.estimate_ratio[v_hat == 1]) / m
    deviation = abs(i_d + i_e - theory.i_joint)
    tolerance = 3.0 * (stats.std_err + theory.mc_std_err)
    return CascadedVerdict(
        passed=deviation <= tolerance,
        i_joint=theory.i_joint,
        i_detect=theory.i_detect,
        i_estimate=theory.i_estimate,
        i_emp_detect=i_d,
        i_emp_estimate=i_e,
        deviation=deviation,
        tolerance=tolerance,
        estimator_runs=int(np.sum(v_hat == 1)),
        m=m,
    )
