from collections import Counter

import numpy as np
import pytest

from radar_jde.jdeers import Rule, cascaded_decide, decide, map_decide, sap_decide
from radar_jde.posterior import DelayGrid, cell_log_density, compute_posterior, field_from_bessel_terms
from radar_jde.signal_model import JointTargetParameter, SystemConfig, synthesize_snapshot


def make_field(cfg, present=1, delay=10.3, seed=1, phase=None):
    snap = synthesize_snapshot(cfg, JointTargetParameter(present, delay), np.random.default_rng(seed), phase=phase)
    return compute_posterior(snap, cfg)


def field_bins(field, bins=64):
    """Exact (v, delay-bin) probabilities of the piecewise-constant field."""
    out = np.zeros((2, bins))
    for v in (0, 1):
        mass = np.exp(cell_log_density(field.log_cond[v])) * field.grid.spacing
        out[v] = field.probability(v) * mass.reshape(bins, -1).sum(axis=1)
    return out


def draw_bins(rule, field, n, seed, bins=64):
    rng = np.random.default_rng(seed)
    half = field.grid.points[-1]
    width = 2 * half / bins
    counts = np.zeros((2, bins))
    for _ in range(n):
        d = rule(field, rng)
        counts[d.estimate.present, min(int((d.estimate.delay + half) // width), bins - 1)] += 1
    return counts / n


def tv(p, q):
    return 0.5 * np.abs(p - q).sum()


@pytest.fixture(scope="module")
def field4():
    return make_field(SystemConfig(snr=4.0))


class TestMap:
    def test_zero_snr_prefers_absence(self):
        d = map_decide(make_field(SystemConfig(snr=0.0, prior_present=0.4)))
        assert (d.estimate.present, d.estimate.delay) == (0, 0.0)

    def test_noiseless_peak(self):
        cfg = SystemConfig(snr=9.0, noiseless=True)
        d = map_decide(make_field(cfg, 1, 5.0, phase=1.0))
        assert (d.estimate.present, d.estimate.delay) == (1, 5.0)

    def test_tie_takes_smallest_delay(self):
        cfg = SystemConfig(snr=4.0)
        grid = DelayGrid.for_config(cfg)
        terms = np.zeros(grid.size)
        terms[np.flatnonzero(np.abs(grid.points) == 2.0)] = 12.0
        d = map_decide(field_from_bessel_terms(terms, cfg, grid))
        assert (d.estimate.present, d.estimate.delay) == (1, -2.0)

    def test_dominates_sampled_decisions(self, field4):
        rng = np.random.default_rng(0)
        best = map_decide(field4).log_post
        assert all(sap_decide(field4, rng).log_post <= best for _ in range(2000))

    def test_pure_function(self, field4):
        assert map_decide(field4) == map_decide(field4)


class TestSap:
    def test_zero_snr_follows_prior(self):
        field = make_field(SystemConfig(snr=0.0, prior_present=0.3))
        rng = np.random.default_rng(4)
        draws = [sap_decide(field, rng) for _ in range(100_000)]
        frac = np.mean([d.estimate.present for d in draws])
        assert frac == pytest.approx(0.3, abs=0.005)
        assert all(d.log_ratio == 0.0 for d in draws[:1000])

    def test_matches_field_on_bins(self, field4):
        emp = draw_bins(sap_decide, field4, 100_000, seed=1)
        exact = field_bins(field4)
        conditional_emp = emp[1] / emp[1].sum()
        conditional_exact = exact[1] / exact[1].sum()
        assert tv(conditional_emp, conditional_exact) < 0.02
        assert tv(emp, exact) < 0.02

    def test_spike_is_always_hit(self):
        cfg = SystemConfig(snr=4.0, prior_present=1.0)
        grid = DelayGrid.for_config(cfg)
        terms = np.zeros(grid.size)
        k = 1000
        terms[k] = 900.0
        field = field_from_bessel_terms(terms, cfg, grid)
        rng = np.random.default_rng(2)
        for _ in range(500):
            d = sap_decide(field, rng)
            # a point spike feeds the two cells that share it
            assert d.estimate.present == 1
            assert abs(d.estimate.delay - grid.points[k]) <= grid.spacing

    def test_scores_are_consistent(self, field4):
        rng = np.random.default_rng(8)
        for _ in range(200):
            d = sap_decide(field4, rng)
            assert d.log_post - d.log_prior == pytest.approx(d.log_ratio, abs=1e-12)
            assert -64 <= d.estimate.delay <= 64
            assert np.isfinite(d.log_post)

    def test_determinism(self, field4):
        a = sap_decide(field4, np.random.default_rng(3))
        b = sap_decide(field4, np.random.default_rng(3))
        assert a == b


class TestCascaded:
    def test_estimator_skipped_when_absent(self):
        field = make_field(SystemConfig(snr=0.0, prior_present=0.5))
        counter = Counter()
        rng = np.random.default_rng(6)
        decisions = [cascaded_decide(field, rng, counter) for _ in range(10_000)]
        declared = sum(d.estimate.present for d in decisions)
        assert counter["estimator"] == declared
        assert declared / 10_000 == pytest.approx(0.5, abs=0.01)

    def test_absent_path_never_calls_estimator(self):
        field = make_field(SystemConfig(snr=4.0, prior_present=0.0))
        counter = Counter()
        rng = np.random.default_rng(0)
        for _ in range(200):
            assert cascaded_decide(field, rng, counter).estimate.present == 0
        assert counter["estimator"] == 0

    def test_same_law_as_sap(self, field4):
        casc = draw_bins(cascaded_decide, field4, 100_000, seed=2)
        sap = draw_bins(sap_decide, field4, 100_000, seed=1)
        assert tv(casc, sap) < 0.02
        assert tv(casc, field_bins(field4)) < 0.02

    def test_records_state_probability(self, field4):
        d = cascaded_decide(field4, np.random.default_rng(1))
        assert d.state_probability == field4.probability(d.estimate.present)
        assert d.rule is Rule.CASCADED


def test_decide_dispatch(field4):
    assert decide("map", field4).rule is Rule.MAP
    assert decide(Rule.SAP, field4, np.random.default_rng(0)).rule is Rule.SAP
