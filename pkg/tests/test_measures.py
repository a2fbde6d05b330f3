import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0e

from radar_jde.measures import (
    EntropyBreakdown,
    differential_entropy,
    discrete_entropy,
    distribution_entropy,
    entropy_error_deviation,
    entropy_number,
    estimation_density_entropy,
    snapshot_entropy,
    theoretical_info,
)
from radar_jde.posterior import DelayGrid, InvalidInputError, compute_posterior
from radar_jde.signal_model import JointTargetParameter, SystemConfig, synthesize_snapshot


def test_discrete_entropy_values():
    assert discrete_entropy(0.5) == 1.0
    assert discrete_entropy(0.0) == 0.0
    assert discrete_entropy(1.0) == 0.0
    direct = -(0.25 * math.log2(0.25) + 0.75 * math.log2(0.75))
    assert discrete_entropy(0.25) == pytest.approx(direct, abs=1e-15)
    assert discrete_entropy(0.25) == pytest.approx(0.811278, abs=1e-6)


@pytest.mark.parametrize("n", [64, 128])
def test_differential_entropy_uniform(n):
    grid = DelayGrid.for_config(SystemConfig(n_samples=n, edge_margin=0.0))
    assert differential_entropy(np.full(grid.size, 1 / n), grid) == pytest.approx(math.log2(n), abs=1e-9)


def test_differential_entropy_gaussian():
    grid = DelayGrid.for_config(SystemConfig(n_samples=64))
    x = grid.points
    p = np.exp(-0.5 * x**2) / math.sqrt(2 * math.pi)
    assert differential_entropy(p, grid) == pytest.approx(0.5 * math.log2(2 * math.pi * math.e), abs=1e-3)


def test_differential_entropy_rejects_unnormalized(grid):
    with pytest.raises(InvalidInputError):
        differential_entropy(np.full(grid.size, 2 / 128), grid)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_entropy_number_uniform_source(n):
    assert entropy_number(distribution_entropy(np.full(n, 1 / n))) == pytest.approx(n, abs=1e-12)


def test_entropy_number_deterministic_and_geometric():
    assert entropy_number(0.0) == 1.0
    assert entropy_number(distribution_entropy([0.0, 1.0, 0.0])) == 1.0
    geometric = 0.5 ** np.arange(1, 80)
    h = distribution_entropy(geometric)
    assert h == pytest.approx(2.0, abs=1e-12)
    assert entropy_number(h) == pytest.approx(4.0, abs=1e-12)


def _field(cfg, present=1, delay=0.0, seed=0, phase=None):
    snap = synthesize_snapshot(cfg, JointTargetParameter(present, delay), np.random.default_rng(seed), phase=phase)
    return compute_posterior(snap, cfg)


def test_snapshot_entropy_zero_snr():
    b = snapshot_entropy(_field(SystemConfig(snr=0.0)))
    assert (b.h_detect, b.h_estimate, b.h_joint) == pytest.approx((1.0, 7.0, 8.0), abs=1e-12)


def test_snapshot_entropy_high_snr_detection_is_certain():
    cfg = SystemConfig(snr=100.0, noiseless=True)
    b = snapshot_entropy(_field(cfg, 1, 3.0, phase=0.2))
    assert b.h_detect < 1e-2


@settings(max_examples=25, deadline=None)
@given(snr=st.floats(0.0, 40.0), present=st.integers(0, 1), seed=st.integers(0, 2**32))
def test_breakdown_identities(snr, present, seed):
    cfg = SystemConfig(snr=snr)
    field = _field(cfg, present, 1.5, seed)
    b = snapshot_entropy(field)
    assert b.h_joint == b.h_detect + b.h_estimate
    assert 0.0 <= b.h_detect <= 1.0
    assert b.h_estimate <= math.log2(128) + 1e-9
    assert b.h_estimate_present == pytest.approx(estimation_density_entropy(field, 1), abs=1e-9)


def test_entropy_deviation_examples():
    assert entropy_error_deviation(EntropyBreakdown(1.0, 3.3, 0, 0)).ed_detect == 2.0
    e = entropy_error_deviation(EntropyBreakdown(0.0, 0.0, 0, 0))
    assert e.ed_joint == pytest.approx(1 / math.sqrt(2 * math.pi * math.e), rel=1e-15)
    assert e.ed_joint == pytest.approx(0.24197, abs=1e-5)


def test_entropy_error_products():
    rng = np.random.default_rng(0)
    for hd, he in zip(rng.uniform(0, 1, 100), rng.uniform(-3, 8, 100)):
        e = entropy_error_deviation(EntropyBreakdown(hd, he, 0, 0))
        assert e.ee_joint == pytest.approx(e.ee_detect * e.ee_estimate, rel=1e-12)
        assert e.ed_joint == pytest.approx(e.ed_detect * e.ed_estimate, rel=1e-12)
        assert e.ee_joint == pytest.approx(2 ** (2 * (hd + he)) / (2 * math.pi * math.e), rel=1e-12)


def test_theoretical_info_zero_snr_is_exactly_zero():
    r = theoretical_info(SystemConfig(snr=0.0), 200)
    assert (r.i_joint, r.i_detect, r.i_estimate) == (0.0, 0.0, 0.0)
    assert r.h_prior_joint == pytest.approx(8.0, abs=1e-12)


@pytest.mark.parametrize("snr", [1.0, 4.0, 16.0])
def test_theoretical_info_bounds_and_chain_rule(snr):
    cfg = SystemConfig(snr=snr)
    r = theoretical_info(cfg, 400, seed=3)
    assert r.i_joint == pytest.approx(r.i_detect + r.i_estimate, abs=1e-12)
    tol = 3 * r.mc_std_err
    assert -tol <= r.i_detect <= 1.0 + tol
    # no upper cap: h(X|y,1) is differential and turns negative for sharp posteriors
    assert r.i_estimate >= -tol
    assert r.i_joint == pytest.approx(r.h_prior_joint - r.h_joint, abs=1e-9)


def test_information_grows_with_snr():
    reports = [theoretical_info(SystemConfig(snr=s), 400, seed=11) for s in (0.5, 2.0, 8.0, 25.0)]
    for lo, hi in zip(reports, reports[1:]):
        assert hi.i_joint >= lo.i_joint - 3 * max(lo.mc_std_err, hi.mc_std_err)


@pytest.mark.parametrize("snr", [4.0, 25.0])
def test_grid_convergence(snr):
    a = theoretical_info(SystemConfig(snr=snr, oversample=16), 200, seed=5)
    b = theoretical_info(SystemConfig(snr=snr, oversample=32), 200, seed=5)
    assert abs(a.i_joint - b.i_joint) < 1e-3


def brute_force_detection_information(snr, count, seed):
    """I(Y;V) by direct likelihood ratios; shares no code with the package."""
    rng = np.random.default_rng(seed)
    rho = math.sqrt(snr)
    n = np.arange(-64, 64)
    xs = np.linspace(-64, 64, 4097)
    u = np.sinc(n[None, :] - xs[:, None])
    gains = []
    for _ in range(count):
        v = rng.random() < 0.5
        x0 = rng.uniform(-56, 56)
        phase = rng.uniform(0, 2 * np.pi)
        y = rng.normal(0, math.sqrt(0.5), 128) + 1j * rng.normal(0, math.sqrt(0.5), 128)
        y = y + v * rho * np.exp(1j * phase) * np.sinc(n - x0)
        z = 2 * rho * np.abs(u @ y)
        lg = np.log(i0e(z)) + z - snr
        top = lg.max()
        log_j = top + math.log(np.trapezoid(np.exp(lg - top), xs) / 128)
        p1 = 1.0 / (1.0 + math.exp(-log_j)) if log_j > -700 else 0.0
        h = 0.0 if p1 in (0.0, 1.0) else -(p1 * math.log2(p1) + (1 - p1) * math.log2(1 - p1))
        gains.append(1.0 - h)
    gains = np.array(gains)
    return gains.mean(), gains.std(ddof=1) / math.sqrt(count)


def test_detection_information_matches_brute_force_at_13db():
    r = theoretical_info(SystemConfig(snr=20.0), 1500, seed=2)
    d = r.i_detect
    oracle, oracle_se = brute_force_detection_information(20.0, 1500, seed=99)
    # i_detect's own standard error is not reported separately; bound it by the joint one
    assert abs(d - oracle) < 4 * math.hypot(oracle_se, r.mc_std_err)


@pytest.mark.xfail(strict=True, reason="I(Y;V) at rho^2 = 20, N = 128 is about 0.923 bits, not >= 0.99")
def test_detection_saturates_at_13db():
    r = theoretical_info(SystemConfig(snr=20.0, prior_present=0.5), 10_000, seed=1)
    assert r.i_detect >= 0.99
