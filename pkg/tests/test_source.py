"""Tests for the Monte Carlo pair source."""

import math

import numpy as np
import pytest

from biphoton import states
from biphoton.errors import ValidationError
from biphoton.source import (
    Arm,
    SourceConfig,
    delay_from_uniform,
    derive_seed,
    expected_setting_counts,
    joint_pass_probability,
    make_rng,
    marginal_pass_probability,
    poisson_arrivals,
    sample_pair_delay,
    sample_pair_events,
    simulate,
)
from biphoton.states import COMPUTATIONAL_SETTINGS, MeasurementMode as M

SEC = 10**12

# explicit kets, written out independently of biphoton.states
KET = {
    "P1": np.array([1, 0]),
    "P2": np.array([0, 1]),
    "P3": np.array([1, 1]) / math.sqrt(2),
    "P4": np.array([1, -1j]) / math.sqrt(2),
}
BELL = np.array([1, 0, 0, 1]) / math.sqrt(2)


def overlap_sq(ms, mas, psi):
    v = np.kron(KET[ms], KET[mas])
    return abs(np.vdot(v, psi)) ** 2


class TestDelay:
    def test_uniform_one_gives_zero(self):
        assert delay_from_uniform(1.0, 40_000) == 0

    def test_mean(self):
        d = sample_pair_delay(make_rng(11), 40_000, size=10**6)
        assert d.min() >= 0 and d.dtype == np.int64
        assert abs(d.mean() - 40_000) < 0.01 * 40_000

    def test_survival_at_one_tau(self):
        n = 10**6
        d = sample_pair_delay(make_rng(12), 40_000, size=n)
        p = math.exp(-1)
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(np.mean(d > 40_000) - p) < 3 * sigma

    @pytest.mark.parametrize("tau", [0, -1.0])
    def test_bad_tau(self, tau):
        with pytest.raises(ValidationError):
            sample_pair_delay(make_rng(0), tau, size=3)


class TestProjection:
    def test_eigenstate(self):
        assert joint_pass_probability(states.product(M.P1, M.P1), M.P1, M.P1) == 1.0

    @pytest.mark.parametrize("ms,mas", [("P1", "P2"), ("P3", "P3"), ("P4", "P4"), ("P1", "P1"),
                                        ("P2", "P2"), ("P3", "P4"), ("P4", "P2")])
    def test_bell_against_inner_products(self, ms, mas):
        p = joint_pass_probability(states.bell(), M(ms), M(mas))
        assert p == pytest.approx(overlap_sq(ms, mas, BELL), abs=1e-12)

    def test_bell_values(self):
        b = states.bell()
        assert joint_pass_probability(b, M.P1, M.P2) == pytest.approx(0, abs=1e-12)
        assert joint_pass_probability(b, M.P3, M.P3) == pytest.approx(0.5, abs=1e-12)
        assert joint_pass_probability(b, M.P4, M.P4) == pytest.approx(0, abs=1e-12)

    def test_equal_peaks(self):
        b = states.bell()
        assert joint_pass_probability(b, M.P1, M.P1) == pytest.approx(
            joint_pass_probability(b, M.P2, M.P2), abs=1e-15)

    def test_non_hermitian_rejected(self):
        rho = states.bell().copy()
        rho[0, 1] = 0.3
        with pytest.raises(ValidationError):
            joint_pass_probability(rho, M.P1, M.P1)

    def test_marginals(self):
        assert marginal_pass_probability(states.bell(), M.P1, Arm.STOKES) == pytest.approx(0.5)
        gg = states.product(M.P1, M.P1)
        assert marginal_pass_probability(gg, M.P2, Arm.STOKES) == 0
        assert marginal_pass_probability(gg, M.P2, Arm.ANTI_STOKES) == 0
        for m in M:
            for arm in Arm:
                assert marginal_pass_probability(states.maximally_mixed(), m, arm) == \
                    pytest.approx(0.5)

    @pytest.mark.parametrize("seed", range(25))
    def test_computational_settings_sum_to_one(self, seed):
        rho = states.random_density_matrix(np.random.default_rng(seed))
        total = sum(joint_pass_probability(rho, *s) for s in COMPUTATIONAL_SETTINGS)
        assert total == pytest.approx(1, abs=1e-10)


class TestSimulate:
    def test_pure_noise_arm(self):
        cfg = SourceConfig(pair_rate_hz=0, noise_s_hz=1000, duration_ps=100 * SEC, seed=4)
        s, a = simulate(cfg)
        assert abs(len(s) - 1e5) < 3 * math.sqrt(1e5)
        assert len(a) == 0

    def test_thinning_arithmetic(self):
        cfg = SourceConfig(pair_rate_hz=1e5, eta_s=0.04, eta_as=0.032, duration_ps=160 * SEC,
                           seed=5)
        s, _ = simulate(cfg)
        assert abs(len(s) - 6.4e5) < 3 * math.sqrt(6.4e5)
        pairs = sample_pair_events(cfg, make_rng(5))
        both = int(np.sum(pairs.survived_s & pairs.survived_as))
        assert abs(both - 2.048e4) < 3 * math.sqrt(2.048e4)

    def test_deterministic(self):
        cfg = SourceConfig(pair_rate_hz=2e4, noise_s_hz=300, noise_as_hz=200,
                           duration_ps=5 * SEC, state="werner:0.9",
                           setting=(M.P3, M.P4), seed=99)
        s1, a1 = simulate(cfg)
        s2, a2 = simulate(cfg)
        assert s1 == s2 and a1 == a2
        s3, _ = simulate(cfg.with_(seed=100))
        assert not np.array_equal(s1.times, s3.times)

    def test_streams_are_valid_and_tagged(self):
        from biphoton.timetag import Channel, validate_stream
        cfg = SourceConfig(pair_rate_hz=5e4, noise_s_hz=100, noise_as_hz=100, duration_ps=SEC,
                           seed=1)
        s, a = simulate(cfg)
        assert validate_stream(s) == [] and validate_stream(a) == []
        assert s.count(Channel.STOKES) == len(s) and a.count(Channel.ANTI_STOKES) == len(a)
        assert s.meta["rng"].startswith("numpy.random.Philox")
        assert s.meta["seed"] == "1"

    def test_pair_delays_ordered(self):
        cfg = SourceConfig(pair_rate_hz=1e4, duration_ps=SEC, seed=2)
        p = sample_pair_events(cfg, make_rng(2))
        assert np.all(p.t_as_ps >= p.t_s_ps)
        assert np.all(np.diff(p.t_s_ps) >= 0)
        assert np.all(p.survived_s | p.survived_as)

    def test_unpaired_survivors_keep_marginal_rate(self):
        # Bell under (P1, P2): no joint passes, but each arm still sees half its photons
        cfg = SourceConfig(pair_rate_hz=1e5, duration_ps=10 * SEC, setting=(M.P1, M.P2), seed=8)
        pairs = sample_pair_events(cfg, make_rng(8))
        assert not np.any(pairs.survived_s & pairs.survived_as)
        n_s = int(pairs.survived_s.sum())
        expected = 1e5 * 0.04 * 0.5 * 10
        assert abs(n_s - expected) < 3 * math.sqrt(expected)

    def test_noise_is_homogeneous(self):
        # time reversal leaves a homogeneous process unchanged: compare the two halves
        t = poisson_arrivals(make_rng(3), 2e4, 10 * SEC)
        first = np.sum(t < 5 * SEC)
        second = t.size - first
        assert abs(first - second) < 3 * math.sqrt(t.size)
        reversed_t = np.sort(10 * SEC - 1 - t)
        assert abs(np.mean(reversed_t) - np.mean(t)) < 3 * (10 * SEC / math.sqrt(12 * t.size))

    @pytest.mark.parametrize("change", [
        {"tau_co_ps": 0}, {"eta_s": 1.5}, {"noise_as_hz": -1}, {"duration_ps": 0},
        {"pair_rate_hz": float("inf")}, {"state": np.diag([1.0, 1.0, 0, 0])},
        {"duration_ps": 2**63},
    ])
    def test_invalid_config(self, change):
        with pytest.raises(ValidationError):
            simulate(SourceConfig(**change))


class TestExpectedCounts:
    def test_bell_p1p1(self):
        cfg = SourceConfig(pair_rate_hz=1e5, duration_ps=160 * SEC, eta_s=0.04, eta_as=0.032)
        assert expected_setting_counts(cfg, (M.P1, M.P1)) == pytest.approx(10240)

    def test_bell_cross_is_zero(self):
        cfg = SourceConfig(pair_rate_hz=3e3)
        assert expected_setting_counts(cfg, (M.P1, M.P2)) == pytest.approx(0, abs=1e-9)

    def test_mixed_quarter(self):
        cfg = SourceConfig(state="mixed")
        assert expected_setting_counts(cfg, (M.P2, M.P2)) == pytest.approx(
            expected_setting_counts(cfg, None) / 4)

    def test_matches_simulation_over_seeds(self):
        cfg = SourceConfig(pair_rate_hz=1e5, duration_ps=SEC, setting=(M.P3, M.P3))
        expected = 0
        observed = 0
        for i in range(20):
            c = cfg.with_(seed=derive_seed(77, i))
            p = sample_pair_events(c, make_rng(c.seed))
            observed += int(np.sum(p.survived_s & p.survived_as))
            expected += expected_setting_counts(c, c.setting)
        assert abs(observed - expected) < 4 * math.sqrt(expected)


def test_derive_seed_distinct():
    seeds = {derive_seed(1, i) for i in range(100)}
    assert len(seeds) == 100
    assert all(0 <= s < 2**64 for s in seeds)
