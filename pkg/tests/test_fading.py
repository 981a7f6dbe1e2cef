"""Simulator tests: PRBS generation, gain statistics, waveform synthesis."""

import math

import numpy as np
import pytest

from fsosec import (
    ChannelParams,
    PrbsError,
    PrbsSpec,
    SimConfig,
    gen_prbs15,
    sample_gains,
    synthesize_waveform,
    wiretap_run,
)


class TestPrbs:
    def test_full_period_length(self):
        assert gen_prbs15(PrbsSpec()).size == 2**15 - 1

    def test_balance_brute_force(self):
        # brute-force count over one generated period: m-sequences carry
        # exactly one more 1 than 0
        bits = gen_prbs15(PrbsSpec())
        ones = int(np.count_nonzero(bits == 1))
        zeros = int(np.count_nonzero(bits == 0))
        assert ones == 16384
        assert zeros == 16383
        assert ones + zeros == bits.size

    def test_deterministic(self):
        spec = PrbsSpec(initial_state=0x1234)
        assert np.array_equal(gen_prbs15(spec), gen_prbs15(spec))

    def test_different_seeds_are_shifts(self):
        # any nonzero state starts somewhere on the same cycle
        a = gen_prbs15(PrbsSpec(initial_state=1))
        b = gen_prbs15(PrbsSpec(initial_state=0x4321))
        assert not np.array_equal(a, b)
        assert int(a.sum()) == int(b.sum()) == 16384

    def test_zero_state_rejected(self):
        with pytest.raises(PrbsError):
            PrbsSpec(initial_state=0)

    def test_non_maximal_taps_rejected(self):
        # x^15 + x^13 + 1 is not primitive
        with pytest.raises(PrbsError, match="not maximal"):
            gen_prbs15(PrbsSpec(taps=(15, 13)))

    def test_non_maximal_taps_small_register(self):
        # x^4 + x^2 + 1 = (x^2 + x + 1)^2 cycles early
        with pytest.raises(PrbsError, match="not maximal"):
            gen_prbs15(PrbsSpec(register_bits=4, taps=(4, 2), initial_state=1))
        assert gen_prbs15(PrbsSpec(register_bits=4, taps=(4, 3), initial_state=1)).size == 15

    def test_tap_range_validated(self):
        with pytest.raises(PrbsError):
            PrbsSpec(taps=(16, 14))


class TestSampleGains:
    def test_zero_scintillation_is_exact(self):
        rng = np.random.default_rng(0)
        gains = sample_gains(ChannelParams(2.5, 0.0, 0.1), 1000, rng)
        assert np.all(gains == 2.5)

    def test_lognormal_moments_monte_carlo(self):
        # oracle: log-normal with sigma_ln^2 = ln(1 + SI) has mean
        # mean_gain and scintillation index SI by construction
        rng = np.random.default_rng(42)
        gains = sample_gains(ChannelParams(1.0, 0.4, 0.1), 10**5, rng)
        mean = gains.mean()
        si = np.mean(gains**2) / mean**2 - 1.0
        assert abs(mean - 1.0) < 0.01
        assert abs(si - 0.4) < 0.05 * 0.4

    def test_zero_mean_gain(self):
        rng = np.random.default_rng(0)
        assert np.all(sample_gains(ChannelParams(0.0, 0.3, 0.1), 100, rng) == 0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            ChannelParams(-1.0, 0.0, 0.1)
        with pytest.raises(ValueError):
            ChannelParams(1.0, -0.1, 0.1)
        with pytest.raises(ValueError):
            ChannelParams(1.0, 0.1, 0.0)
        with pytest.raises(ValueError):
            sample_gains(ChannelParams(1.0, 0.1, 0.1), 0, np.random.default_rng(0))


def _small_cfg(**kwargs) -> SimConfig:
    defaults = dict(
        rep_rate_hz=1e6,
        sample_rate_hz=5e6,
        duration_s=1e-3,
        coherence_s=1e-4,
        bob=ChannelParams(1.0, 0.0, 1e-12, dc_offset=0.0),
        eve=ChannelParams(1.0, 0.0, 1e-12, dc_offset=0.0),
        rng_seed=1,
    )
    defaults.update(kwargs)
    return SimConfig(**defaults)


class TestSynthesize:
    def test_noiseless_limit(self):
        cfg = _small_cfg()
        rng = np.random.default_rng(0)
        bits = np.tile([1, 0, 1, 1, 0], 200)
        gains = np.ones(10)
        rec = synthesize_waveform(bits, gains, cfg.bob, cfg, rng)
        expected = np.repeat(bits.astype(float), 5)
        assert np.allclose(rec.samples, expected, atol=1e-6)

    def test_all_zero_bits_mean_is_dc(self):
        # Gaussian mean estimator: |mean - dc| < 3 sigma / sqrt(N)
        params = ChannelParams(1.0, 0.0, 0.2, dc_offset=0.7)
        cfg = _small_cfg(bob=params)
        rng = np.random.default_rng(3)
        n = cfg.n_symbols
        rec = synthesize_waveform(np.zeros(n, dtype=int), np.ones(cfg.n_slots), params, cfg, rng)
        assert abs(rec.samples.mean() - 0.7) < 3 * 0.2 / math.sqrt(rec.n_samples)

    def test_piecewise_constant_gain(self):
        cfg = _small_cfg(duration_s=2e-4)
        rng = np.random.default_rng(0)
        bits = np.ones(cfg.n_symbols, dtype=int)
        rec = synthesize_waveform(bits, np.array([1.0, 2.0]), cfg.bob, cfg, rng)
        half = rec.n_samples // 2
        assert rec.samples[:half].mean() == pytest.approx(0.5 * rec.samples[half:].mean(), rel=1e-6)

    def test_length_mismatch(self):
        cfg = _small_cfg()
        with pytest.raises(ValueError, match="span"):
            synthesize_waveform(np.ones(10, dtype=int), np.ones(3), cfg.bob, cfg,
                                np.random.default_rng(0))


class TestWiretapRun:
    def test_reproducible(self):
        cfg = _small_cfg(bob=ChannelParams(1.0, 0.2, 0.1), eve=ChannelParams(0.5, 0.3, 0.2))
        b1, e1, t1 = wiretap_run(cfg)
        b2, e2, t2 = wiretap_run(cfg)
        assert np.array_equal(b1.samples, b2.samples)
        assert np.array_equal(e1.samples, e2.samples)
        assert np.array_equal(t1.transmitted_bits, t2.transmitted_bits)
        assert t1.frame_offset_samples == t2.frame_offset_samples

    def test_sample_count_exact(self):
        cfg = _small_cfg()
        bob, eve, _ = wiretap_run(cfg)
        assert bob.n_samples == eve.n_samples == int(cfg.duration_s * cfg.sample_rate_hz)

    def test_default_config_bit_count(self):
        bob, _, truth = wiretap_run(SimConfig(rng_seed=5))
        assert truth.transmitted_bits.size == 2 * 10**6
        assert bob.n_samples == 10**7

    def test_uncorrelated_gains(self):
        # Monte-Carlo correlation estimate over 1e4 slots
        cfg = SimConfig(
            rep_rate_hz=1e6,
            sample_rate_hz=2e6,
            duration_s=0.1,
            coherence_s=1e-5,
            bob=ChannelParams(1.0, 0.3, 0.1),
            eve=ChannelParams(1.0, 0.3, 0.1),
            gain_correlation=0.0,
            rng_seed=11,
        )
        _, _, truth = wiretap_run(cfg)
        assert truth.slot_gains_bob.size == 10**4
        corr = np.corrcoef(np.log(truth.slot_gains_bob), np.log(truth.slot_gains_eve))[0, 1]
        assert abs(corr) < 0.03

    def test_perfect_copula(self):
        params = ChannelParams(1.0, 0.4, 0.1)
        cfg = _small_cfg(bob=params, eve=params, gain_correlation=1.0)
        _, _, truth = wiretap_run(cfg)
        assert np.array_equal(truth.slot_gains_bob, truth.slot_gains_eve)

    def test_same_bits_both_channels(self):
        cfg = _small_cfg()
        bob, eve, truth = wiretap_run(cfg)
        # noiseless, unit gain, zero dc: mid-symbol samples equal the bits
        spp = cfg.samples_per_symbol
        bob_bits = (bob.samples[spp // 2 :: spp] > 0.5).astype(int)
        eve_bits = (eve.samples[spp // 2 :: spp] > 0.5).astype(int)
        assert np.array_equal(bob_bits, eve_bits)
        assert np.array_equal(bob_bits, truth.transmitted_bits)

    def test_noiseless_threshold_recovery(self):
        # mid-symbol sampling + threshold at dc + A/2 reproduces the bits
        params = ChannelParams(1.0, 0.0, 1e-12, dc_offset=0.3)
        cfg = _small_cfg(bob=params, eve=params, on_amplitude=2.0)
        bob, _, truth = wiretap_run(cfg)
        spp = cfg.samples_per_symbol
        decided = (bob.samples[spp // 2 :: spp] >= 0.3 + 1.0).astype(int)
        assert np.array_equal(decided, truth.transmitted_bits)

    def test_scintillation_index_convergence(self):
        rng = np.random.default_rng(7)
        gains = sample_gains(ChannelParams(1.0, 0.25, 0.1), 10**5, rng)
        si = np.mean(gains**2) / gains.mean() ** 2 - 1.0
        assert abs(si - 0.25) < 0.05 * 0.25

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SimConfig(sample_rate_hz=25e5, rep_rate_hz=1e6)  # 2.5 samples/symbol
        with pytest.raises(ValueError):
            SimConfig(duration_s=0.01, coherence_s=0.004)  # 2.5 slots
        with pytest.raises(ValueError):
            SimConfig(gain_correlation=1.5)
