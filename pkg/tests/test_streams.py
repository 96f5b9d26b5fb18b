import math

import numpy as np
import pytest

from streamcs.streams import (
    SparseStream,
    StreamConfig,
    StreamConfigError,
    gen_stream,
    load_stream,
    mismatch_expectation,
    mismatch_mc,
    save_stream,
    window,
)


def test_gen_stream_deterministic():
    cfg = StreamConfig(0.2, 1.0, 2.0, seed=9, length=500)
    assert np.array_equal(gen_stream(cfg).values, gen_stream(cfg).values)


def test_degenerate_band_gives_constant_magnitudes():
    cfg = StreamConfig(1.0, 2.0, 2.0, seed=0, length=200)
    vals = gen_stream(cfg).values
    assert np.all(np.abs(vals) == 2.0)
    assert np.any(vals > 0) and np.any(vals < 0)


def test_nonzero_fraction_concentrates():
    p, length = 0.05, 100_000
    vals = gen_stream(StreamConfig(p, 1.0, 2.0, seed=3, length=length)).values
    frac = np.count_nonzero(vals) / length
    assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / length)


def test_magnitude_band_respected():
    vals = gen_stream(StreamConfig(0.5, 1.0, 2.0, seed=1, length=5000)).values
    nz = np.abs(vals[vals != 0])
    assert np.all((nz >= 1.0) & (nz <= 2.0))


def test_invalid_p_rejected():
    for p in (0.0, -0.1, 1.5):
        with pytest.raises(StreamConfigError):
            StreamConfig(p, 1.0, 2.0, seed=0, length=10)


def test_window_sparsity_binomial():
    n, p = 64, 0.1
    stream = gen_stream(StreamConfig(p, 1.0, 2.0, seed=5, length=20_000))
    counts = [
        np.count_nonzero(window(stream, i, n)) for i in range(0, 19_000, n)
    ]
    mean = float(np.mean(counts))
    sigma = math.sqrt(n * p * (1 - p) / len(counts))
    assert abs(mean - n * p) <= 3 * sigma


class TestWindow:
    def setup_method(self):
        cfg = StreamConfig(1.0, 1.0, 4.0, seed=0, length=4)
        self.stream = SparseStream(np.array([1.0, 2.0, 3.0, 4.0]), cfg)

    def test_first(self):
        assert np.array_equal(window(self.stream, 0, 2, 1), [1.0, 2.0])

    def test_unit_shift(self):
        assert np.array_equal(window(self.stream, 1, 2, 1), [2.0, 3.0])

    def test_tau_shift(self):
        assert np.array_equal(window(self.stream, 1, 2, 2), [3.0, 4.0])

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            window(self.stream, 2, 3, 1)


class TestMismatchExpectation:
    def test_no_truncation_is_zero(self):
        assert mismatch_expectation(50, 50, 0.3, 2.0) == 0.0

    def test_single_term_closed_form(self):
        # n=1, kappa=0: only k=1 contributes, C(1,1) p (1 - 1/2) = p/2
        assert mismatch_expectation(1, 0, 0.5, 1.0) == pytest.approx(0.25, abs=1e-15)

    def test_monotone_nonincreasing_in_kappa(self):
        vals = [mismatch_expectation(40, k, 0.3, 1.5) for k in range(41)]
        assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))
        assert vals[-1] == 0.0

    def test_p_equal_one(self):
        # every entry nonzero: only the k=n term survives
        v = mismatch_expectation(10, 4, 1.0, 1.0)
        inner = sum(1 - i / 11 for i in range(5, 11))
        assert v == pytest.approx(inner, rel=1e-12)

    def test_scales_linearly_with_amplitude(self):
        v1 = mismatch_expectation(30, 5, 0.2, 1.0)
        v3 = mismatch_expectation(30, 5, 0.2, 3.0)
        assert v3 == pytest.approx(3 * v1, rel=1e-12)

    def test_agrees_with_monte_carlo(self):
        n, kappa, p, amp = 20, 6, 0.3, 1.0
        expected = mismatch_expectation(n, kappa, p, amp)
        batches = [
            mismatch_mc(n, kappa, p, amp, trials=10_000, seed=100 + b)
            for b in range(10)
        ]
        mc = float(np.mean(batches))
        se = float(np.std(batches, ddof=1)) / math.sqrt(len(batches))
        assert abs(mc - expected) <= 3 * se

    def test_shape_vs_window_length_and_density(self):
        # at kappa = ceil(n p) the expectation grows with n at fixed p ...
        at_p = [
            mismatch_expectation(n, math.ceil(n * 0.2), 0.2, 1.0)
            for n in (250, 500, 1000, 2000)
        ]
        assert all(a < b for a, b in zip(at_p, at_p[1:]))
        # ... and over p at fixed n it vanishes at both ends with a bump between
        grid = [0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0]
        over_p = [
            mismatch_expectation(1000, math.ceil(1000 * p), p, 1.0) for p in grid
        ]
        peak = max(range(len(grid)), key=lambda i: over_p[i])
        assert 0 < peak < len(grid) - 1
        assert over_p[-1] == 0.0


class TestMismatchMC:
    def test_no_truncation_exactly_zero(self):
        assert mismatch_mc(15, 15, 0.4, 1.0, trials=100, seed=0) == 0.0

    def test_vanishing_density(self):
        assert mismatch_mc(20, 4, 1e-12, 1.0, trials=1000, seed=0) == 0.0

    def test_deterministic_per_seed(self):
        a = mismatch_mc(10, 2, 0.5, 1.0, trials=500, seed=7)
        b = mismatch_mc(10, 2, 0.5, 1.0, trials=500, seed=7)
        assert a == b


def test_stream_text_round_trip(tmp_path):
    vals = gen_stream(StreamConfig(0.3, 0.5, 2.5, seed=2, length=64)).values
    path = tmp_path / "stream.txt"
    save_stream(vals, path)
    assert np.array_equal(load_stream(path), vals)
