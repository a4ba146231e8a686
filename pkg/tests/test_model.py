"""Model structure, design matrix and signal summaries.

The extremum tests use a brute-force oracle: sample the signal on a
very dense grid over one period and locate extrema directly, instead of
trusting the scan-plus-parabola machinery under test.
"""

import numpy as np
import pytest

from dcmethod import (
    BetaVector,
    ConfigError,
    ModelSpec,
    SpanStats,
    design_matrix,
    eval_model,
    signal_values,
    summarize_signals,
    trend_ranges,
    trend_values,
)
from dcmethod.model import param_names, scaled_time

UNIT = SpanStats(t_mid=0.5, delta_t=1.0, f0=1.0, y_mean=0.0, y_std=0.0)


# ---------------------------------------------------------------------------
# structure
# ---------------------------------------------------------------------------

def test_eta_counts_free_parameters():
    assert ModelSpec(1, 1, 0).eta == 4
    assert ModelSpec(1, 1, -1).eta == 3
    assert ModelSpec(2, 1, 0).eta == 7
    assert ModelSpec(2, 2, 2).eta == 13
    assert ModelSpec(0, 1, 3).eta == 4


def test_n_linear_excludes_frequencies():
    spec = ModelSpec(2, 2, 1)
    assert spec.n_linear == spec.eta - spec.k1
    assert ModelSpec(1, 1, -1).n_linear == 2


def test_label():
    assert ModelSpec(2, 1, -1).label == "g(2,1,-1)"


def test_invalid_shapes_rejected():
    with pytest.raises(ConfigError):
        ModelSpec(-1, 1, 0)
    with pytest.raises(ConfigError):
        ModelSpec(1, 0, 0)
    with pytest.raises(ConfigError):
        ModelSpec(1, 1, -2)
    with pytest.raises(ConfigError):
        ModelSpec(0, 1, -1)  # nothing left to fit


def test_param_names_interleaved_order():
    names = param_names(ModelSpec(2, 2, 1))
    assert names == [
        "B_1_1", "C_1_1", "B_1_2", "C_1_2", "f_1",
        "B_2_1", "C_2_1", "B_2_2", "C_2_2", "f_2",
        "M_0", "M_1",
    ]


def test_interleaved_round_trip():
    spec = ModelSpec(2, 2, 1)
    rng = np.random.default_rng(3)
    beta = BetaVector(np.array([2.0, 1.0]), rng.normal(size=spec.n_linear))
    vec = beta.interleaved(spec)
    assert vec.size == spec.eta
    back = BetaVector.from_interleaved(spec, vec)
    assert np.array_equal(back.freqs, beta.freqs)
    assert np.array_equal(back.linear, beta.linear)
    # frequencies sit after each signal's cos/sin block
    assert vec[4] == 2.0 and vec[9] == 1.0


def test_from_interleaved_wrong_length():
    with pytest.raises(ConfigError):
        BetaVector.from_interleaved(ModelSpec(1, 1, 0), np.zeros(3))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_scaled_time_endpoints():
    st = SpanStats(t_mid=5.0, delta_t=4.0, f0=0.25, y_mean=0.0, y_std=0.0)
    assert scaled_time(3.0, st) == -1.0
    assert scaled_time(7.0, st) == 1.0
    assert scaled_time(5.0, st) == 0.0


def test_design_matrix_columns_by_hand():
    spec = ModelSpec(1, 2, 1)
    t = np.array([0.0, 0.3, 0.8])
    f = 1.7
    a = design_matrix(t, spec, np.array([f]), UNIT)
    assert a.shape == (3, 6)
    w = 2 * np.pi * f * t
    assert np.allclose(a[:, 0], np.cos(w), atol=0, rtol=0)
    assert np.allclose(a[:, 1], np.sin(w), atol=0, rtol=0)
    assert np.allclose(a[:, 2], np.cos(2 * w))
    assert np.allclose(a[:, 3], np.sin(2 * w))
    assert np.allclose(a[:, 4], 1.0)
    assert np.allclose(a[:, 5], 2 * (t - 0.5))


def test_design_matrix_batch_matches_single():
    spec = ModelSpec(2, 1, 0)
    t = np.linspace(0, 1, 11)
    batch = np.array([[3.0, 1.0], [2.5, 0.5], [4.0, 3.9]])
    stacked = design_matrix(t, spec, batch, UNIT)
    assert stacked.shape == (3, 11, 5)
    for b in range(3):
        single = design_matrix(t, spec, batch[b], UNIT)
        assert np.array_equal(stacked[b], single)


def test_design_matrix_frequency_count_checked():
    with pytest.raises(ConfigError):
        design_matrix(np.linspace(0, 1, 5), ModelSpec(2, 1, 0),
                      np.array([1.0]), UNIT)


def test_eval_model_closed_form():
    # one harmonic plus a linear trend, coefficients chosen by hand
    spec = ModelSpec(1, 1, 1)
    beta = BetaVector(np.array([2.0]), np.array([0.3, -1.1, 0.7, 0.2]))
    t = np.linspace(0, 1, 17)
    w = 2 * np.pi * 2.0 * t
    expect = 0.3 * np.cos(w) - 1.1 * np.sin(w) + 0.7 + 0.2 * (2 * (t - 0.5))
    assert np.allclose(eval_model(t, spec, beta, UNIT), expect, rtol=1e-15)


def test_signal_and_trend_split_sums_to_model():
    spec = ModelSpec(2, 2, 2)
    rng = np.random.default_rng(11)
    beta = BetaVector(np.array([4.0, 1.5]), rng.normal(size=spec.n_linear))
    t = np.linspace(0, 1, 23)
    total = (signal_values(t, spec, beta, UNIT, 0)
             + signal_values(t, spec, beta, UNIT, 1)
             + trend_values(t, spec, beta, UNIT))
    assert np.allclose(total, eval_model(t, spec, beta, UNIT), rtol=1e-13)


def test_trend_values_empty_when_removed():
    spec = ModelSpec(1, 1, -1)
    beta = BetaVector(np.array([1.0]), np.array([1.0, 0.0]))
    assert np.array_equal(trend_values(np.array([0.1, 0.9]), spec, beta, UNIT),
                          [0.0, 0.0])


def test_trend_ranges_doubles_odd_powers():
    spec = ModelSpec(0, 1, 3)
    beta = BetaVector(np.empty(0), np.array([1.0, 0.25, 0.5, -0.3]))
    # T in [-1, 1]: odd powers span 2|M|, even powers |M|
    assert np.allclose(trend_ranges(spec, beta), [1.0, 0.5, 0.5, 0.6])


# ---------------------------------------------------------------------------
# signal summaries
# ---------------------------------------------------------------------------

def brute_extrema(spec, beta, i, t0, n=2_000_001):
    """Dense-grid oracle for one signal's extrema over one period."""
    period = 1.0 / beta.freqs[i]
    tg = t0 + np.linspace(0.0, period, n, endpoint=False)
    h = signal_values(tg, spec, beta, UNIT, i)
    return tg, h


def test_pure_sine_amplitude_identity():
    # a single-harmonic signal has peak-to-peak range 2 sqrt(B^2 + C^2)
    spec = ModelSpec(1, 1, 0)
    rng = np.random.default_rng(5)
    for _ in range(10):
        b, c = rng.normal(size=2)
        beta = BetaVector(np.array([1.3]), np.array([b, c, 0.0]))
        s = summarize_signals(spec, beta, UNIT).signals[0]
        assert s.amplitude == pytest.approx(2 * np.hypot(b, c), rel=1e-9)


def test_pure_sine_epochs():
    # B cos(wt): maximum at t = 0 and minimum half a period later
    spec = ModelSpec(1, 1, 0)
    beta = BetaVector(np.array([2.0]), np.array([1.0, 0.0, 0.0]))
    s = summarize_signals(spec, beta, UNIT).signals[0]
    assert s.period == 0.5
    assert s.t_max1 == pytest.approx(0.0, abs=1e-9)
    assert s.t_min1 == pytest.approx(0.25, abs=1e-9)
    assert s.t_max2 is None and s.t_min2 is None
    assert not s.tie


def test_epochs_fall_in_first_period_window():
    spec = ModelSpec(1, 1, 0)
    beta = BetaVector(np.array([0.9]), np.array([0.2, -1.4, 0.0]))
    s = summarize_signals(spec, beta, UNIT).signals[0]
    for e in (s.t_max1, s.t_min1):
        assert 0.0 <= e < s.period


def test_two_harmonic_summary_against_brute_force():
    spec = ModelSpec(1, 2, 0)
    beta = BetaVector(np.array([1.0 / 0.16]),
                      np.array([0.37, 0.11, -0.23, 0.69, 0.0]))
    s = summarize_signals(spec, beta, UNIT).signals[0]
    tg, h = brute_extrema(spec, beta, 0, t0=0.0)
    assert s.amplitude == pytest.approx(np.ptp(h), rel=1e-8)
    assert s.t_max1 == pytest.approx(tg[np.argmax(h)], abs=1e-6)
    assert s.t_min1 == pytest.approx(tg[np.argmin(h)], abs=1e-6)
    # a double wave has a genuine secondary pair
    assert s.t_max2 is not None and s.t_min2 is not None


def test_flat_signal_has_zero_amplitude():
    spec = ModelSpec(1, 1, 0)
    beta = BetaVector(np.array([1.0]), np.array([0.0, 0.0, 0.4]))
    s = summarize_signals(spec, beta, UNIT).signals[0]
    assert s.amplitude == 0.0
    assert s.t_max1 is None and s.t_min1 is None


def test_equal_extrema_tie_flagged():
    # |sin| - like double wave: cos(2wt) only, two equal maxima per period
    spec = ModelSpec(1, 2, 0)
    beta = BetaVector(np.array([1.0]), np.array([0.0, 0.0, 1.0, 0.0, 0.0]))
    s = summarize_signals(spec, beta, UNIT).signals[0]
    assert s.tie
    # earlier epoch wins among the equals
    assert s.t_max1 == pytest.approx(0.0, abs=1e-6)


def test_no_secondary_for_single_harmonic_even_if_k2_allows():
    # k2 = 2 but the second harmonic is zero: one max and one min only
    spec = ModelSpec(1, 2, 0)
    beta = BetaVector(np.array([1.0]), np.array([1.0, 0.0, 0.0, 0.0, 0.0]))
    s = summarize_signals(spec, beta, UNIT).signals[0]
    assert s.t_max2 is None and s.t_min2 is None


def test_summary_covers_all_signals_and_trend():
    spec = ModelSpec(2, 1, 1)
    beta = BetaVector(np.array([3.0, 1.0]),
                      np.array([1.0, 0.0, 0.0, 0.5, 2.0, -0.7]))
    out = summarize_signals(spec, beta, UNIT)
    assert len(out.signals) == 2
    assert np.array_equal(out.trend, [2.0, -0.7])
    assert np.allclose(out.trend_ranges, [2.0, 1.4])
