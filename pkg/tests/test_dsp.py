import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurodyn.dsp import (
    BiquadSection,
    EnvelopeConfig,
    block_downsample,
    design_butterworth,
    extract_envelopes,
    filter_zero_phase,
    rectify,
)
from neurodyn.errors import EmptyInput, InvalidCutoff, OddOrder, TooShort, TrialTooShort, ValidationError
from neurodyn.trialdata import ChannelKind, TrialSet

FS = 30000.0


def analog_gain(f, fc, order, fs, highpass=False):
    """Butterworth magnitude after pre-warping through the bilinear map."""
    warp = np.tan(np.pi * np.asarray(f, dtype=float) / fs) / np.tan(np.pi * fc / fs)
    with np.errstate(divide="ignore"):
        ratio = 1.0 / warp if highpass else warp
    return 1.0 / np.sqrt(1.0 + ratio ** (2 * order))


def test_lowpass_matches_analytic_magnitude():
    lp = design_butterworth(4, "lowpass", 50, FS)
    assert len(lp.sections) == 2
    f = np.linspace(0, 14000, 2001)
    got = np.abs(lp.frequency_response(f, FS))
    np.testing.assert_allclose(got, analog_gain(f, 50, 4, FS), atol=1e-9)


def test_bandpass_matches_analytic_magnitude():
    bp = design_butterworth(4, "bandpass", (20, 1000), FS)
    assert len(bp.sections) == 4
    f = np.linspace(1, 14000, 2001)
    want = analog_gain(f, 1000, 4, FS) * analog_gain(f, 20, 4, FS, highpass=True)
    np.testing.assert_allclose(np.abs(bp.frequency_response(f, FS)), want, atol=1e-9)


def test_cutoff_gains():
    lp = design_butterworth(4, "lowpass", 50, FS)
    assert abs(lp.gain_db([50], FS)[0] + 3.0) < 0.5
    assert abs(lp.gain_db([0], FS)[0]) < 0.1
    bp = design_butterworth(4, "bandpass", (20, 1000), FS)
    g = bp.gain_db([20, 1000, 140], FS)
    assert abs(g[0] + 3.0) < 0.5 and abs(g[1] + 3.0) < 0.5
    assert abs(g[2]) < 0.1
    assert bp.gain_db([0], FS)[0] < -60


def test_lowpass_monotone():
    lp = design_butterworth(4, "lowpass", 50, FS)
    mag = np.abs(lp.frequency_response(np.linspace(0, FS / 2, 20001), FS))
    assert np.all(np.diff(mag) <= 1e-9)


def test_sections_are_stable():
    for casc in (design_butterworth(4, "lowpass", 50, FS), design_butterworth(6, "bandpass", (20, 1000), FS)):
        for s in casc.sections:
            assert np.all(np.abs(np.roots([1.0, s.a1, s.a2])) < 1)
    with pytest.raises(ValidationError):
        BiquadSection(1, 0, 0, 0, 1.0)


def test_design_errors():
    with pytest.raises(OddOrder):
        design_butterworth(3, "lowpass", 50, FS)
    with pytest.raises(InvalidCutoff):
        design_butterworth(4, "lowpass", 15000, FS)
    with pytest.raises(InvalidCutoff):
        design_butterworth(4, "bandpass", (1000, 20), FS)
    with pytest.raises(InvalidCutoff):
        design_butterworth(4, "lowpass", 0, FS)


@pytest.mark.parametrize("kind,cut", [("lowpass", 50), ("bandpass", (20, 1000))])
def test_impulse_decays(kind, cut):
    casc = design_butterworth(4, kind, cut, FS)
    lowest = cut if np.isscalar(cut) else cut[0]
    n = int(10 * FS / lowest) + 2000
    x = np.zeros(n)
    x[0] = 1.0
    from scipy.signal import sosfilt

    h = sosfilt(casc.sos, x)
    assert np.max(np.abs(h[int(10 * FS / lowest) + 1 :])) < 1e-9


def test_constant_through_lowpass():
    lp = design_butterworth(4, "lowpass", 50, FS)
    y = filter_zero_phase(lp, np.full(3000, 2.5))
    np.testing.assert_allclose(y, 2.5, rtol=1e-6)


def test_stopband_sine():
    bp = design_butterworth(4, "bandpass", (20, 1000), FS)
    t = np.arange(30000) / FS
    x = np.sin(2 * np.pi * 2000 * t)
    y = filter_zero_phase(bp, x)
    assert y.shape == x.shape
    rms = lambda v: np.sqrt(np.mean(v[3000:-3000] ** 2))
    want = abs(bp.frequency_response([2000], FS)[0]) ** 2
    assert rms(y) < 0.1 * rms(x)
    assert rms(y) / rms(x) == pytest.approx(want, rel=0.05)


def test_zero_phase_no_lag():
    lp = design_butterworth(4, "lowpass", 50, FS)
    t = np.arange(60000) / FS
    x = np.sin(2 * np.pi * 5 * t)
    y = filter_zero_phase(lp, x)
    core = slice(10000, -10000)
    lag = np.argmax(np.correlate(y[core], x[core], "full")) - (len(x[core]) - 1)
    assert lag == 0


def test_zeros_and_short():
    lp = design_butterworth(4, "lowpass", 50, FS)
    assert not np.any(filter_zero_phase(lp, np.zeros(100)))
    with pytest.raises(TooShort):
        filter_zero_phase(lp, np.zeros(12))


def test_rectify():
    np.testing.assert_array_equal(rectify([-1, 2, -3]), [1, 2, 3])
    x = np.array([0.0, 1.5, 2.0])
    np.testing.assert_array_equal(rectify(x), x)
    y = np.random.default_rng(0).normal(size=50)
    np.testing.assert_array_equal(rectify(rectify(y)), rectify(y))


def test_block_downsample():
    np.testing.assert_array_equal(block_downsample([1, 2, 3, 4], 2), [1.5, 3.5])
    assert block_downsample(np.zeros(9000), 150).shape == (60,)
    np.testing.assert_array_equal(block_downsample(np.full(7, 3.0), 3), [3.0, 3.0])
    with pytest.raises(EmptyInput):
        block_downsample([1, 2], 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 40), st.integers(1, 7))
def test_block_downsample_means(n, factor):
    x = np.random.default_rng(n * 10 + factor).normal(size=n)
    if n < factor:
        with pytest.raises(EmptyInput):
            block_downsample(x, factor)
        return
    y = block_downsample(x, factor)
    assert len(y) == n // factor
    for k, v in enumerate(y):
        assert v == pytest.approx(x[k * factor : (k + 1) * factor].mean())


def test_envelope_config_validation():
    cfg = EnvelopeConfig()
    assert cfg.downsample_factor == 150
    with pytest.raises(ValidationError):
        EnvelopeConfig(band_lo_hz=1000, band_hi_hz=20)
    with pytest.raises(ValidationError):
        EnvelopeConfig(fs_out_hz=7000)
    with pytest.raises(ValidationError):
        EnvelopeConfig(lp_hz=150)
    with pytest.raises(ValidationError):
        EnvelopeConfig(norm_percentile=0)


def _bursts(trials=3, seed=0, amp=1.0):
    rng = np.random.default_rng(seed)
    n = 9000
    t = np.arange(n) / FS
    # 50 ms on/off bursts with rising amplitude; a pure 0/1 target caps rank correlation near 0.87
    block = (t * 1000) // 50
    mod = np.where(block % 2 == 0, (block // 2 + 1) / 3, 0.0)
    raw = np.empty((trials, n, 1))
    for k in range(trials):
        raw[k, :, 0] = amp * mod * np.sin(2 * np.pi * 300 * t + rng.uniform(0, 2 * np.pi))
    return TrialSet(raw, ["emg"], FS), mod


def test_burst_envelope_tracks_modulation():
    from scipy.stats import spearmanr

    raw, mod = _bursts()
    env = extract_envelopes(raw)
    assert env.shape == (3, 60, 1)
    assert env.sample_rate_hz == 200.0
    assert env.channels[0].kind is ChannelKind.EMG_ENVELOPE
    target = block_downsample(mod, 150)
    for k in range(3):
        assert spearmanr(env.data[k, :, 0], target).statistic > 0.9
    assert env.data.max() == pytest.approx(1.0)
    assert np.all((env.data >= 0) & (env.data <= 1))


def test_zero_raw_gives_zero_envelopes():
    raw = TrialSet(np.zeros((2, 9000, 2)), ["a", "b"], FS)
    env = extract_envelopes(raw)
    assert not np.any(env.data)


def test_envelope_properties():
    raw, _ = _bursts(trials=4, seed=3)
    base = extract_envelopes(raw)
    # determinism
    assert extract_envelopes(raw) == base
    # permutation equivariance
    perm = [2, 0, 3, 1]
    shuffled = extract_envelopes(raw.replace(data=raw.data[perm]))
    np.testing.assert_allclose(shuffled.data, base.data[perm], atol=1e-12)
    # scale invariance
    scaled = extract_envelopes(raw.replace(data=raw.data * 37.0))
    np.testing.assert_allclose(scaled.data, base.data, atol=1e-9)


def test_envelope_preconditions():
    raw, _ = _bursts(trials=1)
    with pytest.raises(ValidationError):
        extract_envelopes(raw.replace(sample_rate_hz=20000.0))
    with pytest.raises(TrialTooShort):
        extract_envelopes(raw, EnvelopeConfig(clip_len=61))
    short = extract_envelopes(raw, EnvelopeConfig(clip_len=30))
    assert short.n_timesteps == 30
