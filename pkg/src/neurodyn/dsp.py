"""EMG envelope extraction.

Chain applied to every raw trial and channel::

    bandpass (Butterworth) -> full-wave rectify -> lowpass (Butterworth)
    -> block-average downsample -> clip to a fixed length

followed by per-channel percentile normalisation pooled over all trials.
Filters are designed here as cascades of second-order sections via the
bilinear transform with frequency pre-warping.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal

from .errors import (
    EmptyInput,
    InvalidCutoff,
    OddOrder,
    TooShort,
    TrialTooShort,
    ValidationError,
)
from .trialdata import ChannelKind, ChannelSpec, TrialSet


@dataclass(frozen=True)
class BiquadSection:
    """``H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)``."""

    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def __post_init__(self):
        roots = np.roots([1.0, self.a1, self.a2])
        if not np.all(np.abs(roots) < 1.0):
            raise ValidationError(f"unstable biquad: pole radii {np.abs(roots)}")

    def response(self, z: np.ndarray) -> np.ndarray:
        zi = 1.0 / z
        return (self.b0 + self.b1 * zi + self.b2 * zi * zi) / (1.0 + self.a1 * zi + self.a2 * zi * zi)


@dataclass(frozen=True)
class BiquadCascade:
    sections: tuple[BiquadSection, ...]
    description: str = ""

    @property
    def order(self) -> int:
        return 2 * len(self.sections)

    @property
    def sos(self) -> np.ndarray:
        """Second-order-section matrix in ``scipy.signal`` layout."""
        return np.array([[s.b0, s.b1, s.b2, 1.0, s.a1, s.a2] for s in self.sections])

    def frequency_response(self, freqs_hz, fs: float) -> np.ndarray:
        """Complex response at the given frequencies."""
        z = np.exp(1j * 2.0 * np.pi * np.asarray(freqs_hz, dtype=float) / fs)
        h = np.ones_like(z)
        for s in self.sections:
            h = h * s.response(z)
        return h

    def gain_db(self, freqs_hz, fs: float) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20.0 * np.log10(np.abs(self.frequency_response(freqs_hz, fs)))


def _butter_sections(order: int, fc: float, fs: float, highpass: bool) -> list[BiquadSection]:
    # pre-warped analog cutoff, normalised so the bilinear constant is 1
    w = math.tan(math.pi * fc / fs)
    w2 = w * w
    sections = []
    for k in range(order // 2):
        # analog prototype pole pair -sin(theta) +/- j cos(theta)
        theta = math.pi * (2 * k + 1) / (2 * order)
        two_zeta = 2.0 * math.sin(theta)  # = 1/Q
        norm = 1.0 / (1.0 + two_zeta * w + w2)
        a1 = 2.0 * (w2 - 1.0) * norm
        a2 = (1.0 - two_zeta * w + w2) * norm
        if highpass:
            b0 = norm
            b1 = -2.0 * norm
        else:
            b0 = w2 * norm
            b1 = 2.0 * b0
        sections.append(BiquadSection(b0, b1, b0, a1, a2))
    return sections


def design_butterworth(order: int, kind: str, cutoffs, fs: float) -> BiquadCascade:
    """Butterworth lowpass or bandpass as a cascade of biquads.

    Parameters
    ----------
    order : int
        Even filter order per edge (4 gives 2 sections for a lowpass).
    kind : {"lowpass", "bandpass"}
    cutoffs : float or (float, float)
        -3 dB frequencies in Hz.
    fs : float
        Sample rate in Hz.

    Notes
    -----
    A bandpass is the cascade of an ``order``-th lowpass at the upper edge and
    an ``order``-th highpass at the lower edge, giving ``order`` sections.
    """
    if order < 2 or order % 2:
        raise OddOrder(f"order must be even and >= 2, got {order}")
    if fs <= 0:
        raise InvalidCutoff(f"sample rate must be positive, got {fs}")
    nyq = fs / 2.0
    cut = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    if kind == "lowpass":
        if cut.size != 1:
            raise InvalidCutoff("lowpass takes exactly one cutoff")
    elif kind == "bandpass":
        if cut.size != 2 or not cut[0] < cut[1]:
            raise InvalidCutoff("bandpass takes two ascending cutoffs")
    else:
        raise ValidationError(f"unknown filter kind {kind!r}")
    if np.any(cut <= 0) or np.any(cut >= nyq):
        raise InvalidCutoff(f"cutoffs {cut.tolist()} must lie strictly inside (0, {nyq})")

    if kind == "lowpass":
        sections = _butter_sections(order, cut[0], fs, highpass=False)
        desc = f"lowpass {cut[0]:g} Hz order {order} @{fs:g} Hz"
    else:
        sections = _butter_sections(order, cut[1], fs, highpass=False)
        sections += _butter_sections(order, cut[0], fs, highpass=True)
        desc = f"bandpass {cut[0]:g}-{cut[1]:g} Hz order {order} @{fs:g} Hz"
    return BiquadCascade(tuple(sections), desc)


def filter_zero_phase(cascade: BiquadCascade, x, axis: int = -1) -> np.ndarray:
    """Forward-backward filtering with odd-reflection edge padding.

    The pad length is three times the cascade order.  Works along ``axis``
    so whole ``(trials, samples)`` blocks can be filtered at once.
    """
    x = np.asarray(x, dtype=np.float64)
    padlen = 3 * cascade.order
    if x.shape[axis] <= padlen:
        raise TooShort(f"need more than {padlen} samples, got {x.shape[axis]}")
    return signal.sosfiltfilt(cascade.sos, x, axis=axis, padtype="odd", padlen=padlen)


def rectify(x) -> np.ndarray:
    return np.abs(np.asarray(x, dtype=np.float64))


def block_downsample(x, factor: int, axis: int = -1) -> np.ndarray:
    """Average consecutive non-overlapping blocks; a trailing partial block is dropped."""
    x = np.asarray(x, dtype=np.float64)
    if int(factor) != factor or factor < 1:
        raise ValidationError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    n = x.shape[axis]
    if n < factor or n == 0:
        raise EmptyInput(f"{n} samples cannot fill one block of {factor}")
    m = n // factor
    x = np.moveaxis(x, axis, -1)[..., : m * factor]
    out = x.reshape(*x.shape[:-1], m, factor).mean(axis=-1)
    return np.moveaxis(out, -1, axis)


@dataclass(frozen=True)
class EnvelopeConfig:
    fs_in_hz: float = 30000.0
    band_lo_hz: float = 20.0
    band_hi_hz: float = 1000.0
    lp_hz: float = 50.0
    fs_out_hz: float = 200.0
    clip_len: int = 60
    norm_percentile: float = 98.0
    filter_order: int = 4

    def __post_init__(self):
        for name in ("fs_in_hz", "band_lo_hz", "band_hi_hz", "lp_hz", "fs_out_hz", "norm_percentile"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("clip_len", "filter_order"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not 0 < self.band_lo_hz < self.band_hi_hz < self.fs_in_hz / 2:
            raise ValidationError("need 0 < band_lo_hz < band_hi_hz < fs_in_hz/2")
        if not 0 < self.lp_hz < self.fs_out_hz / 2 <= self.fs_in_hz / 2:
            raise ValidationError("need 0 < lp_hz < fs_out_hz/2 <= fs_in_hz/2")
        ratio = self.fs_in_hz / self.fs_out_hz
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ValidationError(f"fs_in_hz/fs_out_hz must be a positive integer, got {ratio}")
        if self.clip_len < 1:
            raise ValidationError(f"clip_len must be positive, got {self.clip_len}")
        if self.filter_order < 2 or self.filter_order % 2:
            raise ValidationError(f"filter_order must be even and >= 2, got {self.filter_order}")
        if not 0 < self.norm_percentile <= 100:
            raise ValidationError("norm_percentile must be in (0, 100]")

    @property
    def downsample_factor(self) -> int:
        return int(round(self.fs_in_hz / self.fs_out_hz))

    def to_dict(self) -> dict:
        return asdict(self)


def envelope_trace(raw, cfg: EnvelopeConfig) -> np.ndarray:
    """Unnormalised envelope of raw samples along the last axis."""
    band = design_butterworth(cfg.filter_order, "bandpass", (cfg.band_lo_hz, cfg.band_hi_hz), cfg.fs_in_hz)
    lowpass = design_butterworth(cfg.filter_order, "lowpass", cfg.lp_hz, cfg.fs_in_hz)
    x = filter_zero_phase(band, raw)
    x = filter_zero_phase(lowpass, rectify(x))
    x = block_downsample(x, cfg.downsample_factor)
    if x.shape[-1] < cfg.clip_len:
        raise TrialTooShort(f"envelope has {x.shape[-1]} samples, need {cfg.clip_len}")
    return x[..., : cfg.clip_len]


def percentile_normalize(values: np.ndarray, percentile: float) -> np.ndarray:
    """Divide by the pooled percentile and clamp to [0, 1]; all-zero stays zero."""
    ref = np.percentile(values, percentile)
    if not ref > 0:
        return np.zeros_like(values)
    return np.clip(values / ref, 0.0, 1.0)


def extract_envelopes(raw: TrialSet, cfg: EnvelopeConfig | None = None) -> TrialSet:
    """Turn raw EMG trials into normalised envelopes sampled at ``fs_out_hz``."""
    cfg = cfg or EnvelopeConfig()
    if not math.isclose(raw.sample_rate_hz, cfg.fs_in_hz, rel_tol=1e-12):
        raise ValidationError(
            f"raw sample rate {raw.sample_rate_hz} Hz does not match fs_in_hz {cfg.fs_in_hz}"
        )
    need = cfg.clip_len * cfg.downsample_factor
    if raw.n_timesteps < need:
        raise TrialTooShort(f"trials have {raw.n_timesteps} samples, need at least {need}")
    T, _, C = raw.shape
    out = np.zeros((T, cfg.clip_len, C))
    if T:
        for c in range(C):
            env = envelope_trace(raw.data[:, :, c], cfg)
            out[:, :, c] = percentile_normalize(env, cfg.norm_percentile)
    channels = [ChannelSpec(ch.name, ChannelKind.EMG_ENVELOPE, "normalized") for ch in raw.channels]
    return TrialSet(out, channels, cfg.fs_out_hz)
