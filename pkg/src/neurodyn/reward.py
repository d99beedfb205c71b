"""Imitation reward terms, spectral smoothness metric and seed-sweep statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import (
    LengthMismatch,
    ShapeMismatch,
    TooFewSeeds,
    ValidationError,
)


@dataclass(frozen=True)
class RewardWeights:
    """Reward mixing weights.  Defaults are the joint-only setting."""

    lambda_joint: float = 5.0
    lambda_ctrl: float = 0.0
    lambda_energy: float = 0.0
    alpha_joint: float = 0.2

    def __post_init__(self):
        for name in ("lambda_joint", "lambda_ctrl", "lambda_energy", "alpha_joint"):
            v = float(getattr(self, name))
            object.__setattr__(self, name, v)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
        if not self.alpha_joint > 0:
            raise ValidationError("alpha_joint must be > 0")

    @classmethod
    def joint_only(cls) -> "RewardWeights":
        return cls(5.0, 0.0, 0.0, 0.2)

    @classmethod
    def physics_aware(cls) -> "RewardWeights":
        return cls(5.0, 0.15, 0.01, 0.2)

    def to_dict(self) -> dict:
        return asdict(self)


def _vec(x, name: str) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.size == 0:
        raise ValidationError(f"{name} must have at least one element")
    return x


def joint_reward(q, q_ref, alpha: float = 0.2) -> float:
    """``exp(-alpha * sum((q - q_ref)**2))``, in (0, 1]."""
    q = _vec(q, "q")
    q_ref = _vec(q_ref, "q_ref")
    if q.shape != q_ref.shape:
        raise LengthMismatch(f"q has shape {q.shape}, q_ref {q_ref.shape}")
    if not alpha > 0:
        raise ValidationError("alpha must be > 0")
    d = q - q_ref
    return float(np.exp(-alpha * np.dot(d, d)))


def control_cost(a) -> float:
    a = _vec(a, "a")
    return float(np.dot(a, a))


def energy_cost(v, f) -> float:
    """Sum over joints of ``|velocity| * |actuator force|``."""
    v = _vec(v, "v")
    f = _vec(f, "f")
    if v.shape != f.shape:
        raise LengthMismatch(f"v has shape {v.shape}, f {f.shape}")
    return float(np.dot(np.abs(v), np.abs(f)))


@dataclass(frozen=True)
class RewardTerms:
    r_joint: float
    c_ctrl: float
    c_energy: float
    r_total: float


def combine(r_joint: float, c_ctrl: float, c_energy: float, w: RewardWeights) -> float:
    return w.lambda_joint * r_joint - w.lambda_ctrl * c_ctrl - w.lambda_energy * c_energy


def total_reward(q, q_ref, a, v, f, w: RewardWeights) -> RewardTerms:
    rj = joint_reward(q, q_ref, w.alpha_joint)
    cc = control_cost(a)
    ce = energy_cost(v, f)
    return RewardTerms(rj, cc, ce, combine(rj, cc, ce, w))


@dataclass(frozen=True)
class RewardTrace:
    """Per-timestep reward terms; all arrays share one length."""

    r_joint: np.ndarray
    c_ctrl: np.ndarray
    c_energy: np.ndarray
    r_total: np.ndarray

    def __len__(self):
        return len(self.r_total)


def reward_trace(q, q_ref, a, v, f, w: RewardWeights) -> RewardTrace:
    """Vectorised :func:`total_reward` over rows (timesteps) of 2-D inputs."""
    q, q_ref, a, v, f = (np.atleast_2d(np.asarray(x, dtype=np.float64)) for x in (q, q_ref, a, v, f))
    if q.shape != q_ref.shape or v.shape != f.shape:
        raise LengthMismatch("joint or velocity/force arrays disagree in shape")
    n = q.shape[0]
    if not (a.shape[0] == v.shape[0] == n):
        raise LengthMismatch("all inputs need the same number of timesteps")
    d = q - q_ref
    rj = np.exp(-w.alpha_joint * np.einsum("ij,ij->i", d, d))
    cc = np.einsum("ij,ij->i", a, a)
    ce = np.einsum("ij,ij->i", np.abs(v), np.abs(f))
    return RewardTrace(rj, cc, ce, combine(rj, cc, ce, w))


# ---------------------------------------------------------------------------
# spectral metric


def clamp_band(band: tuple[float, float], fs: float) -> tuple[float, float]:
    lo, hi = float(band[0]), float(band[1])
    return lo, min(hi, fs / 2.0)


def band_is_clamped(band: tuple[float, float], fs: float) -> bool:
    return float(band[1]) > fs / 2.0


def high_freq_power(x, fs: float, band: tuple[float, float] = (10.0, 1000.0)) -> float:
    """Fraction of non-DC periodogram power inside ``band``.

    Bins with ``lo <= f < hi`` count; when ``hi`` reaches Nyquist (it is
    clamped there) the Nyquist bin counts as well, so bands
    ``[0, b1), [b1, b2), ..., [bk, fs/2]`` partition the spectrum.  A
    constant signal has no non-DC power and yields 0.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size < 8:
        raise ValidationError(f"need at least 8 samples, got {x.size}")
    lo, hi = float(band[0]), float(band[1])
    nyq = fs / 2.0
    if not lo < hi:
        raise ValidationError(f"band must be ascending, got {band}")
    if not lo < nyq:
        raise ValidationError(f"band lower edge {lo} must be below Nyquist {nyq}")
    hi = min(hi, nyq)

    spec = np.fft.rfft(x - x.mean())
    power = spec.real**2 + spec.imag**2
    freqs = np.fft.rfftfreq(x.size, d=1.0 / fs)
    # one-sided spectrum: interior bins stand for two two-sided bins
    weight = np.full(freqs.shape, 2.0)
    weight[0] = 1.0
    if x.size % 2 == 0:
        weight[-1] = 1.0
    power = power * weight
    power[0] = 0.0
    total = power.sum()
    if total <= 1e-300 or total <= 1e-24 * np.dot(x, x):
        return 0.0
    upper = freqs < hi
    if hi >= nyq:
        # by index: rfftfreq can put the Nyquist bin a hair above fs/2
        upper[:] = True
    inside = (freqs >= lo) & upper
    inside[0] = False
    return float(power[inside].sum() / total)


def mae(x, y) -> float:
    """Mean absolute error over every trial and timestep."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeMismatch(f"shapes differ: {x.shape} vs {y.shape}")
    if x.size == 0:
        raise ShapeMismatch("empty inputs")
    return float(np.mean(np.abs(x - y)))


# ---------------------------------------------------------------------------
# seed sweeps


@dataclass(frozen=True)
class SweepPoint:
    param_value: float
    per_seed_values: tuple[float, ...]
    mean: float
    ci95_lo: float
    ci95_hi: float

    @property
    def n(self) -> int:
        return len(self.per_seed_values)

    @property
    def half_width(self) -> float:
        return (self.ci95_hi - self.ci95_lo) / 2.0


def t_interval(values: Sequence[float], level: float = 0.95) -> tuple[float, float, float]:
    """Student-t confidence interval ``(mean, lo, hi)`` of a small sample."""
    v = np.asarray(values, dtype=np.float64)
    n = v.size
    if n < 2:
        raise TooFewSeeds(f"need at least 2 seeds, got {n}")
    if np.all(v == v[0]):
        m = float(v[0])
        return m, m, m
    m = float(v.mean())
    s = float(v.std(ddof=1))
    half = float(stats.t.ppf(0.5 + level / 2.0, n - 1)) * s / math.sqrt(n)
    return m, m - half, m + half


def aggregate_sweep(points: Mapping[float, Sequence[float]]) -> list[SweepPoint]:
    """Mean and 95% t-interval per parameter value, ascending by parameter."""
    out = []
    for param in sorted(points):
        vals = tuple(float(v) for v in points[param])
        m, lo, hi = t_interval(vals)
        out.append(SweepPoint(float(param), vals, m, lo, hi))
    return out
