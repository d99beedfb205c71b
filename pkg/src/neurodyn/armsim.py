"""Synthetic 2-link planar arm driven by antagonistic muscle pairs.

The plant is deliberately simple: each muscle produces
``activation * Fmax * moment_arm`` of joint torque, activation follows its
excitation through a first-order lag, and the rigid-body dynamics are the
textbook planar double pendulum.  It exists to generate trials whose
kinematics and muscle activity are dynamically coupled, so the analysis
pipeline has a ground truth to recover.

Muscle order everywhere is ``(shoulder flexor, shoulder extensor,
elbow flexor, elbow extensor)``; the elbow pair stands in for biceps and
triceps.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NonFiniteState, ValidationError
from .trialdata import ChannelKind, ChannelSpec, TrialSet

MUSCLES = ("shoulder_flex", "shoulder_ext", "biceps", "triceps")
JOINTS = ("shoulder", "elbow")
# torque sign of each muscle on (shoulder, elbow)
_ACTION = np.array(
    [
        [1.0, 0.0],
        [-1.0, 0.0],
        [0.0, 1.0],
        [0.0, -1.0],
    ]
)

LOG_RATE_HZ = 200.0


@dataclass(frozen=True)
class ArmParams:
    l1: float = 0.1
    l2: float = 0.1
    m1: float = 0.05
    m2: float = 0.05
    moment_arms: tuple[float, ...] = (0.06, 0.06, 0.05, 0.05)
    fmax: tuple[float, ...] = (1.2, 1.2, 1.0, 1.0)
    tau_act: float = 0.02
    damping: float = 0.01
    sim_dt: float = 0.00125
    ctrl_dt: float = 0.0025
    gravity: float = 0.0
    q_min: tuple[float, float] = (-1.0, 0.0)
    q_max: tuple[float, float] = (2.0, 2.6)

    def __post_init__(self):
        object.__setattr__(self, "moment_arms", tuple(float(v) for v in self.moment_arms))
        object.__setattr__(self, "fmax", tuple(float(v) for v in self.fmax))
        object.__setattr__(self, "q_min", tuple(float(v) for v in self.q_min))
        object.__setattr__(self, "q_max", tuple(float(v) for v in self.q_max))
        for name in ("l1", "l2", "m1", "m2", "tau_act", "damping", "sim_dt", "ctrl_dt", "gravity"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if len(self.moment_arms) != 4 or len(self.fmax) != 4:
            raise ValidationError("need one moment arm and one Fmax per muscle (4)")
        if any(not 0.2 <= f <= 1.2 for f in self.fmax):
            raise ValidationError(f"Fmax must lie in [0.2, 1.2] N, got {self.fmax}")
        if any(r <= 0 for r in self.moment_arms):
            raise ValidationError("moment arms must be positive")
        if min(self.l1, self.l2, self.m1, self.m2) <= 0:
            raise ValidationError("link lengths and masses must be positive")
        if not self.tau_act > 0:
            raise ValidationError("tau_act must be > 0")
        if self.damping < 0:
            raise ValidationError("damping must be >= 0")
        if not self.sim_dt > 0:
            raise ValidationError("sim_dt must be > 0")
        ratio = self.ctrl_dt / self.sim_dt
        if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
            raise ValidationError("ctrl_dt must be an integer multiple of sim_dt")
        if not all(lo < hi for lo, hi in zip(self.q_min, self.q_max)):
            raise ValidationError("joint limits must satisfy q_min < q_max")

    @property
    def substeps(self) -> int:
        return int(round(self.ctrl_dt / self.sim_dt))

    @property
    def max_torque(self) -> np.ndarray:
        """Per-muscle torque at full activation."""
        return np.asarray(self.moment_arms) * np.asarray(self.fmax)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass(frozen=True)
class ArmState:
    q: np.ndarray
    qdot: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        for name, n in (("q", 2), ("qdot", 2), ("a", 4)):
            v = np.array(getattr(self, name), dtype=np.float64).reshape(n)
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def rest(cls, q=(0.2, 0.6)) -> "ArmState":
        return cls(q, np.zeros(2), np.zeros(4))


def mass_matrix(q, p: ArmParams) -> np.ndarray:
    lc1, lc2 = p.l1 / 2, p.l2 / 2
    i1, i2 = p.m1 * p.l1**2 / 12, p.m2 * p.l2**2 / 12
    c2 = math.cos(q[1])
    m11 = i1 + i2 + p.m1 * lc1**2 + p.m2 * (p.l1**2 + lc2**2 + 2 * p.l1 * lc2 * c2)
    m12 = i2 + p.m2 * (lc2**2 + p.l1 * lc2 * c2)
    m22 = i2 + p.m2 * lc2**2
    return np.array([[m11, m12], [m12, m22]])


def bias_forces(q, qdot, p: ArmParams) -> np.ndarray:
    """Coriolis/centrifugal plus gravity torques."""
    lc1, lc2 = p.l1 / 2, p.l2 / 2
    h = p.m2 * p.l1 * lc2 * math.sin(q[1])
    cor = np.array([-h * (2 * qdot[0] * qdot[1] + qdot[1] ** 2), h * qdot[0] ** 2])
    if p.gravity:
        g2 = p.m2 * lc2 * p.gravity * math.cos(q[0] + q[1])
        g1 = (p.m1 * lc1 + p.m2 * p.l1) * p.gravity * math.cos(q[0]) + g2
        cor = cor + np.array([g1, g2])
    return cor


def muscle_torque(a, p: ArmParams) -> np.ndarray:
    return (np.asarray(a) * p.max_torque) @ _ACTION


def kinetic_energy(state: ArmState, p: ArmParams) -> float:
    return 0.5 * float(state.qdot @ mass_matrix(state.q, p) @ state.qdot)


def step(state: ArmState, u, p: ArmParams) -> ArmState:
    """Advance one control interval with excitation ``u`` held constant.

    Activation uses the exact solution of ``da/dt = (u - a) / tau_act`` for
    piecewise-constant ``u``, so it never leaves [0, 1], and each substep
    applies the torque of the activation averaged over that substep.  The
    rigid body is integrated with semi-implicit Euler at ``sim_dt``; viscous
    damping is taken implicitly so it cannot destabilise light links.
    """
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    decay = math.exp(-p.sim_dt / p.tau_act)
    mean_gain = (p.tau_act / p.sim_dt) * (1.0 - decay)
    q = state.q.copy()
    qd = state.qdot.copy()
    a = state.a.copy()
    lo, hi = np.asarray(p.q_min), np.asarray(p.q_max)
    eye = np.eye(2)
    for _ in range(p.substeps):
        a_mean = u + (a - u) * mean_gain
        a = u + (a - u) * decay
        M = mass_matrix(q, p)
        rhs = M @ qd + p.sim_dt * (muscle_torque(a_mean, p) - bias_forces(q, qd, p))
        qd = np.linalg.solve(M + p.sim_dt * p.damping * eye, rhs)
        q = q + p.sim_dt * qd
        over = (q < lo) | (q > hi)
        if over.any():
            q = np.clip(q, lo, hi)
            qd = np.where(over, 0.0, qd)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
        raise NonFiniteState("arm integration diverged")
    return ArmState(q, qd, np.clip(a, 0.0, 1.0))


# ---------------------------------------------------------------------------
# reach generation


@dataclass(frozen=True)
class ReachScript:
    start_q: tuple[float, float] = (0.2, 0.6)
    target_q: tuple[float, float] = (0.6, 1.1)
    duration: float = 0.3
    trials: int = 46
    noise: float = 0.1
    seed: int = 0
    kp: float = 900.0
    cocontraction: float = 0.05
    emg_noise: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "start_q", tuple(float(v) for v in self.start_q))
        object.__setattr__(self, "target_q", tuple(float(v) for v in self.target_q))
        if len(self.start_q) != 2 or len(self.target_q) != 2:
            raise ValidationError("start_q and target_q need one angle per joint (2)")
        for name in ("duration", "noise", "kp", "cocontraction", "emg_noise"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("trials", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v:
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not self.duration >= 1.0 / LOG_RATE_HZ:
            raise ValidationError("duration must cover at least one 200 Hz sample")
        if self.seed < 0:
            raise ValidationError("seed must be >= 0")
        if self.trials < 1:
            raise ValidationError(f"trials must be an integer >= 1, got {self.trials}")
        if self.noise < 0 or self.emg_noise < 0:
            raise ValidationError("noise scales must be >= 0")
        if not self.kp > 0:
            raise ValidationError("kp must be > 0")
        if not 0 <= self.cocontraction < 1:
            raise ValidationError("cocontraction must be in [0, 1)")

    def n_samples(self) -> int:
        return int(round(self.duration * LOG_RATE_HZ))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def _smooth_noise(rng: np.random.Generator, n: int, dims: int, dt: float, tc: float = 0.03) -> np.ndarray:
    """Unit-variance Ornstein-Uhlenbeck noise, ``n`` samples spaced ``dt``."""
    phi = math.exp(-dt / tc)
    innov = rng.standard_normal((n, dims)) * math.sqrt(1 - phi * phi)
    out = np.empty((n, dims))
    x = rng.standard_normal(dims)
    for i in range(n):
        x = phi * x + innov[i]
        out[i] = x
    return out


def servo_excitation(state: ArmState, target, p: ArmParams, kp: float, cocontraction: float) -> np.ndarray:
    """Critically damped joint servo mapped onto antagonist excitations."""
    kd = 2.0 * math.sqrt(kp)
    qdd = kp * (np.asarray(target) - state.q) - kd * state.qdot
    torque = mass_matrix(state.q, p) @ qdd + bias_forces(state.q, state.qdot, p) + p.damping * state.qdot
    tmax = p.max_torque
    u = np.full(4, cocontraction)
    for j in range(2):
        flex, ext = 2 * j, 2 * j + 1
        if torque[j] >= 0:
            u[flex] += torque[j] / tmax[flex]
        else:
            u[ext] += -torque[j] / tmax[ext]
    return u


def simulate_reach(script: ReachScript, p: ArmParams, trial: int) -> dict[str, np.ndarray]:
    """Run one reach; returns logged arrays sampled at 200 Hz."""
    rng = np.random.default_rng([script.seed, trial])
    n_log = script.n_samples()
    ctrl_per_log = int(round(1.0 / (LOG_RATE_HZ * p.ctrl_dt)))
    if ctrl_per_log < 1 or abs(ctrl_per_log * p.ctrl_dt * LOG_RATE_HZ - 1) > 1e-9:
        raise ValidationError("ctrl_dt must divide the 200 Hz logging interval")
    n_ctrl = n_log * ctrl_per_log
    noise = script.noise * _smooth_noise(rng, n_ctrl, 4, p.ctrl_dt)
    emg_noise = script.emg_noise * _smooth_noise(rng, n_log, 4, 1.0 / LOG_RATE_HZ, tc=0.01)

    state = ArmState(script.start_q, np.zeros(2), np.full(4, script.cocontraction))
    log = {k: np.empty((n_log, d)) for k, d in (("q", 2), ("qdot", 2), ("torque", 2), ("a", 4))}
    for i in range(n_ctrl):
        if i % ctrl_per_log == 0:
            k = i // ctrl_per_log
            log["q"][k] = state.q
            log["qdot"][k] = state.qdot
            log["a"][k] = state.a
            log["torque"][k] = muscle_torque(state.a, p)
        u = servo_excitation(state, script.target_q, p, script.kp, script.cocontraction)
        state = step(state, np.clip(u + noise[i], 0.0, 1.0), p)
    log["emg"] = np.clip(log["a"] + emg_noise, 0.0, None)
    log["final_q"] = state.q
    return log


def reach_channels() -> list[ChannelSpec]:
    chans = [ChannelSpec(f"q_{j}", ChannelKind.JOINT_ANGLE, "rad") for j in JOINTS]
    chans += [ChannelSpec(f"qdot_{j}", ChannelKind.JOINT_VELOCITY, "rad/s") for j in JOINTS]
    chans += [ChannelSpec(f"tau_{j}", ChannelKind.OTHER, "N*m") for j in JOINTS]
    chans += [ChannelSpec(f"a_{m}", ChannelKind.MUSCLE_ACTIVATION, "normalized") for m in MUSCLES]
    chans += [ChannelSpec(f"emg_{m}", ChannelKind.EMG_ENVELOPE, "normalized") for m in MUSCLES]
    return chans


def generate_reaches(script: ReachScript, p: ArmParams | None = None) -> TrialSet:
    """Simulate ``script.trials`` reaches logged at 200 Hz.

    Channels: joint angles, velocities and muscle torques per joint,
    activations per muscle, and a pseudo-EMG envelope per muscle
    (activation plus smooth seeded noise).  Each trial draws its noise from
    ``default_rng([seed, trial])`` so trials are independent of each other
    and of generation order.
    """
    p = p or ArmParams()
    rows = []
    for t in range(script.trials):
        log = simulate_reach(script, p, t)
        rows.append(np.concatenate([log["q"], log["qdot"], log["torque"], log["a"], log["emg"]], axis=1))
    return TrialSet(np.stack(rows), reach_channels(), LOG_RATE_HZ)


def final_errors(script: ReachScript, p: ArmParams | None = None) -> np.ndarray:
    """Max-joint absolute error at the end of each reach."""
    p = p or ArmParams()
    tgt = np.asarray(script.target_q)
    return np.array([np.max(np.abs(simulate_reach(script, p, t)["final_q"] - tgt)) for t in range(script.trials)])


def synth_raw_emg(
    activations: TrialSet,
    fs: float = 30000.0,
    seed: int = 0,
    amplitude: float = 1e-3,
    background: float = 0.005,
) -> TrialSet:
    """Raw pseudo-EMG at ``fs``: white-noise carrier amplitude-modulated by activation.

    Every activation channel of ``activations`` (sampled at 200 Hz) is
    linearly interpolated to ``fs`` and multiplies a seeded Gaussian
    carrier; a small unmodulated background noise is added.  Output
    channels are named ``emg_<muscle>`` for input ``a_<muscle>``.
    """
    factor = fs / activations.sample_rate_hz
    if abs(factor - round(factor)) > 1e-9 or factor < 1:
        raise ValidationError("fs must be an integer multiple of the activation rate")
    factor = int(round(factor))
    T, N, C = activations.shape
    n_out = N * factor
    t_in = np.arange(N) / activations.sample_rate_hz
    t_out = np.arange(n_out) / fs
    out = np.empty((T, n_out, C))
    for t in range(T):
        rng = np.random.default_rng([seed, t, 1])
        carrier = rng.standard_normal((n_out, C))
        floor = rng.standard_normal((n_out, C))
        for c in range(C):
            env = np.interp(t_out, t_in, activations.data[t, :, c])
            out[t, :, c] = amplitude * (env * carrier[:, c] + background * floor[:, c])
    names = [ch.name[2:] if ch.name.startswith("a_") else ch.name for ch in activations.channels]
    chans = [ChannelSpec(f"emg_{n}", ChannelKind.RAW_EMG, "V") for n in names]
    return TrialSet(out, chans, fs)
