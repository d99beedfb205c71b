"""``neurodyn`` command line.

Exit codes: 0 success, 1 I/O failure, 2 validation error (including bad
flags).  Derived numeric tables are written with ``%.10g``; trial-data
CSVs use the shortest round-trip representation.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .armsim import generate_reaches, synth_raw_emg
from .config import RunConfig, load_config
from .dsp import extract_envelopes
from .edm import EmbeddingConfig, cross_predict, default_threads, param_search
from .errors import IoFailure, NeurodynError, ValidationError
from .pca import project_top3
from .plots import Panel, Series, render
from .reward import RewardWeights, aggregate_sweep, band_is_clamped, clamp_band, high_freq_power, mae, reward_trace
from .trialdata import FORMATS, ChannelKind, TrialSet, concat_channels, load_trialset, save_trialset, select_channels


def _num(v) -> str:
    return "%.10g" % v


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in r])
    _write_text(path, buf.getvalue())


def _write_json(path: Path, doc) -> None:
    _write_text(path, json.dumps(doc, indent=2) + "\n")


def _save_set(ts: TrialSet, path: Path, fmt: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {path.parent}: {exc}") from exc
    save_trialset(ts, path, fmt)


def _prefix(out: str) -> Path:
    return Path(out)


def _with_suffix(prefix: Path, tail: str) -> Path:
    return prefix.with_name(prefix.name + tail)


def _load_many(paths, fmt: str) -> TrialSet:
    sets = [load_trialset(p, fmt) for p in paths]
    return sets[0] if len(sets) == 1 else concat_channels(sets)


def _names(text: str | None) -> list[str]:
    if not text:
        return []
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_range(text: str) -> list[int]:
    """``"1..6"`` (inclusive, either direction) or ``"1,2,5"``."""
    try:
        if ".." in text:
            a, b = (int(t) for t in text.split("..", 1))
            step = 1 if b >= a else -1
            return list(range(a, b + step, step))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ValidationError(f"bad integer range {text!r}; use 'a..b' or 'a,b,c'") from None


def _threads(args) -> int:
    if getattr(args, "threads", None):
        if args.threads < 1:
            raise ValidationError("--threads must be >= 1")
        return args.threads
    return default_threads()


# ---------------------------------------------------------------------------
# commands


def cmd_config_show(args, cfg: RunConfig) -> int:
    sys.stdout.write(cfg.dumps())
    return 0


def cmd_synth(args, cfg: RunConfig) -> int:
    script = cfg.synth
    overrides = {k: v for k, v in (("seed", args.seed), ("trials", args.trials), ("noise", args.noise)) if v is not None}
    if overrides:
        try:
            script = dataclasses.replace(script, **overrides)
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc)) from None
    ts = generate_reaches(script, cfg.arm)
    prefix = _prefix(args.out)
    kin_names = [c.name for c in ts.channels if c.name.startswith(("q_", "qdot_", "tau_"))]
    act_names = [c.name for c in ts.channels if c.name.startswith(("a_", "emg_"))]
    _save_set(select_channels(ts, kin_names), _with_suffix(prefix, "_kinematics.csv"), args.format)
    _save_set(select_channels(ts, act_names), _with_suffix(prefix, "_activations.csv"), args.format)
    raw_src = _names(args.raw_muscles) or ["a_biceps", "a_triceps"]
    raw = synth_raw_emg(select_channels(ts, raw_src), fs=args.emg_fs, seed=script.seed)
    _save_set(raw, _with_suffix(prefix, "_raw_emg.csv"), args.format)
    print(f"wrote {ts.n_trials} trials x {ts.n_timesteps} samples to {prefix}_{{kinematics,activations,raw_emg}}.csv")
    return 0


def cmd_emg_process(args, cfg: RunConfig) -> int:
    env_cfg = cfg.envelope
    if args.clip_len is not None:
        env_cfg = dataclasses.replace(env_cfg, clip_len=args.clip_len)
    raw = load_trialset(args.input, args.format, sample_rate_hz=args.fs)
    env = extract_envelopes(raw, env_cfg)
    prefix = _prefix(args.out)
    _save_set(env, _with_suffix(prefix, "_envelopes.csv"), args.format)
    summary = {
        "n_trials": env.n_trials,
        "clip_len": env.n_timesteps,
        "sample_rate_hz": env.sample_rate_hz,
        "channels": env.channel_names,
        "min": float(env.data.min()) if env.data.size else 0.0,
        "max": float(env.data.max()) if env.data.size else 0.0,
        "config": {"envelope": env_cfg.to_dict()},
    }
    _write_json(_with_suffix(prefix, "_summary.json"), summary)
    return 0


def _edm_config(args, cfg: RunConfig, sources) -> EmbeddingConfig:
    e = cfg.edm
    upd = {}
    for flag, key in (("E", "E"), ("tau", "tau"), ("Tp", "Tp"), ("theiler", "theiler"), ("mode", "mode")):
        v = getattr(args, flag)
        if v is not None:
            upd[key] = v
    e = dataclasses.replace(e, **upd)
    return dataclasses.replace(e, columns=tuple(sources), target=args.target)


def _forecast_svg(res, title: str) -> Panel:
    first = res.origins[:, 0] == res.origins[0, 0] if res.n_pred else np.zeros(0, bool)
    x = res.origins[first, 1]
    return Panel(
        title,
        [Series(x, res.observed[first], "observed"), Series(x, res.predicted[first], "predicted")],
        "timestep (first query trial)",
        "value",
    )


def cmd_edm(args, cfg: RunConfig) -> int:
    ts = _load_many(args.input, args.format)
    sources = _names(args.source) or list(cfg.edm.columns)
    if not sources:
        raise ValidationError("--source is required")
    if not args.target:
        raise ValidationError("--target is required")
    split = args.split or cfg.search.split
    prefix = _prefix(args.out)
    panels = []
    ecfg = _edm_config(args, cfg, sources)
    summary = {}

    if args.sweep:
        E_range = _int_range(args.E_range) if args.E_range else list(cfg.search.E_range)
        tau_range = _int_range(args.tau_range) if args.tau_range else list(cfg.search.tau_range)
        Tp_range = _int_range(args.Tp_range) if args.Tp_range else list(cfg.search.Tp_range)
        src = sources[0] if len(sources) == 1 else sources
        rows = param_search(ts, src, args.target, E_range, tau_range, Tp_range, split, _threads(args))
        _write_csv(
            _with_suffix(prefix, "_grid.csv"),
            ["E", "tau", "Tp", "rho", "n_pred", "best"],
            [(r.E, r.tau, r.Tp, float(r.rho), r.n_pred, int(r.best)) for r in rows],
        )
        best = next(r for r in rows if r.best)
        ecfg = dataclasses.replace(ecfg, E=best.E, tau=best.tau, Tp=best.Tp)
        summary["best"] = {"E": best.E, "tau": best.tau, "Tp": best.Tp, "rho": best.rho}
        summary["grid_rows"] = len(rows)
        for name, key in (("E", "E"), ("tau", "tau"), ("Tp", "Tp")):
            # rho profile along one axis with the other two at the optimum
            others = [k for k in ("E", "tau", "Tp") if k != key]
            sel = [r for r in rows if all(getattr(r, o) == getattr(best, o) for o in others)]
            sel.sort(key=lambda r: getattr(r, key))
            panels.append(
                Panel(f"rho vs {name}", [Series([getattr(r, key) for r in sel], [r.rho for r in sel], "simplex rho")], name, "rho")
            )

    res = cross_predict(ts, sources, args.target, ecfg, split)
    _write_csv(
        _with_suffix(prefix, "_forecast.csv"),
        ["trial", "timestep", "observed", "predicted"],
        [(int(o[0]), int(o[1]), float(ob), float(pr)) for o, ob, pr in zip(res.origins, res.observed, res.predicted)],
    )
    summary.update(res.summary())
    summary["split"] = split
    summary["source"] = sources
    summary["target"] = args.target
    summary["config"] = {"edm": ecfg.to_dict()}
    _write_json(_with_suffix(prefix, "_summary.json"), summary)
    panels.insert(0, _forecast_svg(res, f"{'+'.join(sources)} -> {args.target} (rho={res.rho:.3f})"))
    panels.insert(1, Panel("predicted vs observed", [Series(res.observed, res.predicted, "", scatter=True)], "observed", "predicted"))
    _write_text(_with_suffix(prefix, "_edm.svg"), render(panels, columns=2))
    return 0


def _pick(ts: TrialSet, explicit: str | None, kind: ChannelKind, prefix: str) -> list[str]:
    if explicit:
        return _names(explicit)
    by_kind = [c.name for c in ts.channels if c.kind == kind]
    if by_kind:
        return by_kind
    return [c.name for c in ts.channels if c.name.startswith(prefix)]


def _sweep(args) -> list:
    points: dict[float, list[float]] = {}
    try:
        fh = open(args.sweep_in, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {args.sweep_in}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"param", "value"} <= set(reader.fieldnames):
            raise ValidationError(f"{args.sweep_in}: need columns 'param' and 'value'")
        for row in reader:
            try:
                points.setdefault(float(row["param"]), []).append(float(row["value"]))
            except ValueError:
                raise ValidationError(f"{args.sweep_in}: non-numeric row {row}") from None
    return aggregate_sweep(points)


def cmd_reward_eval(args, cfg: RunConfig) -> int:
    prefix = _prefix(args.out)
    w = cfg.reward
    if args.weights == "joint-only":
        w = RewardWeights.joint_only()
    elif args.weights == "physics-aware":
        w = RewardWeights.physics_aware()
    upd = {k: getattr(args, k) for k in ("lambda_joint", "lambda_ctrl", "lambda_energy", "alpha_joint") if getattr(args, k) is not None}
    if upd:
        w = dataclasses.replace(w, **upd)
    summary: dict = {"config": {"reward": w.to_dict()}}

    if args.sweep_in:
        pts = _sweep(args)
        _write_csv(
            _with_suffix(prefix, "_sweep.csv"),
            ["param", "mean", "ci_lo", "ci_hi", "n"],
            [(p.param_value, p.mean, p.ci95_lo, p.ci95_hi, p.n) for p in pts],
        )
        summary["sweep_points"] = len(pts)
        panels = [Panel("seed sweep (mean, 95% CI)", [
            Series([p.param_value for p in pts], [p.mean for p in pts], "mean"),
            Series([p.param_value for p in pts], [p.ci95_lo for p in pts], "ci lo"),
            Series([p.param_value for p in pts], [p.ci95_hi for p in pts], "ci hi"),
        ], "parameter", "value")]
        _write_text(_with_suffix(prefix, "_sweep.svg"), render(panels, 1))

    if args.rollout:
        if not args.reference:
            raise ValidationError("--reference is required with --rollout")
        roll = _load_many(args.rollout, args.format)
        ref = load_trialset(args.reference, args.format)
        joints = _pick(roll, args.joints, ChannelKind.JOINT_ANGLE, "q_")
        vels = _pick(roll, args.velocities, ChannelKind.JOINT_VELOCITY, "qdot_")
        acts = _pick(roll, args.actions, ChannelKind.MUSCLE_ACTIVATION, "a_")
        forces = _names(args.forces) or [c.name for c in roll.channels if c.name.startswith("tau_")]
        if not joints or not acts:
            raise ValidationError("could not determine joint or action channels; pass --joints/--actions")
        if ref.shape[:2] != roll.shape[:2]:
            raise ValidationError(f"reference shape {ref.shape[:2]} != rollout shape {roll.shape[:2]}")
        T, N, _ = roll.shape
        q = select_channels(roll, joints).data.reshape(T * N, -1)
        q_ref = select_channels(ref, joints).data.reshape(T * N, -1)
        a = select_channels(roll, acts).data.reshape(T * N, -1)
        if vels and forces:
            v = select_channels(roll, vels).data.reshape(T * N, -1)
            f = select_channels(roll, forces).data.reshape(T * N, -1)
        else:
            if w.lambda_energy:
                raise ValidationError("energy cost needs --velocities and --forces channels")
            v = f = np.zeros((T * N, 1))
        tr = reward_trace(q, q_ref, a, v, f, w)
        idx = [(t, n) for t in range(T) for n in range(N)]
        _write_csv(
            _with_suffix(prefix, "_trace.csv"),
            ["trial", "timestep", "r_joint", "c_ctrl", "c_energy", "r_total"],
            [(t, n, float(tr.r_joint[i]), float(tr.c_ctrl[i]), float(tr.c_energy[i]), float(tr.r_total[i])) for i, (t, n) in enumerate(idx)],
        )
        summary["mean_r_total"] = float(np.mean(tr.r_total))
        band = (args.band_lo, args.band_hi)
        fs = roll.sample_rate_hz
        if band_is_clamped(band, fs):
            lo, hi = clamp_band(band, fs)
            print(f"note: band upper edge {band[1]:g} Hz exceeds Nyquist; clamped to {hi:g} Hz", file=sys.stderr)
        hf = {}
        for name in acts:
            x = roll.channel(name)
            hf[name] = float(np.mean([high_freq_power(x[t], fs, band) for t in range(T)]))
        summary["hf_power"] = hf
        summary["band_hz"] = list(clamp_band(band, fs))
        if args.emg:
            emg = load_trialset(args.emg, args.format)
            emg_names = _names(args.emg_channels) or emg.channel_names
            if len(emg_names) != len(acts):
                raise ValidationError(f"{len(acts)} action channels but {len(emg_names)} EMG channels to pair")
            summary["mae"] = {
                f"{a_name}:{e_name}": mae(roll.channel(a_name), emg.channel(e_name))
                for a_name, e_name in zip(acts, emg_names)
            }
        panels = [Panel("reward per timestep (trial 0)", [
            Series(np.arange(N), tr.r_total[:N], "r_total"),
            Series(np.arange(N), w.lambda_joint * tr.r_joint[:N], "joint term"),
        ], "timestep", "reward")]
        _write_text(_with_suffix(prefix, "_reward.svg"), render(panels, 1))

    if not args.rollout and not args.sweep_in:
        raise ValidationError("nothing to do: pass --rollout/--reference and/or --sweep-in")
    _write_json(_with_suffix(prefix, "_summary.json"), summary)
    return 0


def cmd_pca(args, cfg: RunConfig) -> int:
    acts = load_trialset(args.input, args.format)
    n = args.n_components or cfg.pca_components
    emb = project_top3(acts, args.behavior, n)
    prefix = _prefix(args.out)
    T, N, K = emb.data.shape
    header = ["clip", "timestep"] + [f"pc{i + 1}" for i in range(K)]
    if emb.behavior is not None:
        header.append(emb.behavior_name)
    rows = []
    for t in range(T):
        for s in range(N):
            r = [t, s] + [float(v) for v in emb.data[t, s]]
            if emb.behavior is not None:
                r.append(float(emb.behavior[t, s]))
            rows.append(r)
    _write_csv(_with_suffix(prefix, "_embedding.csv"), header, rows)
    _write_json(
        _with_suffix(prefix, "_summary.json"),
        {
            "variance_ratio": [float(v) for v in emb.variance_ratio],
            "variance_percent": emb.percent_labels(),
            "total_ratio": float(np.sum(emb.variance_ratio)),
            "shape": [T, N, K],
            "behavior": emb.behavior_name,
            "config": {"pca": {"n_components": n}},
        },
    )
    labels = emb.percent_labels()
    panels = []
    flat = emb.data.reshape(T * N, K)
    for i in range(K):
        for j in range(i + 1, K):
            panels.append(Panel(
                f"PC{i + 1} vs PC{j + 1}",
                [Series(flat[:, i], flat[:, j], "", scatter=True)],
                f"PC{i + 1} ({labels[i]})",
                f"PC{j + 1} ({labels[j]})",
            ))
    _write_text(_with_suffix(prefix, "_pca.svg"), render(panels, columns=3))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neurodyn", description="EMG envelopes, imitation rewards, PCA and simplex forecasting.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt=True, threads=False):
        p.add_argument("--config", help="JSON run configuration (flags override it)")
        if fmt:
            p.add_argument("--format", choices=FORMATS, default="csv_wide", help="trial-data CSV layout (default csv_wide)")
        if threads:
            p.add_argument("--threads", type=int, help="worker threads (default NEURODYN_THREADS or all cores)")

    p = sub.add_parser("emg-process", help="raw EMG -> normalised envelopes")
    p.add_argument("input", help="raw EMG trial-data CSV")
    p.add_argument("--out", required=True, help="output prefix")
    p.add_argument("--clip-len", type=int, help="override envelope.clip_len")
    p.add_argument("--fs", type=float, help="override the input sample rate in Hz")
    common(p)
    p.set_defaults(func=cmd_emg_process)

    p = sub.add_parser("edm", help="simplex cross-prediction and (E, tau, Tp) search")
    p.add_argument("--in", dest="input", action="append", required=True, help="trial-data CSV (repeat to merge channels)")
    p.add_argument("--source", help="comma-separated source channel(s)")
    p.add_argument("--target", required=True, help="target channel")
    p.add_argument("--E", type=int, help="embedding dimension")
    p.add_argument("--tau", type=int, help="delay in timesteps (negative = past)")
    p.add_argument("--Tp", type=int, help="prediction horizon in timesteps")
    p.add_argument("--theiler", type=int, help="temporal exclusion radius")
    p.add_argument("--mode", choices=("univariate_delay", "multivariate_direct"), help="delay-embed one source, or use several sources directly at lag 0")
    p.add_argument("--split", choices=("leave_one_trial_out", "half_split"), help="library/query split (default leave_one_trial_out)")
    p.add_argument("--sweep", action="store_true", help="search the (E, tau, Tp) grid")
    p.add_argument("--E-range", help="e.g. 1..6")
    p.add_argument("--tau-range", help="e.g. --tau-range=-1..-4 (use = for negative values)")
    p.add_argument("--Tp-range", help="e.g. 1..10")
    p.add_argument("--out", required=True, help="output prefix")
    common(p, threads=True)
    p.set_defaults(func=cmd_edm)

    p = sub.add_parser("reward-eval", help="reward trace, spectral metric, EMG error, seed sweeps")
    p.add_argument("--rollout", action="append", help="rollout trial-data CSV (repeat to merge channels)")
    p.add_argument("--reference", help="reference kinematics CSV")
    p.add_argument("--joints", help="joint-angle channels (default: kind joint_angle or q_*)")
    p.add_argument("--velocities", help="joint-velocity channels (default: kind joint_velocity or qdot_*)")
    p.add_argument("--actions", help="action channels (default: kind muscle_activation or a_*)")
    p.add_argument("--forces", help="actuator force/torque channels (default: tau_*)")
    p.add_argument("--weights", choices=("joint-only", "physics-aware"), help="preset reward weights")
    p.add_argument("--lambda-joint", type=float, help="joint tracking weight")
    p.add_argument("--lambda-ctrl", type=float, help="control cost weight")
    p.add_argument("--lambda-energy", type=float, help="energy cost weight")
    p.add_argument("--alpha-joint", type=float, help="joint reward exponential scale")
    p.add_argument("--band-lo", type=float, default=10.0, help="spectral band lower edge in Hz (default 10)")
    p.add_argument("--band-hi", type=float, default=1000.0, help="spectral band upper edge in Hz (default 1000)")
    p.add_argument("--emg", help="EMG envelope CSV paired with the action channels for MAE")
    p.add_argument("--emg-channels", help="EMG channels in action-channel order")
    p.add_argument("--sweep-in", help="per-seed CSV with columns param,value (other columns ignored)")
    p.add_argument("--out", required=True, help="output prefix")
    common(p)
    p.set_defaults(func=cmd_reward_eval)

    p = sub.add_parser("pca", help="top principal components of activations")
    p.add_argument("input", help="activation trial-data CSV (clips x timesteps x units)")
    p.add_argument("--behavior", help="channel carried alongside the projection")
    p.add_argument("--n-components", type=int, help="components kept (default 3)")
    p.add_argument("--out", required=True, help="output prefix")
    common(p)
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("synth-generate", help="simulate reaches of the synthetic arm")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--trials", type=int, help="number of reaches (default 46)")
    p.add_argument("--noise", type=float, help="excitation noise scale")
    p.add_argument("--emg-fs", type=float, default=30000.0, help="raw pseudo-EMG rate in Hz (default 30000)")
    p.add_argument("--raw-muscles", help="activation channels rendered as raw EMG (default a_biceps,a_triceps)")
    p.add_argument("--out", required=True, help="output prefix")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("config", help="configuration utilities")
    csub = p.add_subparsers(dest="config_command", required=True)
    s = csub.add_parser("show", help="print the resolved configuration")
    s.add_argument("--config", help="JSON run configuration")
    s.set_defaults(func=cmd_config_show)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(getattr(args, "config", None))
        return args.func(args, cfg)
    except ValidationError as exc:
        print(f"neurodyn: error: {exc}", file=sys.stderr)
        return 2
    except (IoFailure, OSError) as exc:
        print(f"neurodyn: error: {exc}", file=sys.stderr)
        return 1
    except NeurodynError as exc:
        print(f"neurodyn: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
