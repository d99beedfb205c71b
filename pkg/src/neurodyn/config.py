"""JSON run configuration.

Layout (every section and key optional)::

    {
      "envelope": {EnvelopeConfig fields},
      "reward":   {RewardWeights fields},
      "edm":      {EmbeddingConfig fields, "E_range", "tau_range", "Tp_range", "split"},
      "pca":      {"n_components"},
      "synth":    {ReachScript fields, "arm": {ArmParams fields}}
    }

Unknown keys are rejected.  :meth:`RunConfig.to_dict` returns the fully
resolved document, which parses back to an identical config.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .armsim import ArmParams, ReachScript
from .dsp import EnvelopeConfig
from .edm import SPLITS, EmbeddingConfig
from .errors import IoFailure, ValidationError
from .reward import RewardWeights

SECTIONS = ("envelope", "reward", "edm", "pca", "synth")


@dataclass(frozen=True)
class SearchSpace:
    E_range: tuple[int, ...] = (1, 2, 3, 4, 5)
    tau_range: tuple[int, ...] = (-1, -2, -3)
    Tp_range: tuple[int, ...] = (1, 2, 3, 4, 5)
    split: str = "leave_one_trial_out"

    def __post_init__(self):
        for name in ("E_range", "tau_range", "Tp_range"):
            vals = tuple(getattr(self, name))
            if not vals or any(not isinstance(v, int) or isinstance(v, bool) for v in vals):
                raise ValidationError(f"edm.{name} must be a nonempty list of integers")
            object.__setattr__(self, name, vals)
        if self.split not in SPLITS:
            raise ValidationError(f"edm.split must be one of {SPLITS}")


@dataclass(frozen=True)
class RunConfig:
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)
    reward: RewardWeights = field(default_factory=RewardWeights)
    edm: EmbeddingConfig = field(default_factory=EmbeddingConfig)
    search: SearchSpace = field(default_factory=SearchSpace)
    pca_components: int = 3
    synth: ReachScript = field(default_factory=ReachScript)
    arm: ArmParams = field(default_factory=ArmParams)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ValidationError("config must be a JSON object")
        _reject_unknown(doc, SECTIONS, "config")
        env = _build(EnvelopeConfig, doc.get("envelope", {}), "envelope")
        rew = _build(RewardWeights, doc.get("reward", {}), "reward")

        edm_doc = dict(_section(doc, "edm"))
        search_keys = {f.name for f in dataclasses.fields(SearchSpace)}
        search_doc = {k: edm_doc.pop(k) for k in list(edm_doc) if k in search_keys}
        search = _build(SearchSpace, search_doc, "edm")
        edm = _build(EmbeddingConfig, edm_doc, "edm")

        pca_doc = _section(doc, "pca")
        _reject_unknown(pca_doc, ("n_components",), "pca")
        n = pca_doc.get("n_components", 3)
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValidationError("pca.n_components must be a positive integer")

        synth_doc = dict(_section(doc, "synth"))
        arm = _build(ArmParams, synth_doc.pop("arm", {}), "synth.arm")
        synth = _build(ReachScript, synth_doc, "synth")
        return cls(env, rew, edm, search, n, synth, arm)

    def to_dict(self) -> dict:
        edm = self.edm.to_dict()
        edm.update(
            E_range=list(self.search.E_range),
            tau_range=list(self.search.tau_range),
            Tp_range=list(self.search.Tp_range),
            split=self.search.split,
        )
        synth = self.synth.to_dict()
        synth["arm"] = self.arm.to_dict()
        return {
            "envelope": self.envelope.to_dict(),
            "reward": self.reward.to_dict(),
            "edm": edm,
            "pca": {"n_components": self.pca_components},
            "synth": synth,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _section(doc: dict, name: str) -> dict:
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ValidationError(f"config section {name!r} must be an object")
    return sec


def _reject_unknown(doc: dict, allowed, where: str) -> None:
    extra = sorted(set(doc) - set(allowed))
    if extra:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _build(kind, doc: Any, where: str):
    if not isinstance(doc, dict):
        raise ValidationError(f"config section {where!r} must be an object")
    names = [f.name for f in dataclasses.fields(kind)]
    _reject_unknown(doc, names, where)
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
    try:
        return kind(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: invalid value ({exc})") from None


def load_config(path=None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(doc)
