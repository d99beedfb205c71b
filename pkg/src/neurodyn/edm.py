"""Delay embeddings and simplex-projection forecasting.

Points are always built inside a single trial, so no embedding vector or
future value straddles a trial boundary.  Every point carries its origin
``(trial, timestep)``; origins drive temporal exclusion, the split
schemes and deterministic tie-breaking between equidistant neighbours.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import (
    ConstantSequence,
    DimensionMismatch,
    InsufficientTrials,
    LengthMismatch,
    LibraryTooSmall,
    TrialTooShort,
    ValidationError,
)
from .trialdata import TrialSet

MODES = ("univariate_delay", "multivariate_direct")
SPLITS = ("leave_one_trial_out", "half_split")

# query rows handled per distance block; bounds memory at ~chunk * library * 8 bytes
_CHUNK = 512


@dataclass(frozen=True)
class EmbeddingConfig:
    """Delay-embedding and forecast parameters.

    ``tau < 0`` lags into the past, ``tau > 0`` into the future.  In
    ``multivariate_direct`` mode the state vector is ``columns`` at lag 0
    and ``E`` is forced to ``len(columns)``.
    """

    E: int = 2
    tau: int = -1
    Tp: int = 1
    theiler: int = 0
    columns: tuple[str, ...] = ()
    target: str | None = None
    mode: str = "univariate_delay"
    exclude_self: bool = True

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "multivariate_direct" and self.columns:
            object.__setattr__(self, "E", len(self.columns))
        for name in ("E", "tau", "Tp", "theiler"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer, float)) or int(v) != v:
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if int(self.E) != self.E or self.E < 1:
            raise ValidationError(f"E must be an integer >= 1, got {self.E}")
        if int(self.tau) != self.tau or self.tau == 0:
            raise ValidationError(f"tau must be a nonzero integer, got {self.tau}")
        if int(self.Tp) != self.Tp or self.Tp < 1:
            raise ValidationError(f"Tp must be an integer >= 1, got {self.Tp}")
        if int(self.theiler) != self.theiler or self.theiler < 0:
            raise ValidationError(f"theiler must be an integer >= 0, got {self.theiler}")

    @property
    def n_neighbors(self) -> int:
        return self.E + 1

    @property
    def span(self) -> int:
        """Timesteps a point needs besides its own: lags plus horizon."""
        return (self.E - 1) * abs(self.tau) + self.Tp

    def lag_offsets(self) -> np.ndarray:
        if self.mode == "multivariate_direct":
            return np.zeros(1, dtype=int)
        return np.arange(self.E) * self.tau

    def to_dict(self) -> dict:
        d = asdict(self)
        d["columns"] = list(self.columns)
        return d


@dataclass(frozen=True, eq=False)
class EmbeddedLibrary:
    """Embedded point cloud.

    Attributes
    ----------
    points : ndarray (P, E)
    origins : ndarray (P, 2) of int
        ``(trial, timestep)`` of each point, sorted lexicographically.
    future : ndarray (P,)
        Target value at ``timestep + Tp`` of the same trial.
    """

    points: np.ndarray
    origins: np.ndarray
    future: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        org = np.asarray(self.origins, dtype=np.int64).reshape(-1, 2)
        fut = np.asarray(self.future, dtype=np.float64).ravel()
        if not (len(pts) == len(org) == len(fut)):
            raise LengthMismatch("points, origins and future must have equal length")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(fut))):
            raise ValidationError("embedding contains non-finite values")
        order = np.lexsort((org[:, 1], org[:, 0]))
        for name, arr in (("points", pts[order]), ("origins", org[order]), ("future", fut[order])):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.future)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def subset(self, mask) -> "EmbeddedLibrary":
        mask = np.asarray(mask)
        return EmbeddedLibrary(self.points[mask], self.origins[mask], self.future[mask])

    def trials(self) -> np.ndarray:
        return np.unique(self.origins[:, 0])


@dataclass(frozen=True, eq=False)
class ForecastResult:
    origins: np.ndarray
    predicted: np.ndarray
    observed: np.ndarray
    rho: float
    config: EmbeddingConfig = field(default_factory=EmbeddingConfig)

    @property
    def n_pred(self) -> int:
        return len(self.predicted)

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "E": self.config.E,
            "tau": self.config.tau,
            "Tp": self.config.Tp,
            "n_pred": self.n_pred,
        }


# ---------------------------------------------------------------------------


def spearman_rho(obs, pred) -> float:
    """Spearman rank correlation with average ranks for ties."""
    obs = np.asarray(obs, dtype=np.float64).ravel()
    pred = np.asarray(pred, dtype=np.float64).ravel()
    if obs.size != pred.size:
        raise LengthMismatch(f"lengths differ: {obs.size} vs {pred.size}")
    if obs.size < 3:
        raise ValidationError(f"need at least 3 pairs, got {obs.size}")
    if np.all(obs == obs[0]) or np.all(pred == pred[0]):
        raise ConstantSequence("Spearman rho is undefined for a constant sequence")
    ro = rankdata(obs) - (obs.size + 1) / 2.0
    rp = rankdata(pred) - (obs.size + 1) / 2.0
    r = float(np.dot(ro, rp) / np.sqrt(np.dot(ro, ro) * np.dot(rp, rp)))
    return min(1.0, max(-1.0, r))


def _series_matrix(ts: TrialSet, names: Sequence[str]) -> np.ndarray:
    return np.stack([ts.channel(n) for n in names], axis=-1)


def delay_embed(ts: TrialSet, cfg: EmbeddingConfig) -> EmbeddedLibrary:
    """Embed ``cfg.columns`` of every trial, pairing each point with ``target(t + Tp)``."""
    if not cfg.columns:
        raise ValidationError("EmbeddingConfig.columns is empty")
    if cfg.mode == "univariate_delay" and len(cfg.columns) != 1:
        raise ValidationError(
            "univariate_delay embeds exactly one column; use multivariate_direct for several"
        )
    target = cfg.target or cfg.columns[0]
    src = _series_matrix(ts, cfg.columns)  # (T, N, k)
    tgt = ts.channel(target)
    T, N = tgt.shape
    if T and N < cfg.span + 1:
        raise TrialTooShort(f"trials have {N} samples; E={cfg.E}, tau={cfg.tau}, Tp={cfg.Tp} need {cfg.span + 1}")

    offsets = cfg.lag_offsets()
    lo = max(0, -int(offsets.min()))
    hi = min(N - int(offsets.max()), N - cfg.Tp)  # exclusive
    t_idx = np.arange(lo, max(lo, hi))
    if cfg.mode == "univariate_delay":
        # (T, P, E): column 0 lagged by each offset
        pts = src[:, t_idx[:, None] + offsets[None, :], 0]
    else:
        pts = src[:, t_idx, :]
    fut = tgt[:, t_idx + cfg.Tp]
    P = len(t_idx)
    origins = np.stack(
        [np.repeat(np.arange(T), P), np.tile(t_idx, T)], axis=1
    )
    return EmbeddedLibrary(pts.reshape(T * P, -1), origins, fut.reshape(T * P))


def _exclusion(lib_org, q_org, theiler: int, exclude_self: bool, exclude_same_trial: bool):
    same_trial = lib_org[None, :, 0] == q_org[:, None, 0]
    if exclude_same_trial:
        return same_trial
    dt = np.abs(lib_org[None, :, 1] - q_org[:, None, 1])
    radius = theiler if (theiler > 0 or exclude_self) else -1
    if radius < 0:
        return np.zeros(same_trial.shape, dtype=bool)
    return same_trial & (dt <= radius)


def simplex_weights(dist: np.ndarray) -> np.ndarray:
    """Convex weights for one query's ascending neighbour distances.

    ``exp(-d / d_min)``; when the nearest distance is zero, the exact
    matches share the weight equally.
    """
    return _weights(np.asarray(dist, dtype=np.float64)[None, :])[0]


def _weights(d: np.ndarray) -> np.ndarray:
    d1 = d[:, :1]
    exact = d1[:, 0] == 0.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        w = np.exp(-d / np.where(exact[:, None], 1.0, d1))
    w[exact] = (d[exact] == 0.0).astype(np.float64)
    return w / w.sum(axis=1, keepdims=True)


def _nearest(dist: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest entries per row, ordered by (distance, index)."""
    if len(dist) == 0:
        return np.zeros((0, k), dtype=np.intp)
    part = np.argpartition(dist, k - 1, axis=1)[:, :k]
    kth = np.take_along_axis(dist, part, axis=1).max(axis=1)
    tied = (dist <= kth[:, None]).sum(axis=1) > k
    for i in np.flatnonzero(tied):
        # argpartition picks arbitrarily among equal distances at the boundary
        cand = np.flatnonzero(dist[i] <= kth[i])
        part[i] = cand[np.lexsort((cand, dist[i, cand]))][:k]
    d = np.take_along_axis(dist, part, axis=1)
    order = np.lexsort((part, d), axis=1)
    return np.take_along_axis(part, order, axis=1)


def simplex_forecast(
    library: EmbeddedLibrary,
    queries: EmbeddedLibrary,
    E: int | None = None,
    *,
    theiler: int = 0,
    exclude_self: bool = True,
    exclude_same_trial: bool = False,
    config: EmbeddingConfig | None = None,
) -> ForecastResult:
    """Forecast each query's future from its ``E + 1`` nearest library neighbours.

    Library points in the same trial within ``theiler`` timesteps of the
    query are ignored; with ``exclude_self`` the query's own origin is
    ignored too (``theiler=0`` then means "self only").
    ``exclude_same_trial`` drops the query's whole trial, which is how the
    leave-one-trial-out split is evaluated against one shared library.
    Queries left with fewer than ``E + 1`` candidates get no prediction.
    """
    E = library.dim if E is None else int(E)
    if queries.dim != library.dim:
        raise DimensionMismatch(f"query dim {queries.dim} != library dim {library.dim}")
    k = E + 1
    if len(library) < k:
        raise LibraryTooSmall(f"library has {len(library)} points, need {k}")

    L = library.points
    keep_q, preds = [], []
    for start in range(0, len(queries), _CHUNK):
        stop = min(start + _CHUNK, len(queries))
        Q = queries.points[start:stop]
        # neighbours are ranked on squared distance; sqrt only for the weights
        sq = np.zeros((len(Q), len(L)))
        for j in range(L.shape[1]):
            diff = np.subtract.outer(Q[:, j], L[:, j])
            diff *= diff
            sq += diff
        sq[_exclusion(library.origins, queries.origins[start:stop], theiler, exclude_self, exclude_same_trial)] = np.inf
        ok = np.isfinite(sq).sum(axis=1) >= k
        if not ok.all():
            sq = sq[ok]
        nn = _nearest(sq, k)
        w = _weights(np.sqrt(np.take_along_axis(sq, nn, axis=1)))
        preds.append(np.einsum("ij,ij->i", w, library.future[nn]))
        keep_q.append(start + np.flatnonzero(ok))

    keep_q = np.concatenate(keep_q) if keep_q else np.zeros(0, dtype=int)
    predicted = np.concatenate(preds) if preds else np.zeros(0)
    observed = queries.future[keep_q]
    if len(keep_q) < 3:
        raise LibraryTooSmall(f"only {len(keep_q)} queries had {k} admissible neighbours")
    rho = spearman_rho(observed, predicted)
    cfg = config or EmbeddingConfig(E=E, theiler=theiler, exclude_self=exclude_self)
    return ForecastResult(queries.origins[keep_q], predicted, observed, rho, cfg)


def forecast_self(ts: TrialSet, cfg: EmbeddingConfig) -> ForecastResult:
    """Library and queries are the same set; temporal exclusion via ``cfg``."""
    lib = delay_embed(ts, cfg)
    return simplex_forecast(
        lib, lib, cfg.E, theiler=cfg.theiler, exclude_self=cfg.exclude_self, config=cfg
    )


def cross_predict(
    ts: TrialSet,
    source_channels: Sequence[str],
    target_channel: str,
    cfg: EmbeddingConfig | None = None,
    split: str = "leave_one_trial_out",
) -> ForecastResult:
    """Predict ``target_channel`` at ``t + Tp`` from embedded source channels.

    ``leave_one_trial_out`` forecasts every trial from all other trials;
    ``half_split`` uses the first half of the trials as library and the
    second half as queries.
    """
    cfg = cfg or EmbeddingConfig()
    if split not in SPLITS:
        raise ValidationError(f"split must be one of {SPLITS}, got {split!r}")
    cfg = replace(cfg, columns=tuple(source_channels), target=target_channel)
    if ts.n_trials < 2:
        raise InsufficientTrials(f"{split} needs at least 2 trials, got {ts.n_trials}")
    emb = delay_embed(ts, cfg)
    if split == "leave_one_trial_out":
        return simplex_forecast(emb, emb, cfg.E, exclude_same_trial=True, config=cfg)
    cut = ts.n_trials // 2
    in_lib = emb.origins[:, 0] < cut
    return simplex_forecast(emb.subset(in_lib), emb.subset(~in_lib), cfg.E, exclude_same_trial=True, config=cfg)


@dataclass(frozen=True)
class SearchRow:
    E: int
    tau: int
    Tp: int
    rho: float
    n_pred: int
    best: bool = False


def default_threads() -> int:
    env = os.environ.get("NEURODYN_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"NEURODYN_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ValidationError("NEURODYN_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def param_search(
    ts: TrialSet,
    source: str | Sequence[str],
    target: str,
    E_range: Sequence[int],
    tau_range: Sequence[int],
    Tp_range: Sequence[int],
    split: str = "leave_one_trial_out",
    threads: int | None = None,
) -> list[SearchRow]:
    """Exhaustive ``cross_predict`` over the (E, tau, Tp) grid.

    Rows come back sorted by ``(E, tau, Tp)``; the highest-rho row (first
    in that order on ties) has ``best=True``.
    """
    if not (len(E_range) and len(tau_range) and len(Tp_range)):
        raise ValidationError("parameter ranges must be nonempty")
    sources = [source] if isinstance(source, str) else list(source)
    grid = sorted(set(itertools.product(E_range, tau_range, Tp_range)))

    def run(point):
        E, tau, Tp = point
        cfg = EmbeddingConfig(E=int(E), tau=int(tau), Tp=int(Tp))
        res = cross_predict(ts, sources, target, cfg, split)
        return SearchRow(int(E), int(tau), int(Tp), res.rho, res.n_pred)

    n = threads or default_threads()
    if n > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=n) as pool:
            rows = list(pool.map(run, grid))
    else:
        rows = [run(p) for p in grid]
    best = max(range(len(rows)), key=lambda i: (rows[i].rho, -i))
    rows[best] = replace(rows[best], best=True)
    return rows
