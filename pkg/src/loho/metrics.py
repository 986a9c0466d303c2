"""Trajectory similarity metrics and episode scores.

Trajectories are point sequences normalized to [0, 1] per axis (pixel
coordinates divided by 1000).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import PX_MAX, LohoError, Primitive
from .orchestrator import EpisodeLog, ground_truth_complete

DEFAULT_RMSE_POINTS = 64


class EmptyTrajectory(LohoError, ValueError):
    pass


def as_trajectory(points, check_range: bool = True) -> np.ndarray:
    a = np.asarray(points, dtype=np.float64)
    if a.size == 0:
        raise EmptyTrajectory("trajectory has no points")
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) trajectory, got shape {a.shape}")
    if check_range and (a.min() < 0.0 or a.max() > 1.0):
        raise ValueError("normalized trajectory coordinates must lie in [0, 1]")
    return a


def normalize_px(points) -> np.ndarray:
    """Pixel coordinates on the 1000-unit grid to [0, 1]."""
    return as_trajectory(np.asarray(points, dtype=np.float64) / PX_MAX)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


def dfd(a, b) -> float:
    """Discrete Fréchet distance (coupling DP over anti-diagonals).

    Cell (i, j) of the DP lives at row i + j, column i + 1 of a skewed table,
    so each anti-diagonal is one contiguous row. Out-of-range cells stay inf.
    """
    a, b = as_trajectory(a, False), as_trajectory(b, False)
    d = _pairwise(a, b)
    n, m = d.shape
    diag = np.full((n + m - 1, n), np.inf)
    i, j = np.indices((n, m))
    diag[i + j, i] = d
    c = np.full((n + m + 1, n + 1), np.inf)
    c[2, 1] = d[0, 0]
    tmp = np.empty(n)
    for k in range(1, n + m - 1):
        np.minimum(c[k + 1, :n], c[k, :n], out=tmp)
        np.minimum(tmp, c[k + 1, 1:], out=tmp)
        np.maximum(tmp, diag[k], out=c[k + 2, 1:])
    return float(c[n + m, n])


def hausdorff(a, b) -> float:
    a, b = as_trajectory(a, False), as_trajectory(b, False)
    d = _pairwise(a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def resample_array(a: np.ndarray, m: int) -> np.ndarray:
    seg = np.sqrt((np.diff(a, axis=0) ** 2).sum(axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0.0:
        return np.repeat(a[:1], m, axis=0)
    s = np.linspace(0.0, cum[-1], m)
    out = np.column_stack([np.interp(s, cum, a[:, 0]), np.interp(s, cum, a[:, 1])])
    out[0], out[-1] = a[0], a[-1]
    return out


def rmse(a, b, m: int = DEFAULT_RMSE_POINTS) -> float:
    """RMSE between the two trajectories after arc-length resampling to ``m`` points."""
    if m < 2:
        raise ValueError("m must be >= 2")
    ra = resample_array(as_trajectory(a, False), m)
    rb = resample_array(as_trajectory(b, False), m)
    return float(np.sqrt(((ra - rb) ** 2).sum(axis=1).mean()))


def progress_score(log: EpisodeLog) -> float:
    """Fraction of plan primitives the final observation shows as done."""
    plan = log.config.plan
    if not plan:
        return 1.0
    return ground_truth_complete(log.final_observation, plan) / len(plan)


@dataclass(frozen=True)
class IntentionScore:
    value: float
    attempts: int
    on_target: int

    @property
    def no_attempts(self) -> bool:
        return self.attempts == 0


def intention_score(log: EpisodeLog) -> IntentionScore:
    """Share of grasp attempts (grasps and slips) aimed at the current subtask's object."""
    subtask_at: dict[int, Primitive] = {s.frame: s.subtask for s in log.steps if s.subtask is not None}
    attempts = on_target = 0
    for e in log.events:
        if e.kind not in ("grasp", "slip"):
            continue
        attempts += 1
        intended = subtask_at.get(e.frame - 1)
        if intended is not None and intended.target == e.object:
            on_target += 1
    return IntentionScore(on_target / attempts if attempts else 0.0, attempts, on_target)


def score_pair(pred, ref, m: int = DEFAULT_RMSE_POINTS) -> dict[str, float]:
    return {"dfd": dfd(pred, ref), "hd": hausdorff(pred, ref), "rmse": rmse(pred, ref, m)}


def aggregate(rows: Sequence[dict[str, float]]) -> dict[str, float]:
    keys = ("dfd", "hd", "rmse")
    if not rows:
        return {k: float("nan") for k in keys}
    return {k: float(np.mean([r[k] for r in rows])) for k in keys}
