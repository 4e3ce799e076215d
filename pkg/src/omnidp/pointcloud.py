"""Panoramic point-cloud preprocessing: range crop, seeded uniform
downsampling to a fixed budget, and temporal aggregation with normalized
relative timestamps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_CROP_RADIUS = 1.3
DEFAULT_POINT_BUDGET = 4096
DEFAULT_WINDOW = 3


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class PointCloudFrame:
    """One sensor frame: egocentric xyz points (meters) plus a timestamp."""

    timestamp: float
    points: np.ndarray  # (n, 3) float64

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AggregatedCloud:
    """Fixed-cardinality point set with per-point recency tags.

    t_rel lies in [0, 1]; 1 marks the newest source frame, and at least one
    point always carries it.
    """

    xyz: np.ndarray  # (n, 3) float64
    t_rel: np.ndarray  # (n,) float64

    def __post_init__(self) -> None:
        xyz = np.array(self.xyz, dtype=np.float64).reshape(-1, 3)
        t = np.array(self.t_rel, dtype=np.float64).reshape(-1)
        if xyz.shape[0] != t.shape[0]:
            raise ValueError("xyz and t_rel cardinality mismatch")
        if xyz.shape[0] == 0:
            raise ValueError("aggregated cloud must be non-empty")
        if not (np.all(np.isfinite(xyz)) and np.all(np.isfinite(t))):
            raise ValueError("aggregated cloud entries must be finite")
        if t.min() < 0.0 or t.max() > 1.0 or not np.any(t == 1.0):
            raise ValueError("t_rel must lie in [0, 1] with at least one 1.0")
        xyz.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)
        object.__setattr__(self, "t_rel", t)

    def __len__(self) -> int:
        return self.xyz.shape[0]


def range_crop(frame: PointCloudFrame, r_max: float = DEFAULT_CROP_RADIUS) -> PointCloudFrame:
    """Keep points with Euclidean norm <= r_max (inclusive), order preserved."""
    if r_max <= 0.0:
        raise ValueError("r_max must be positive")
    keep = np.linalg.norm(frame.points, axis=1) <= r_max
    return PointCloudFrame(frame.timestamp, frame.points[keep])


def _downsample_indices(count: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Index version of the uniform-downsample rule over `count` points."""
    if count == 0:
        raise ValueError("cannot downsample an empty frame (sensor blackout)")
    if count >= n:
        return rng.choice(count, size=n, replace=False)
    pad = rng.choice(count, size=n - count, replace=True)
    return np.concatenate([np.arange(count), pad])


def uniform_downsample(frame: PointCloudFrame, n: int, seed: int) -> PointCloudFrame:
    """Resample a frame to exactly n points.

    Inputs of at least n points yield a uniformly random subset without
    replacement; shorter inputs keep every point and pad by resampling with
    replacement. Deterministic for a fixed seed.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    idx = _downsample_indices(len(frame), n, _rng(seed))
    return PointCloudFrame(frame.timestamp, frame.points[idx])


def temporal_aggregate(
    frames: Sequence[PointCloudFrame], budget: int, seed: int = 0
) -> AggregatedCloud:
    """Fuse a short window of frames into one fixed-budget cloud.

    Every point of a frame shares that frame's normalized relative timestamp
    (t - t_min) / (t_max - t_min); a single-frame window maps to 1. The union
    is then downsampled to the budget with the uniform_downsample rule, with
    one newest-frame point retained unconditionally so recency never drops
    out of the result.
    """
    if len(frames) == 0:
        raise ValueError("frame window must be non-empty")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    times = np.array([f.timestamp for f in frames], dtype=np.float64)
    if len(frames) > 1 and np.any(np.diff(times) <= 0.0):
        raise ValueError("frame timestamps must be strictly increasing")

    span = times[-1] - times[0]
    rel = np.ones_like(times) if span == 0.0 else (times - times[0]) / span
    xyz = np.concatenate([f.points for f in frames], axis=0)
    t_rel = np.concatenate([np.full(len(f), r) for f, r in zip(frames, rel)])

    rng = _rng(seed)
    idx = _downsample_indices(xyz.shape[0], budget, rng)
    if not np.any(t_rel[idx] == 1.0):
        newest = np.flatnonzero(t_rel == 1.0)
        idx = idx.copy()
        idx[0] = rng.choice(newest)
    return AggregatedCloud(xyz[idx], t_rel[idx])


def preprocess_window(
    frames: Sequence[PointCloudFrame],
    budget: int = DEFAULT_POINT_BUDGET,
    r_max: float = DEFAULT_CROP_RADIUS,
    seed: int = 0,
) -> AggregatedCloud:
    """Crop each frame, then aggregate the window to the point budget."""
    return temporal_aggregate([range_crop(f, r_max) for f in frames], budget, seed)
