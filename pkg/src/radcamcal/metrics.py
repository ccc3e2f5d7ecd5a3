"""Reprojection quality metrics: average error, its spread, and bbox hit rate."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import EmptyInputError, InsufficientDataError

MATCH_TOLERANCE_S = 0.05


@dataclass
class BBox:
    """Axis-aligned image box with the frame timestamp it belongs to."""

    timestamp: float
    min_u: float
    min_v: float
    max_u: float
    max_v: float

    def __post_init__(self):
        if self.min_u > self.max_u or self.min_v > self.max_v:
            raise ValueError("bbox minimum corner must not exceed the maximum corner")

    def contains(self, point) -> bool:
        u, v = float(point[0]), float(point[1])
        return self.min_u <= u <= self.max_u and self.min_v <= v <= self.max_v


def _distances(pairs) -> np.ndarray:
    out = []
    for observed, projected in pairs:
        a = np.asarray(observed, dtype=float).reshape(2)
        b = np.asarray(projected, dtype=float).reshape(2)
        out.append(float(np.linalg.norm(a - b)))
    return np.asarray(out)


def aed_from_distances(distances) -> float:
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        raise EmptyInputError("average error of zero pairs is undefined")
    return float(d.mean())


def cdsd_from_distances(distances) -> float:
    d = np.asarray(distances, dtype=float)
    if d.size < 2:
        raise InsufficientDataError("distance spread needs at least two pairs")
    mean = d.mean()
    return float(math.sqrt(float(((d - mean) ** 2).sum()) / (d.size - 1)))


def aed(pairs) -> float:
    """Mean Euclidean pixel distance over (observed, projected) pairs."""
    return aed_from_distances(_distances(pairs))


def cdsd(pairs) -> float:
    """Sample standard deviation (N-1) of the per-pair Euclidean distances."""
    return cdsd_from_distances(_distances(pairs))


def acc(projected: Sequence[Tuple[float, np.ndarray]], bboxes: Sequence[BBox],
        match_tol: float = MATCH_TOLERANCE_S) -> float:
    """Fraction of projected points inside their matched bounding box.

    Each (timestamp, pixel) entry is matched to the bbox with the nearest
    timestamp; matches farther than match_tol seconds, and points with no
    bbox at all, count as outside.  Box edges are inclusive.
    """
    if len(projected) == 0:
        raise EmptyInputError("hit rate of zero projected points is undefined")
    boxes = sorted(bboxes, key=lambda b: b.timestamp)
    box_ts = np.array([b.timestamp for b in boxes])
    inside = 0
    for ts, point in projected:
        if box_ts.size == 0:
            continue
        i = int(np.searchsorted(box_ts, ts))
        best = None
        for j in (i - 1, i):
            if 0 <= j < box_ts.size:
                gap = abs(box_ts[j] - ts)
                if best is None or gap < best[0]:
                    best = (gap, j)
        if best is not None and best[0] <= match_tol and boxes[best[1]].contains(point):
            inside += 1
    return inside / len(projected)
