"""Discrete fields: values with standard errors on a fixed interior point set.

A :class:`Field` is the finite carrier for functions on D used throughout
the nonlinear solver. Interpolation is nearest-neighbor, which preserves
value bounds exactly (no overshoot); the grid spacing is the accuracy
knob.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError

_BRUTE_FORCE_MAX = 512  # below this many grid points a matmul beats a tree


@dataclass
class Field:
    points: np.ndarray            # (k, d), fixed evaluation points
    values: np.ndarray            # (k,)
    stderrs: np.ndarray           # (k,), zero for exact fields
    raw_values: Optional[np.ndarray] = None   # pre-clamp values, if clamped
    clamp_violations: int = 0
    _tree: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        k = len(self.points)
        if self.values.shape != (k,) or self.stderrs.shape != (k,):
            raise InputError("field values/stderrs must match the point count")

    @classmethod
    def constant(cls, points: np.ndarray, value: float) -> "Field":
        k = len(points)
        return cls(points, np.full(k, float(value)), np.zeros(k))

    def nearest_index(self, x: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(x, dtype=float))
        if len(self.points) <= _BRUTE_FORCE_MAX:
            # ||x - p||^2 up to the common ||x||^2 term
            d2 = (
                np.einsum("ij,ij->i", self.points, self.points)[None, :]
                - 2.0 * pts @ self.points.T
            )
            return np.argmin(d2, axis=1)
        if self._tree is None:
            self._tree = cKDTree(self.points)
        return self._tree.query(pts)[1]

    def interpolate(self, x, domain=None) -> np.ndarray:
        """Nearest-neighbor interpolant. If ``domain`` is given, queries
        outside D are rejected."""
        pts = np.asarray(x, dtype=float)
        single = pts.ndim == 1
        if domain is not None:
            sd = domain.signed_distance(pts)
            if np.any(np.asarray(sd) >= 0):
                raise InputError("interpolation query outside the domain")
        vals = self.values[self.nearest_index(pts)]
        return float(vals[0]) if single else vals

    def clamped(self, lo: float, hi: float) -> "Field":
        """Clamp values into [lo, hi], recording the pre-clamp state."""
        clipped = np.clip(self.values, lo, hi)
        violations = int(np.sum(clipped != self.values))
        return replace(
            self,
            values=clipped,
            raw_values=self.values.copy(),
            clamp_violations=violations,
            _tree=None,
        )

    def sup_diff(self, other: "Field") -> float:
        return float(np.max(np.abs(self.values - other.values)))

    def max_stderr(self) -> float:
        return float(np.max(self.stderrs)) if len(self.stderrs) else 0.0
