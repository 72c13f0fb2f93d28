"""Axis-aligned hyper-rectangles for entities and queries.

A box is a center vector plus a componentwise nonnegative offset (half
width); a point v lies inside when center - offset <= v <= center + offset
holds in every dimension.  Boxes are closed, so boundary contact counts as
membership and as intersection.

Two code paths cover the same geometry:

* plain numpy on :class:`Box` values, for predicates and fast evaluation
  scans, and
* tensor operations (:func:`split_raw_box`, :func:`box_distance_t`) for
  the training path, differentiable with respect to the raw parameters.

The box-to-box distance has an outside part (the componentwise gap between
the two rectangles) and an inside part (center separation capped at the
combined half widths), combined as ``outside + alpha * inside``.  With a
zero-offset argument it reduces to the familiar point-to-box form, and
``outside == 0`` is exactly the intersection predicate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor2

DEFAULT_ALPHA = 0.02


@dataclass(frozen=True)
class Box:
    center: np.ndarray
    offset: np.ndarray

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def __post_init__(self):
        if self.center.shape != self.offset.shape or self.center.ndim != 1:
            raise ValueError(
                f"center/offset must be equal-length vectors, got "
                f"{self.center.shape} and {self.offset.shape}"
            )


def materialize(raw_center, raw_offset) -> Box:
    """Clamp raw offsets at zero and build a Box.

    Offsets are stored unconstrained during optimization; the clamp (with
    zero gradient on the negative side) is what keeps realized boxes valid.
    """
    center = np.asarray(raw_center, dtype=np.float64)
    offset = np.asarray(raw_offset, dtype=np.float64)
    if center.shape != offset.shape:
        raise ValueError(f"dimension mismatch: {center.shape} vs {offset.shape}")
    return Box(center=center.copy(), offset=np.maximum(offset, 0.0))


def contains(box: Box, point) -> bool:
    """Closed-box membership of a point."""
    v = np.asarray(point, dtype=np.float64)
    if v.shape != box.center.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {box.center.shape}")
    return bool(
        np.all(box.center - box.offset <= v) and np.all(v <= box.center + box.offset)
    )


def intersects(a: Box, b: Box) -> bool:
    """True when the closed boxes share at least one point (touching counts)."""
    _check_dims(a, b)
    return bool(np.all(np.abs(a.center - b.center) <= a.offset + b.offset))


def contains_box(outer: Box, inner: Box) -> bool:
    """Full interval containment; stricter alternative answer criterion."""
    _check_dims(outer, inner)
    return bool(
        np.all(outer.center - outer.offset <= inner.center - inner.offset)
        and np.all(inner.center + inner.offset <= outer.center + outer.offset)
    )


def distance_outside(a: Box, b: Box) -> float:
    _check_dims(a, b)
    delta = np.abs(a.center - b.center)
    return float(np.maximum(delta - (a.offset + b.offset), 0.0).sum())


def distance_inside(a: Box, b: Box) -> float:
    _check_dims(a, b)
    delta = np.abs(a.center - b.center)
    return float(np.minimum(delta, a.offset + b.offset).sum())


def distance(a: Box, b: Box, alpha: float = DEFAULT_ALPHA) -> float:
    """Outside gap plus alpha-weighted inside separation; zero iff identical centers."""
    return distance_outside(a, b) + alpha * distance_inside(a, b)


def _check_dims(a: Box, b: Box) -> None:
    if a.center.shape != b.center.shape:
        raise ValueError(
            f"dimension mismatch: {a.center.shape} vs {b.center.shape}"
        )


# -- differentiable path -----------------------------------------------------


def split_raw_box(raw: Tensor2) -> tuple[Tensor2, Tensor2]:
    """Split rows of raw 2d-vectors into (centers, clamped offsets)."""
    if raw.cols % 2:
        raise ValueError(f"raw box vectors need an even width, got {raw.cols}")
    d = raw.cols // 2
    center = ad.slice_cols(raw, 0, d)
    offset = ad.relu(ad.slice_cols(raw, d, 2 * d))  # clamp, zero grad below 0
    return center, offset


def box_distance_t(
    q_center: Tensor2,
    q_offset: Tensor2,
    e_centers: Tensor2,
    e_offsets: Tensor2,
    alpha: float = DEFAULT_ALPHA,
) -> Tensor2:
    """Column of distances from one query box to n entity boxes.

    The query side is a single row broadcast against n-row entity
    matrices; offsets are assumed already clamped.
    """
    delta = ad.absolute(e_centers - q_center)
    total = e_offsets + q_offset
    outside = ad.row_sum(ad.relu(delta - total))
    inside = ad.row_sum(ad.minimum(delta, total))
    return outside + alpha * inside


def random_box(rng: np.random.Generator, dim: int, center_scale: float = 5.0,
               offset_scale: float = 2.0) -> Box:
    """Random box helper for property tests and demos."""
    return materialize(
        rng.normal(0.0, center_scale, size=dim),
        rng.normal(offset_scale / 2, offset_scale, size=dim),
    )
