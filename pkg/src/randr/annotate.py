"""Ground-truth bounding boxes extracted from the renderer's object-id mask.

Boxes are modal (visible extent only): each box is the tight axis-aligned
bound of the object's mask pixels, in the half-open convention
[xmin, xmax) x [ymin, ymax). Objects with fewer visible pixels than the
configured threshold are dropped. Annotation happens on the downscaled mask
so boxes live in the same pixel space as the emitted training images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import IndivisibleDimensions
from .scene import GROUND_ID, CameraModel, ObjectInstance, ShapeClass

DEFAULT_MIN_VISIBLE_PIXELS = 25


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel rectangle, half-open: [xmin, xmax) x [ymin, ymax)."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmin < self.xmax and self.ymin < self.ymax):
            raise ValueError(f"degenerate bbox {self}")

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


@dataclass(frozen=True)
class Annotation:
    object_id: int
    shape: ShapeClass
    bbox: BBox
    visible_pixels: int


def downscale_idmask(mask: np.ndarray, factor: int = 2) -> np.ndarray:
    """Nearest-neighbor mask reduction: keep the top-left sample of each block.

    Averaging object ids would be meaningless, so ids are subsampled.
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return mask
    h, w = mask.shape
    if h % factor or w % factor:
        raise IndivisibleDimensions(f"{w}x{h} not divisible by {factor}")
    return mask[0::factor, 0::factor]


def boxes_from_idmask(
    mask: np.ndarray,
    shapes_by_id: Mapping[int, ShapeClass],
    min_visible_pixels: int = DEFAULT_MIN_VISIBLE_PIXELS,
) -> list[Annotation]:
    """Tight per-object boxes from an id mask, sorted by object id.

    Ids not greater than GROUND_ID (ground, background) are skipped; every
    other id present in the mask must appear in ``shapes_by_id``.
    """
    annotations = []
    for obj_id in np.unique(mask):
        obj_id = int(obj_id)
        if obj_id <= GROUND_ID:
            continue
        ys, xs = np.nonzero(mask == obj_id)
        count = int(ys.size)
        if count < min_visible_pixels:
            continue
        bbox = BBox(
            xmin=float(xs.min()),
            ymin=float(ys.min()),
            xmax=float(xs.max()) + 1.0,
            ymax=float(ys.max()) + 1.0,
        )
        annotations.append(
            Annotation(
                object_id=obj_id,
                shape=shapes_by_id[obj_id],
                bbox=bbox,
                visible_pixels=count,
            )
        )
    annotations.sort(key=lambda a: a.object_id)
    return annotations


def analytic_sphere_bbox(sphere: ObjectInstance, camera: CameraModel) -> BBox | None:
    """Conservative pixel-aligned bound of a sphere's projected silhouette.

    Exact per-axis tangent-line bounds of the silhouette cone, expanded to
    whole pixels, so the result always contains the rendered mask extent.
    Returns None when the sphere is not fully in front of the camera or
    projects entirely outside the image. Intended as a test oracle.
    """
    if sphere.shape is not ShapeClass.SPHERE:
        raise ValueError("analytic_sphere_bbox requires a sphere instance")
    r = float(sphere.dims[0])
    rot = camera.pose.rotation
    local = rot.T @ (sphere.pose.position - camera.pose.position)
    x, y, z = (float(v) for v in local)
    if z <= r:
        return None
    f = camera.focal_px

    def _axis_bounds(a: float) -> tuple[float, float]:
        # tangent image-plane slopes u solve (a - u z)^2 = r^2 (1 + u^2)
        denom = z * z - r * r
        root = r * math.sqrt(a * a + denom)
        return (a * z - root) / denom, (a * z + root) / denom

    ux0, ux1 = _axis_bounds(x)
    uy0, uy1 = _axis_bounds(y)
    xmin = math.floor(camera.width / 2.0 + f * ux0)
    xmax = math.ceil(camera.width / 2.0 + f * ux1)
    ymin = math.floor(camera.height / 2.0 + f * uy0)
    ymax = math.ceil(camera.height / 2.0 + f * uy1)
    xmin = max(0.0, float(xmin))
    ymin = max(0.0, float(ymin))
    xmax = min(float(camera.width), float(xmax))
    ymax = min(float(camera.height), float(ymax))
    if xmin >= xmax or ymin >= ymax:
        return None
    return BBox(xmin=xmin, ymin=ymin, xmax=xmax, ymax=ymax)
