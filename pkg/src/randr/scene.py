"""Core scene types: shapes, poses, camera, light, and deterministic seeding.

World frame convention: right-handed, z-up, ground plane at z = 0.
Camera frame convention: +x right, +y down, +z forward (pinhole looks
along +z), so pixel row 0 is the top of the image.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLookAt

_U64 = (1 << 64) - 1

#: id_mask value for the ground plane.
GROUND_ID = 0
#: id_mask value for pixels that hit nothing. Object ids start at 1.
BACKGROUND_ID = -1


def derived_seed(master_seed: int, index: int) -> int:
    """Derive an independent 64-bit seed for item ``index`` of a sequence.

    Pure function of its inputs: mixes ``master_seed XOR index * odd-constant``
    through two rounds of a 64-bit finalizer so that flipping any single input
    bit flips about half of the output bits.
    """
    x = (master_seed ^ (index * 0x9E3779B97F4A7C15)) & _U64
    for _ in range(2):
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & _U64
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & _U64
        x ^= x >> 31
    return x


class ShapeClass(enum.IntEnum):
    """The three object categories. Integer codes are part of the wire format."""

    BOX = 0
    CYLINDER = 1
    SPHERE = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "ShapeClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown shape class {label!r}") from None


def _frozen_array(values, shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(shape)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# quaternion helpers (scalar-first convention: w, x, y, z)

def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    n = math.sqrt(float(np.dot(q, q)))
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_from_yaw(yaw: float) -> np.ndarray:
    """Rotation about world z by ``yaw`` radians."""
    h = 0.5 * yaw
    return np.array([math.cos(h), 0.0, 0.0, math.sin(h)])


def quat_to_matrix(q) -> np.ndarray:
    """3x3 rotation matrix mapping local coordinates to world coordinates."""
    w, x, y, z = (float(v) for v in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m) -> np.ndarray:
    """Unit quaternion for a proper rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    t = float(np.trace(m))
    if t > 0.0:
        s = math.sqrt(t + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        q = np.array(
            [(m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s]
        )
    elif m[1, 1] > m[2, 2]:
        s = math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        q = np.array(
            [(m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        q = np.array(
            [(m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: world position plus unit orientation quaternion."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        pos = _frozen_array(self.position, (3,))
        quat = np.array(self.orientation, dtype=np.float64).reshape(4)
        norm = math.sqrt(float(np.dot(quat, quat)))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"quaternion norm {norm} deviates from 1 by more than 1e-9")
        quat.flags.writeable = False
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", quat)

    @property
    def rotation(self) -> np.ndarray:
        """Local-to-world rotation matrix."""
        return quat_to_matrix(self.orientation)

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "orientation": [float(v) for v in self.orientation],
        }


IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


@dataclass(frozen=True, eq=False)
class ObjectInstance:
    """One placed primitive.

    ``dims`` semantics per class (meters):
      box      -> (width, depth, height), local axes before yaw
      cylinder -> (radius, radius, length), axis along local z
      sphere   -> (radius, radius, radius)
    ``pose.position`` is the body center.
    """

    id: int
    shape: ShapeClass
    pose: Pose
    dims: np.ndarray
    texture_id: int

    def __post_init__(self):
        dims = _frozen_array(self.dims, (3,))
        if not np.all(dims > 0.0):
            raise ValueError(f"dims must be strictly positive, got {dims.tolist()}")
        if self.shape in (ShapeClass.CYLINDER, ShapeClass.SPHERE) and dims[0] != dims[1]:
            raise ValueError(f"{self.shape.label} requires dims[0] == dims[1]")
        if self.shape is ShapeClass.SPHERE and dims[0] != dims[2]:
            raise ValueError("sphere requires all dims equal")
        object.__setattr__(self, "dims", dims)

    @property
    def half_height(self) -> float:
        """Half of the vertical extent for an upright (yaw-only) instance."""
        if self.shape is ShapeClass.SPHERE:
            return float(self.dims[0])
        return float(self.dims[2]) / 2.0

    @property
    def bounding_radius(self) -> float:
        """Radius of the smallest origin-centered sphere containing the body."""
        if self.shape is ShapeClass.SPHERE:
            return float(self.dims[0])
        if self.shape is ShapeClass.CYLINDER:
            return math.hypot(float(self.dims[0]), float(self.dims[2]) / 2.0)
        return float(np.linalg.norm(self.dims)) / 2.0

    @property
    def min_z(self) -> float:
        """Lower z extent, assuming an upright (yaw-only) orientation."""
        return float(self.pose.position[2]) - self.half_height

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "class": self.shape.label,
            "pose": self.pose.to_dict(),
            "dims": [float(v) for v in self.dims],
            "texture_id": self.texture_id,
        }


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera: square pixels, principal point at the image center."""

    pose: Pose
    horizontal_fov: float
    width: int
    height: int

    def __post_init__(self):
        if not 0.0 < self.horizontal_fov < math.pi:
            raise ValueError(f"horizontal_fov must lie in (0, pi), got {self.horizontal_fov}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(self.horizontal_fov / 2.0)

    def to_dict(self) -> dict:
        return {
            "pose": self.pose.to_dict(),
            "horizontal_fov": self.horizontal_fov,
            "width": self.width,
            "height": self.height,
        }


@dataclass(frozen=True, eq=False)
class LightSource:
    """Point light plus a global ambient term."""

    position: np.ndarray
    intensity: float
    ambient: float

    def __post_init__(self):
        pos = _frozen_array(self.position, (3,))
        if not 0.0 < self.intensity <= 2.0:
            raise ValueError(f"intensity must lie in (0, 2], got {self.intensity}")
        if not 0.0 <= self.ambient <= 1.0:
            raise ValueError(f"ambient must lie in [0, 1], got {self.ambient}")
        object.__setattr__(self, "position", pos)

    def to_dict(self) -> dict:
        return {
            "position": [float(v) for v in self.position],
            "intensity": self.intensity,
            "ambient": self.ambient,
        }


@dataclass(frozen=True, eq=False)
class SceneSpec:
    """Full declarative description of one randomized scene."""

    scene_index: int
    seed: int
    objects: tuple[ObjectInstance, ...]
    camera: CameraModel
    light: LightSource
    ground_texture_id: int

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique within a scene")

    def to_dict(self) -> dict:
        return {
            "scene_index": self.scene_index,
            "seed": str(self.seed),
            "objects": [o.to_dict() for o in self.objects],
            "camera": self.camera.to_dict(),
            "light": self.light.to_dict(),
            "ground_texture_id": self.ground_texture_id,
        }


# ---------------------------------------------------------------------------
# operations

def look_at(eye, target, up_hint=(0.0, 0.0, 1.0)) -> Pose:
    """Pose whose forward (+z camera) axis points from ``eye`` to ``target``.

    Raises DegenerateLookAt when eye and target coincide or when the up hint
    is parallel to the view direction (angular tolerance 1e-6).
    """
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    forward = target - eye
    dist = float(np.linalg.norm(forward))
    if dist <= 1e-9:
        raise DegenerateLookAt("eye and target coincide")
    forward = forward / dist
    up = np.asarray(up_hint, dtype=np.float64)
    up_norm = float(np.linalg.norm(up))
    if up_norm == 0.0:
        raise DegenerateLookAt("up hint is the zero vector")
    up = up / up_norm
    right = np.cross(forward, up)
    sin_angle = float(np.linalg.norm(right))
    if sin_angle < 1e-6:
        raise DegenerateLookAt("up hint is parallel to the view direction")
    right = right / sin_angle
    down = np.cross(forward, right)
    rot = np.column_stack([right, down, forward])
    return Pose(position=eye, orientation=matrix_to_quat(rot))


def project(camera: CameraModel, point) -> np.ndarray | None:
    """Pinhole projection of a world point to continuous pixel coordinates.

    Pixel (i, j) covers [i, i+1) x [j, j+1); a point on the optical axis maps
    to (width/2, height/2). Returns None when the point is at or behind the
    camera plane (non-positive depth).
    """
    point = np.asarray(point, dtype=np.float64)
    rot = camera.pose.rotation
    local = rot.T @ (point - camera.pose.position)
    z = float(local[2])
    if z <= 0.0:
        return None
    f = camera.focal_px
    return np.array(
        [camera.width / 2.0 + f * float(local[0]) / z, camera.height / 2.0 + f * float(local[1]) / z]
    )
