"""Randomized scene composition: grid placement, object, camera, and light sampling.

Objects are placed on distinct cells of a ground-plane grid with a bounded
intra-cell jitter, sized so that ground footprints can never overlap. Every
draw comes from a generator seeded by ``derived_seed(master_seed, scene_index)``,
making scene sampling a pure function of (config, master_seed, scene_index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigInvalid, TooManyObjects
from .scene import (
    CameraModel,
    LightSource,
    ObjectInstance,
    Pose,
    SceneSpec,
    ShapeClass,
    derived_seed,
    look_at,
    quat_from_yaw,
)

WORLD_UP = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class FixedCamera:
    """Camera pose used verbatim for every scene."""

    pose: Pose


@dataclass(frozen=True)
class MovingCamera:
    """Eye sampled in a spherical-shell sector around the grid center."""

    radius_range: tuple[float, float] = (1.5, 3.5)
    elevation_range: tuple[float, float] = (0.25, 1.25)
    azimuth_range: tuple[float, float] = (0.0, 2.0 * math.pi)


CameraMode = Union[FixedCamera, MovingCamera]


@dataclass(frozen=True)
class LightSampler:
    """Light placement law: shell sampling when moving, fixed point otherwise."""

    moves: bool = True
    radius_range: tuple[float, float] = (1.5, 3.5)
    elevation_range: tuple[float, float] = (0.25, 1.25)
    azimuth_range: tuple[float, float] = (0.0, 2.0 * math.pi)
    fixed_position: tuple[float, float, float] = (1.2, -1.8, 2.5)
    intensity_range: tuple[float, float] = (0.7, 1.3)
    ambient: float = 0.25


@dataclass(frozen=True)
class SamplerConfig:
    min_count: int = 2
    max_count: int = 7
    grid_rows: int = 3
    grid_cols: int = 3
    cell_size: float = 0.9
    jitter_fraction: float = 0.15
    box_edge_range: tuple[float, float] = (0.1, 0.4)
    cylinder_radius_range: tuple[float, float] = (0.05, 0.15)
    cylinder_length_range: tuple[float, float] = (0.1, 0.4)
    sphere_radius_range: tuple[float, float] = (0.05, 0.2)
    camera: CameraMode = field(default_factory=MovingCamera)
    fov: float = math.pi / 3.0
    light: LightSampler = field(default_factory=LightSampler)
    image_width: int = 1920
    image_height: int = 1080
    texture_count: int = 500

    @property
    def max_footprint(self) -> float:
        """Largest possible axis-aligned ground-footprint extent of any object."""
        box = math.sqrt(2.0) * self.box_edge_range[1]
        cyl = 2.0 * self.cylinder_radius_range[1]
        sph = 2.0 * self.sphere_radius_range[1]
        return max(box, cyl, sph)

    def validate(self) -> None:
        problems = []
        if not 1 <= self.min_count <= self.max_count:
            problems.append(f"require 1 <= min_count <= max_count, got [{self.min_count}, {self.max_count}]")
        if self.max_count > self.grid_rows * self.grid_cols:
            problems.append(f"max_count {self.max_count} exceeds grid capacity {self.grid_rows * self.grid_cols}")
        if self.grid_rows < 1 or self.grid_cols < 1:
            problems.append("grid must have at least one row and column")
        if self.cell_size <= 0:
            problems.append("cell_size must be positive")
        if not 0.0 <= self.jitter_fraction < 0.5:
            problems.append(f"jitter_fraction must lie in [0, 0.5), got {self.jitter_fraction}")
        for name in ("box_edge_range", "cylinder_radius_range", "cylinder_length_range", "sphere_radius_range"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo <= hi:
                problems.append(f"{name} must satisfy 0 < min <= max, got ({lo}, {hi})")
        limit = self.cell_size * (1.0 - 2.0 * self.jitter_fraction)
        if self.max_footprint > limit:
            problems.append(
                f"max object footprint {self.max_footprint:.4f} exceeds "
                f"cell_size*(1 - 2*jitter_fraction) = {limit:.4f}; overlap-free placement not guaranteed"
            )
        if not 0.0 < self.fov < math.pi:
            problems.append(f"fov must lie in (0, pi), got {self.fov}")
        if isinstance(self.camera, MovingCamera):
            rlo, rhi = self.camera.radius_range
            elo, ehi = self.camera.elevation_range
            alo, ahi = self.camera.azimuth_range
            if not 0.0 < rlo <= rhi:
                problems.append("camera radius_range must satisfy 0 < min <= max")
            if not 0.0 <= elo <= ehi < math.pi / 2:
                problems.append("camera elevation_range must satisfy 0 <= min <= max < pi/2")
            if alo > ahi:
                problems.append("camera azimuth_range must satisfy min <= max")
        ls = self.light
        if ls.moves:
            rlo, rhi = ls.radius_range
            elo, ehi = ls.elevation_range
            if not 0.0 < rlo <= rhi:
                problems.append("light radius_range must satisfy 0 < min <= max")
            if not 0.0 <= elo <= ehi <= math.pi / 2:
                problems.append("light elevation_range must satisfy 0 <= min <= max <= pi/2")
            if ls.azimuth_range[0] > ls.azimuth_range[1]:
                problems.append("light azimuth_range must satisfy min <= max")
        ilo, ihi = ls.intensity_range
        if not 0.0 < ilo <= ihi <= 2.0:
            problems.append(f"light intensity_range must lie within (0, 2], got ({ilo}, {ihi})")
        if not 0.0 <= ls.ambient <= 1.0:
            problems.append(f"light ambient must lie in [0, 1], got {ls.ambient}")
        if self.image_width < 2 or self.image_height < 2:
            problems.append("image dimensions must be at least 2x2")
        if self.texture_count < 1:
            problems.append("texture_count must be >= 1")
        if problems:
            raise ConfigInvalid("; ".join(problems))


def default_fixed_camera_pose(eye=(0.0, -2.5, 2.0), target=(0.0, 0.0, 0.0)) -> Pose:
    """Downward-looking pose aimed at the grid center."""
    return look_at(eye, target, WORLD_UP)


def cell_center(row: int, col: int, config: SamplerConfig) -> tuple[float, float]:
    """World xy of a grid cell center; the grid is centered on the origin."""
    x = (col - (config.grid_cols - 1) / 2.0) * config.cell_size
    y = (row - (config.grid_rows - 1) / 2.0) * config.cell_size
    return x, y


def sample_grid_cells(
    n: int, rng: np.random.Generator, rows: int = 3, cols: int = 3
) -> list[tuple[int, int]]:
    """Draw n distinct cells uniformly without replacement."""
    if n < 1:
        raise ValueError(f"need at least one cell, got n={n}")
    if n > rows * cols:
        raise TooManyObjects(f"requested {n} cells from a {rows}x{cols} grid")
    flat = rng.choice(rows * cols, size=n, replace=False)
    return [(int(c) // cols, int(c) % cols) for c in flat]


def _shell_point(center, radius_range, elevation_range, azimuth_range, rng) -> np.ndarray:
    r = float(rng.uniform(*radius_range))
    elev = float(rng.uniform(*elevation_range))
    azim = float(rng.uniform(*azimuth_range))
    horiz = r * math.cos(elev)
    return np.asarray(center, dtype=np.float64) + np.array(
        [horiz * math.cos(azim), horiz * math.sin(azim), r * math.sin(elev)]
    )


def sample_camera(mode: CameraMode, grid_center, rng: np.random.Generator) -> Pose:
    """Fixed mode returns the configured pose; moving mode aims a shell sample
    at the grid center."""
    if isinstance(mode, FixedCamera):
        return mode.pose
    eye = _shell_point(grid_center, mode.radius_range, mode.elevation_range, mode.azimuth_range, rng)
    return look_at(eye, grid_center, WORLD_UP)


def _sample_object(
    obj_id: int, row: int, col: int, config: SamplerConfig, rng: np.random.Generator
) -> ObjectInstance:
    shape = ShapeClass(int(rng.integers(0, 3)))
    if shape is ShapeClass.BOX:
        dims = rng.uniform(*config.box_edge_range, size=3)
    elif shape is ShapeClass.CYLINDER:
        radius = float(rng.uniform(*config.cylinder_radius_range))
        length = float(rng.uniform(*config.cylinder_length_range))
        dims = np.array([radius, radius, length])
    else:
        radius = float(rng.uniform(*config.sphere_radius_range))
        dims = np.array([radius, radius, radius])
    yaw = float(rng.uniform(0.0, 2.0 * math.pi))
    jit = config.jitter_fraction * config.cell_size
    dx, dy = rng.uniform(-jit, jit, size=2)
    cx, cy = cell_center(row, col, config)
    half_height = float(dims[0]) if shape is ShapeClass.SPHERE else float(dims[2]) / 2.0
    pose = Pose(position=(cx + dx, cy + dy, half_height), orientation=quat_from_yaw(yaw))
    texture_id = int(rng.integers(0, config.texture_count))
    return ObjectInstance(id=obj_id, shape=shape, pose=pose, dims=dims, texture_id=texture_id)


def sample_scene(config: SamplerConfig, master_seed: int, scene_index: int) -> SceneSpec:
    """Sample one scene. Pure function of (config, master_seed, scene_index).

    Draw order is fixed: object count, grid cells, per-object parameters
    (class, dims, yaw, jitter, texture), camera, light, ground texture.
    """
    config.validate()
    seed = derived_seed(master_seed, scene_index)
    rng = np.random.default_rng(seed)

    n = int(rng.integers(config.min_count, config.max_count + 1))
    cells = sample_grid_cells(n, rng, config.grid_rows, config.grid_cols)
    objects = tuple(
        _sample_object(i + 1, row, col, config, rng) for i, (row, col) in enumerate(cells)
    )

    grid_center = (0.0, 0.0, 0.0)
    camera_pose = sample_camera(config.camera, grid_center, rng)
    camera = CameraModel(
        pose=camera_pose,
        horizontal_fov=config.fov,
        width=config.image_width,
        height=config.image_height,
    )

    ls = config.light
    if ls.moves:
        light_pos = _shell_point(grid_center, ls.radius_range, ls.elevation_range, ls.azimuth_range, rng)
    else:
        light_pos = np.asarray(ls.fixed_position, dtype=np.float64)
    intensity = float(rng.uniform(*ls.intensity_range))
    light = LightSource(position=light_pos, intensity=intensity, ambient=ls.ambient)

    ground_texture_id = int(rng.integers(0, config.texture_count))
    return SceneSpec(
        scene_index=scene_index,
        seed=seed,
        objects=objects,
        camera=camera,
        light=light,
        ground_texture_id=ground_texture_id,
    )
