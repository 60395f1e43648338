"""Pipeline configuration: JSON schema, defaults, strict parsing, validation.

Unspecified fields take documented defaults; unknown fields are rejected.
The fully resolved config round-trips through ``to_dict``/``config_from_dict``
so a dataset manifest's snapshot is sufficient to regenerate the dataset.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigInvalid, InvalidPattern, ParseError, UnknownField, ValidationError
from .sampler import FixedCamera, LightSampler, MovingCamera, SamplerConfig, default_fixed_camera_pose
from .textures import TextureConfig

STRATEGIES = ("pool", "respawn")


@dataclass(frozen=True)
class RenderConfig:
    width: int = 1920
    height: int = 1080
    downscale: int = 2
    jpeg_quality: int = 90
    background_color: tuple[float, float, float] = (0.5, 0.5, 0.5)

    @property
    def out_width(self) -> int:
        return self.width // self.downscale

    @property
    def out_height(self) -> int:
        return self.height // self.downscale


@dataclass(frozen=True)
class AnnotatorConfig:
    min_visible_pixels: int = 25


@dataclass(frozen=True)
class PipelineConfig:
    master_seed: int = 0
    num_scenes: int = 100
    output_dir: str = "out"
    strategy: str = "pool"
    render: RenderConfig = field(default_factory=RenderConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    textures: TextureConfig = field(default_factory=TextureConfig)
    annotator: AnnotatorConfig = field(default_factory=AnnotatorConfig)

    def validate(self) -> None:
        problems = []
        if not 0 <= self.master_seed < (1 << 64):
            problems.append(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")
        if self.num_scenes < 1:
            problems.append(f"num_scenes must be >= 1, got {self.num_scenes}")
        if self.strategy not in STRATEGIES:
            problems.append(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        r = self.render
        if r.width < 2 or r.height < 2:
            problems.append("render dimensions must be at least 2x2")
        if r.downscale < 1:
            problems.append(f"downscale must be >= 1, got {r.downscale}")
        elif r.width % r.downscale or r.height % r.downscale:
            problems.append(f"render {r.width}x{r.height} not divisible by downscale {r.downscale}")
        if not 1 <= r.jpeg_quality <= 100:
            problems.append(f"jpeg_quality must lie in [1, 100], got {r.jpeg_quality}")
        if len(r.background_color) != 3 or not all(0.0 <= c <= 1.0 for c in r.background_color):
            problems.append(f"background_color must be an RGB triple in [0, 1], got {r.background_color}")
        t = self.textures
        if t.library_size < 1:
            problems.append(f"library_size must be >= 1, got {t.library_size}")
        if t.resolution < 2:
            problems.append(f"texture resolution must be >= 2, got {t.resolution}")
        if not t.enabled_patterns:
            problems.append("enabled_patterns must not be empty")
        lo, hi = t.perlin_frequency_range
        if not 0.0 < lo <= hi:
            problems.append(f"perlin_frequency_range must satisfy 0 < min <= max, got {t.perlin_frequency_range}")
        lo, hi = t.perlin_octaves_range
        if not 1 <= lo <= hi <= 8:
            problems.append(f"perlin_octaves_range must lie within [1, 8], got {t.perlin_octaves_range}")
        lo, hi = t.perlin_persistence_range
        if not 0.0 < lo <= hi <= 1.0:
            problems.append(f"perlin_persistence_range must lie within (0, 1], got {t.perlin_persistence_range}")
        lo, hi = t.chess_cells_range
        if not 2 <= lo <= hi:
            problems.append(f"chess_cells_range must satisfy 2 <= min <= max, got {t.chess_cells_range}")
        if self.annotator.min_visible_pixels < 0:
            problems.append("min_visible_pixels must be >= 0")
        if problems:
            raise ValidationError("; ".join(problems))
        try:
            self.sampler.validate()
        except ConfigInvalid as exc:
            raise ValidationError(str(exc)) from None

    def to_dict(self) -> dict:
        s = self.sampler
        if isinstance(s.camera, FixedCamera):
            mode = "fixed"
            fixed_eye = [float(v) for v in s.camera.pose.position]
            moving = MovingCamera()
        else:
            mode = "moving"
            fixed_eye = list(_DEFAULT_FIXED_EYE)
            moving = s.camera
        ls = s.light
        return {
            "master_seed": self.master_seed,
            "num_scenes": self.num_scenes,
            "output_dir": self.output_dir,
            "strategy": self.strategy,
            "render": {
                "width": self.render.width,
                "height": self.render.height,
                "downscale": self.render.downscale,
                "jpeg_quality": self.render.jpeg_quality,
                "background_color": list(self.render.background_color),
            },
            "sampler": {
                "min_count": s.min_count,
                "max_count": s.max_count,
                "grid_rows": s.grid_rows,
                "grid_cols": s.grid_cols,
                "cell_size": s.cell_size,
                "jitter_fraction": s.jitter_fraction,
                "box_edge_range": list(s.box_edge_range),
                "cylinder_radius_range": list(s.cylinder_radius_range),
                "cylinder_length_range": list(s.cylinder_length_range),
                "sphere_radius_range": list(s.sphere_radius_range),
                "fov": s.fov,
                "camera": {
                    "mode": mode,
                    "radius_range": list(moving.radius_range),
                    "elevation_range": list(moving.elevation_range),
                    "azimuth_range": list(moving.azimuth_range),
                    "fixed_eye": fixed_eye,
                },
                "light": {
                    "moves": ls.moves,
                    "radius_range": list(ls.radius_range),
                    "elevation_range": list(ls.elevation_range),
                    "azimuth_range": list(ls.azimuth_range),
                    "fixed_position": list(ls.fixed_position),
                    "intensity_range": list(ls.intensity_range),
                    "ambient": ls.ambient,
                },
            },
            "textures": {
                "library_size": self.textures.library_size,
                "resolution": self.textures.resolution,
                "enabled_patterns": list(self.textures.enabled_patterns),
                "perlin_frequency_range": list(self.textures.perlin_frequency_range),
                "perlin_octaves_range": list(self.textures.perlin_octaves_range),
                "perlin_persistence_range": list(self.textures.perlin_persistence_range),
                "chess_cells_range": list(self.textures.chess_cells_range),
            },
            "annotator": {"min_visible_pixels": self.annotator.min_visible_pixels},
        }


_DEFAULT_FIXED_EYE = (0.0, -2.5, 2.0)


# ---------------------------------------------------------------------------
# strict conversion helpers

def _reject_unknown(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise UnknownField(f"unknown field(s) in {where}: {', '.join(sorted(unknown))}")


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where} must be an integer, got {v!r}")
    return v


def _as_float(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where} must be a number, got {v!r}")
    f = float(v)
    if not math.isfinite(f):
        raise ParseError(f"{where} must be finite, got {v!r}")
    return f


def _as_bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise ParseError(f"{where} must be a boolean, got {v!r}")
    return v


def _as_str(v, where: str) -> str:
    if not isinstance(v, str):
        raise ParseError(f"{where} must be a string, got {v!r}")
    return v


def _as_pair(v, where: str) -> tuple[float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ParseError(f"{where} must be a [min, max] pair, got {v!r}")
    return (_as_float(v[0], where), _as_float(v[1], where))


def _as_int_pair(v, where: str) -> tuple[int, int]:
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ParseError(f"{where} must be a [min, max] pair, got {v!r}")
    return (_as_int(v[0], where), _as_int(v[1], where))


def _as_vec3(v, where: str) -> tuple[float, float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ParseError(f"{where} must be a 3-vector, got {v!r}")
    return tuple(_as_float(c, where) for c in v)


def _section(doc: dict, name: str) -> dict:
    raw = doc.get(name, {})
    if not isinstance(raw, dict):
        raise ParseError(f"{name} must be an object, got {raw!r}")
    return raw


def _build_camera(raw: dict):
    _reject_unknown(raw, ("mode", "radius_range", "elevation_range", "azimuth_range", "fixed_eye"), "sampler.camera")
    mode = _as_str(raw.get("mode", "moving"), "sampler.camera.mode")
    if mode not in ("moving", "fixed"):
        raise ValidationError(f"camera mode must be 'moving' or 'fixed', got {mode!r}")
    if mode == "fixed":
        eye = _as_vec3(raw.get("fixed_eye", list(_DEFAULT_FIXED_EYE)), "sampler.camera.fixed_eye")
        return FixedCamera(pose=default_fixed_camera_pose(eye=eye))
    default = MovingCamera()
    return MovingCamera(
        radius_range=_as_pair(raw.get("radius_range", list(default.radius_range)), "sampler.camera.radius_range"),
        elevation_range=_as_pair(
            raw.get("elevation_range", list(default.elevation_range)), "sampler.camera.elevation_range"
        ),
        azimuth_range=_as_pair(
            raw.get("azimuth_range", list(default.azimuth_range)), "sampler.camera.azimuth_range"
        ),
    )


def _build_light(raw: dict) -> LightSampler:
    allowed = (
        "moves", "radius_range", "elevation_range", "azimuth_range",
        "fixed_position", "intensity_range", "ambient",
    )
    _reject_unknown(raw, allowed, "sampler.light")
    d = LightSampler()
    return LightSampler(
        moves=_as_bool(raw.get("moves", d.moves), "sampler.light.moves"),
        radius_range=_as_pair(raw.get("radius_range", list(d.radius_range)), "sampler.light.radius_range"),
        elevation_range=_as_pair(
            raw.get("elevation_range", list(d.elevation_range)), "sampler.light.elevation_range"
        ),
        azimuth_range=_as_pair(raw.get("azimuth_range", list(d.azimuth_range)), "sampler.light.azimuth_range"),
        fixed_position=_as_vec3(raw.get("fixed_position", list(d.fixed_position)), "sampler.light.fixed_position"),
        intensity_range=_as_pair(
            raw.get("intensity_range", list(d.intensity_range)), "sampler.light.intensity_range"
        ),
        ambient=_as_float(raw.get("ambient", d.ambient), "sampler.light.ambient"),
    )


def config_from_dict(doc: dict) -> PipelineConfig:
    """Build and validate a PipelineConfig from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ParseError(f"config root must be an object, got {doc!r}")
    _reject_unknown(
        doc,
        ("master_seed", "num_scenes", "output_dir", "strategy", "render", "sampler", "textures", "annotator"),
        "config",
    )

    raw_r = _section(doc, "render")
    _reject_unknown(raw_r, ("width", "height", "downscale", "jpeg_quality", "background_color"), "render")
    dr = RenderConfig()
    render = RenderConfig(
        width=_as_int(raw_r.get("width", dr.width), "render.width"),
        height=_as_int(raw_r.get("height", dr.height), "render.height"),
        downscale=_as_int(raw_r.get("downscale", dr.downscale), "render.downscale"),
        jpeg_quality=_as_int(raw_r.get("jpeg_quality", dr.jpeg_quality), "render.jpeg_quality"),
        background_color=_as_vec3(
            raw_r.get("background_color", list(dr.background_color)), "render.background_color"
        ),
    )

    raw_t = _section(doc, "textures")
    allowed_t = (
        "library_size", "resolution", "enabled_patterns", "perlin_frequency_range",
        "perlin_octaves_range", "perlin_persistence_range", "chess_cells_range",
    )
    _reject_unknown(raw_t, allowed_t, "textures")
    dt = TextureConfig()
    enabled = raw_t.get("enabled_patterns", list(dt.enabled_patterns))
    if not isinstance(enabled, (list, tuple)) or not all(isinstance(p, str) for p in enabled):
        raise ParseError(f"textures.enabled_patterns must be a list of family names, got {enabled!r}")
    try:
        textures = TextureConfig(
            library_size=_as_int(raw_t.get("library_size", dt.library_size), "textures.library_size"),
            resolution=_as_int(raw_t.get("resolution", dt.resolution), "textures.resolution"),
            enabled_patterns=tuple(enabled),
            perlin_frequency_range=_as_pair(
                raw_t.get("perlin_frequency_range", list(dt.perlin_frequency_range)),
                "textures.perlin_frequency_range",
            ),
            perlin_octaves_range=_as_int_pair(
                raw_t.get("perlin_octaves_range", list(dt.perlin_octaves_range)),
                "textures.perlin_octaves_range",
            ),
            perlin_persistence_range=_as_pair(
                raw_t.get("perlin_persistence_range", list(dt.perlin_persistence_range)),
                "textures.perlin_persistence_range",
            ),
            chess_cells_range=_as_int_pair(
                raw_t.get("chess_cells_range", list(dt.chess_cells_range)), "textures.chess_cells_range"
            ),
        )
    except InvalidPattern as exc:
        raise ValidationError(str(exc)) from None

    raw_s = _section(doc, "sampler")
    allowed_s = (
        "min_count", "max_count", "grid_rows", "grid_cols", "cell_size", "jitter_fraction",
        "box_edge_range", "cylinder_radius_range", "cylinder_length_range", "sphere_radius_range",
        "fov", "camera", "light",
    )
    _reject_unknown(raw_s, allowed_s, "sampler")
    ds = SamplerConfig()
    sampler = SamplerConfig(
        min_count=_as_int(raw_s.get("min_count", ds.min_count), "sampler.min_count"),
        max_count=_as_int(raw_s.get("max_count", ds.max_count), "sampler.max_count"),
        grid_rows=_as_int(raw_s.get("grid_rows", ds.grid_rows), "sampler.grid_rows"),
        grid_cols=_as_int(raw_s.get("grid_cols", ds.grid_cols), "sampler.grid_cols"),
        cell_size=_as_float(raw_s.get("cell_size", ds.cell_size), "sampler.cell_size"),
        jitter_fraction=_as_float(raw_s.get("jitter_fraction", ds.jitter_fraction), "sampler.jitter_fraction"),
        box_edge_range=_as_pair(raw_s.get("box_edge_range", list(ds.box_edge_range)), "sampler.box_edge_range"),
        cylinder_radius_range=_as_pair(
            raw_s.get("cylinder_radius_range", list(ds.cylinder_radius_range)), "sampler.cylinder_radius_range"
        ),
        cylinder_length_range=_as_pair(
            raw_s.get("cylinder_length_range", list(ds.cylinder_length_range)), "sampler.cylinder_length_range"
        ),
        sphere_radius_range=_as_pair(
            raw_s.get("sphere_radius_range", list(ds.sphere_radius_range)), "sampler.sphere_radius_range"
        ),
        fov=_as_float(raw_s.get("fov", ds.fov), "sampler.fov"),
        camera=_build_camera(_section(raw_s, "camera")),
        light=_build_light(_section(raw_s, "light")),
        image_width=render.width,
        image_height=render.height,
        texture_count=textures.library_size,
    )

    raw_a = _section(doc, "annotator")
    _reject_unknown(raw_a, ("min_visible_pixels",), "annotator")
    annotator = AnnotatorConfig(
        min_visible_pixels=_as_int(
            raw_a.get("min_visible_pixels", AnnotatorConfig().min_visible_pixels),
            "annotator.min_visible_pixels",
        )
    )

    config = PipelineConfig(
        master_seed=_as_int(doc.get("master_seed", 0), "master_seed"),
        num_scenes=_as_int(doc.get("num_scenes", 100), "num_scenes"),
        output_dir=_as_str(doc.get("output_dir", "out"), "output_dir"),
        strategy=_as_str(doc.get("strategy", "pool"), "strategy"),
        render=render,
        sampler=sampler,
        textures=textures,
        annotator=annotator,
    )
    config.validate()
    return config


def parse_config(path) -> PipelineConfig:
    """Load, default-fill, and validate a pipeline config JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(doc)


def with_disabled_patterns(config: PipelineConfig, disabled) -> PipelineConfig:
    """Copy of the config with the given texture families removed."""
    remaining = tuple(p for p in config.textures.enabled_patterns if p not in set(disabled))
    textures = replace(config.textures, enabled_patterns=remaining)
    out = replace(config, textures=textures)
    out.validate()
    return out
