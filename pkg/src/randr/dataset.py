"""Dataset emission, generation strategies, and the throughput benchmark.

Two generation strategies produce bit-identical datasets for equal
(config, seed); only their resource lifecycle differs:

  pool     The texture library is built once at startup and render slots are
           allocated once per worker, then mutated from scene to scene
           (unused slots are parked below the ground plane).
  respawn  Every scene regenerates the texture library and builds its object
           state from scratch, modeling a pipeline without resource reuse.

Output tree: ``<out>/images/scene_XXXXXX.jpg`` (+ optional ``.png`` sidecar),
``<out>/annotations/scene_XXXXXX.json``, ``<out>/manifest.json``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from PIL import Image

from .annotate import Annotation, BBox, boxes_from_idmask, downscale_idmask
from .config import PipelineConfig
from .errors import ConfigInvalid, IoFailure
from .render import downscale, render, to_uint8
from .sampler import sample_scene
from .scene import ObjectInstance, Pose, SceneSpec, ShapeClass, derived_seed
from .textures import TextureImage, build_texture_library, iter_texture_records
from .version import __version__
from .workers import fork_executor, resolve_workers

#: index-stream tag separating texture seeds from scene seeds, which both
#: derive from the same master seed.
TEXTURE_SEED_TAG = 0x5445585455524553


def texture_master_seed(master_seed: int) -> int:
    return derived_seed(master_seed, TEXTURE_SEED_TAG)


# ---------------------------------------------------------------------------
# canonical JSON (bit-exact across runs and platforms)

def _canon(value, out: list[str]) -> None:
    if isinstance(value, dict):
        out.append("{")
        for i, (k, v) in enumerate(value.items()):
            if i:
                out.append(", ")
            out.append(f'"{k}": ')
            _canon(v, out)
        out.append("}")
    elif isinstance(value, (list, tuple)):
        out.append("[")
        for i, v in enumerate(value):
            if i:
                out.append(", ")
            _canon(v, out)
        out.append("]")
    elif isinstance(value, bool):
        out.append("true" if value else "false")
    elif isinstance(value, int):
        out.append(str(value))
    elif isinstance(value, float):
        out.append(format(value, ".17g"))
    elif isinstance(value, str):
        import json

        out.append(json.dumps(value))
    elif value is None:
        out.append("null")
    else:
        raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_canonical(value) -> str:
    """Deterministic JSON: insertion-ordered keys, floats at 17 significant digits."""
    out: list[str] = []
    _canon(value, out)
    return "".join(out)


# ---------------------------------------------------------------------------
# per-scene sample files

@dataclass(frozen=True)
class SceneMeta:
    scene_index: int
    seed: int
    width: int
    height: int


@dataclass(frozen=True)
class SamplePaths:
    image: Path
    annotation: Path
    png: Path | None


def scene_stem(scene_index: int) -> str:
    return f"scene_{scene_index:06d}"


def annotation_document(meta: SceneMeta, annotations: Sequence[Annotation]) -> dict:
    return {
        "image": scene_stem(meta.scene_index) + ".jpg",
        "width": meta.width,
        "height": meta.height,
        "scene_seed": str(meta.seed),
        "objects": [
            {
                "id": a.object_id,
                "class": a.shape.label,
                "bbox": [float(v) for v in a.bbox.as_list()],
                "visible_pixels": a.visible_pixels,
            }
            for a in annotations
        ],
    }


def parse_annotation_document(doc: dict) -> list[Annotation]:
    return [
        Annotation(
            object_id=int(rec["id"]),
            shape=ShapeClass.from_label(rec["class"]),
            bbox=BBox(*(float(v) for v in rec["bbox"])),
            visible_pixels=int(rec["visible_pixels"]),
        )
        for rec in doc["objects"]
    ]


def write_sample(
    color_image: np.ndarray,
    annotations: Sequence[Annotation],
    meta: SceneMeta,
    output_dir,
    *,
    jpeg_quality: int = 90,
    png: bool = False,
) -> SamplePaths:
    """Write one scene's JPEG (optionally PNG sidecar) and annotation JSON.

    ``color_image`` is the downscaled float image in [0, 1]; quantization to
    uint8 happens here, identically for JPEG and PNG.
    """
    output_dir = Path(output_dir)
    stem = scene_stem(meta.scene_index)
    image_path = output_dir / "images" / f"{stem}.jpg"
    ann_path = output_dir / "annotations" / f"{stem}.json"
    png_path = output_dir / "images" / f"{stem}.png" if png else None
    try:
        image_path.parent.mkdir(parents=True, exist_ok=True)
        ann_path.parent.mkdir(parents=True, exist_ok=True)
        u8 = to_uint8(color_image)
        img = Image.fromarray(u8, mode="RGB")
        img.save(image_path, format="JPEG", quality=jpeg_quality)
        if png_path is not None:
            img.save(png_path, format="PNG")
        ann_path.write_text(dumps_canonical(annotation_document(meta, annotations)) + "\n")
    except OSError as exc:
        raise IoFailure(f"writing sample {stem} under {output_dir}: {exc}") from None
    return SamplePaths(image=image_path, annotation=ann_path, png=png_path)


# ---------------------------------------------------------------------------
# manifest

@dataclass(frozen=True)
class Manifest:
    master_seed: int
    num_scenes: int
    strategy: str
    tool_version: str
    config: dict
    entries: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "master_seed": self.master_seed,
            "num_scenes": self.num_scenes,
            "strategy": self.strategy,
            "config": self.config,
            "entries": list(self.entries),
        }

    def write(self, path) -> Path:
        path = Path(path)
        try:
            path.write_text(dumps_canonical(self.to_dict()) + "\n")
        except OSError as exc:
            raise IoFailure(f"writing manifest {path}: {exc}") from None
        return path


# ---------------------------------------------------------------------------
# strategy runtimes

class _SparseImages:
    """Sequence facade over only the texture images one scene actually uses."""

    def __init__(self, images: dict[int, TextureImage], size: int):
        self._images = images
        self._size = size

    def __len__(self) -> int:
        return self._size

    def __getitem__(self, idx: int) -> TextureImage:
        return self._images[idx]


class _SparseLibrary:
    def __init__(self, images: dict[int, TextureImage], size: int):
        self.images = _SparseImages(images, size)


_PARK_DEPTH = -10.0


class _RenderSlot:
    """Reusable per-class object slot; fields are overwritten scene to scene."""

    __slots__ = ("shape", "position", "orientation", "dims", "texture_id", "active")

    def __init__(self, shape: ShapeClass):
        self.shape = shape
        self.position = np.array([0.0, 0.0, _PARK_DEPTH])
        self.orientation = np.array([1.0, 0.0, 0.0, 0.0])
        self.dims = np.array([0.1, 0.1, 0.1])
        self.texture_id = 0
        self.active = False

    def place(self, obj: ObjectInstance) -> None:
        self.position[:] = obj.pose.position
        self.orientation[:] = obj.pose.orientation
        self.dims[:] = obj.dims
        self.texture_id = obj.texture_id
        self.active = True

    def park(self) -> None:
        self.position[2] = _PARK_DEPTH
        self.active = False


class _SlotPool:
    """Persistent render slots: the maximum object count per class, allocated
    once, then recycled by moving them instead of rebuilding them."""

    def __init__(self, max_count: int):
        self.slots = {shape: [_RenderSlot(shape) for _ in range(max_count)] for shape in ShapeClass}

    def bind(self, spec: SceneSpec) -> SceneSpec:
        """Mutate slots to match the sampled scene; park the rest below ground."""
        used: dict[ShapeClass, int] = {shape: 0 for shape in ShapeClass}
        placed = []
        for obj in spec.objects:
            slot = self.slots[obj.shape][used[obj.shape]]
            used[obj.shape] += 1
            slot.place(obj)
            placed.append(
                ObjectInstance(
                    id=obj.id,
                    shape=slot.shape,
                    pose=Pose(position=slot.position, orientation=slot.orientation),
                    dims=slot.dims,
                    texture_id=slot.texture_id,
                )
            )
        for shape, slots in self.slots.items():
            for slot in slots[used[shape] :]:
                if slot.active:
                    slot.park()
        return SceneSpec(
            scene_index=spec.scene_index,
            seed=spec.seed,
            objects=tuple(placed),
            camera=spec.camera,
            light=spec.light,
            ground_texture_id=spec.ground_texture_id,
        )


# Worker context. Under the fork start method children inherit this module
# global; under spawn the pool initializer repopulates it.
_CTX: dict = {}


def _init_worker(payload: dict) -> None:
    _CTX.clear()
    _CTX.update(payload)


def _scene_task(index: int) -> dict:
    config: PipelineConfig = _CTX["config"]
    strategy: str = _CTX["strategy"]
    spec = sample_scene(config.sampler, config.master_seed, index)

    if strategy == "pool":
        library = _CTX["library"]
        pool = _CTX.get("slot_pool")
        if pool is None:
            pool = _SlotPool(config.sampler.max_count)
            _CTX["slot_pool"] = pool
        render_spec = pool.bind(spec)
    else:
        # full library regeneration, retaining only this scene's textures
        needed = {obj.texture_id for obj in spec.objects} | {spec.ground_texture_id}
        images = {}
        for i, _, image in iter_texture_records(config.textures, _CTX["texture_seed"]):
            if i in needed:
                images[i] = image
        library = _SparseLibrary(images, config.textures.library_size)
        render_spec = spec

    out = render(render_spec, library, background=config.render.background_color, workers=1)
    color_small = downscale(out.color, config.render.downscale)
    mask_small = downscale_idmask(out.id_mask, config.render.downscale)
    shapes = {obj.id: obj.shape for obj in spec.objects}
    annotations = boxes_from_idmask(mask_small, shapes, config.annotator.min_visible_pixels)
    meta = SceneMeta(
        scene_index=index,
        seed=spec.seed,
        width=config.render.out_width,
        height=config.render.out_height,
    )
    paths = write_sample(
        color_small,
        annotations,
        meta,
        config.output_dir,
        jpeg_quality=config.render.jpeg_quality,
        png=_CTX["png"],
    )
    return {
        "scene_index": index,
        "image": str(paths.image.relative_to(config.output_dir)),
        "annotation": str(paths.annotation.relative_to(config.output_dir)),
        "scene_seed": str(spec.seed),
    }


def _run_generation(
    config: PipelineConfig,
    strategy: str,
    workers: int,
    png: bool,
) -> tuple[Manifest, dict]:
    config.validate()
    if strategy not in ("pool", "respawn"):
        raise ConfigInvalid(f"unknown strategy {strategy!r}")
    out_dir = Path(config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create output directory {out_dir}: {exc}") from None

    t0 = time.perf_counter()
    payload: dict = {
        "config": config,
        "strategy": strategy,
        "png": png,
        "texture_seed": texture_master_seed(config.master_seed),
    }
    if strategy == "pool":
        payload["library"] = build_texture_library(
            config.textures, payload["texture_seed"], workers=workers
        )
    startup = time.perf_counter() - t0

    n = config.num_scenes
    _init_worker(payload)
    if workers <= 1 or n == 1:
        entries = [_scene_task(i) for i in range(n)]
    else:
        chunk = max(1, math.ceil(n / (workers * 4)))
        with fork_executor(workers) as pool:
            entries = list(pool.map(_scene_task, range(n), chunksize=chunk))
    _CTX.clear()
    wall = time.perf_counter() - t0

    manifest = Manifest(
        master_seed=config.master_seed,
        num_scenes=n,
        strategy=strategy,
        tool_version=__version__,
        config=config.to_dict(),
        entries=tuple(entries),
    )
    manifest.write(out_dir / "manifest.json")
    timing = {
        "wall_seconds": wall,
        "startup_seconds": startup,
        "per_scene_seconds": (wall - startup) / n,
        "scenes_per_sec": n / wall,
    }
    return manifest, timing


def generate_dataset(
    config: PipelineConfig,
    strategy: str | None = None,
    *,
    workers: int | None = None,
    png: bool = False,
) -> Manifest:
    """Sample, render, annotate, and write scenes 0..num_scenes-1.

    Scene-level parallelism; annotations and PNG sidecars are bit-identical
    across strategies and worker counts.
    """
    strategy = strategy or config.strategy
    workers = resolve_workers(workers)
    manifest, _ = _run_generation(config, strategy, workers, png)
    return manifest


# ---------------------------------------------------------------------------
# throughput benchmark

@dataclass(frozen=True)
class StrategyTiming:
    wall_seconds: float
    startup_seconds: float
    per_scene_seconds: float
    scenes_per_sec: float


@dataclass(frozen=True)
class ThroughputReport:
    num_scenes: int
    workers: int
    strategies: dict[str, StrategyTiming]

    @property
    def speedup_pool_over_respawn(self) -> float | None:
        if "pool" in self.strategies and "respawn" in self.strategies:
            return self.strategies["pool"].scenes_per_sec / self.strategies["respawn"].scenes_per_sec
        return None

    def to_dict(self) -> dict:
        d = {
            "num_scenes": self.num_scenes,
            "workers": self.workers,
            "strategies": {
                name: {
                    "wall_seconds": t.wall_seconds,
                    "startup_seconds": t.startup_seconds,
                    "per_scene_seconds": t.per_scene_seconds,
                    "scenes_per_sec": t.scenes_per_sec,
                }
                for name, t in self.strategies.items()
            },
        }
        if self.speedup_pool_over_respawn is not None:
            d["speedup_pool_over_respawn"] = self.speedup_pool_over_respawn
        return d

    def table(self) -> str:
        lines = [
            f"{'strategy':10s} {'wall [s]':>10s} {'startup [s]':>12s} {'s/scene':>10s} {'scenes/s':>10s}",
        ]
        for name, t in self.strategies.items():
            lines.append(
                f"{name:10s} {t.wall_seconds:10.2f} {t.startup_seconds:12.2f} "
                f"{t.per_scene_seconds:10.3f} {t.scenes_per_sec:10.2f}"
            )
        speedup = self.speedup_pool_over_respawn
        if speedup is not None:
            lines.append(f"pool/respawn speedup: {speedup:.2f}x")
        return "\n".join(lines)


def bench(
    config: PipelineConfig,
    strategies: Sequence[str] = ("pool", "respawn"),
    num_scenes: int = 200,
    *,
    workers: int | None = None,
    keep_outputs: bool = False,
) -> ThroughputReport:
    """Time full dataset generation per strategy over the same scene set."""
    import shutil
    import tempfile
    from dataclasses import replace

    if num_scenes < 50:
        raise ConfigInvalid(f"benchmark needs num_scenes >= 50 for stable timing, got {num_scenes}")
    for s in strategies:
        if s not in ("pool", "respawn"):
            raise ConfigInvalid(f"unknown strategy {s!r}")
    workers = resolve_workers(workers)
    timings: dict[str, StrategyTiming] = {}
    for s in strategies:
        tmp = tempfile.mkdtemp(prefix=f"randr-bench-{s}-")
        cfg = replace(config, output_dir=tmp, num_scenes=num_scenes, strategy=s)
        try:
            _, timing = _run_generation(cfg, s, workers, png=False)
        finally:
            if not keep_outputs:
                shutil.rmtree(tmp, ignore_errors=True)
        timings[s] = StrategyTiming(**timing)
    return ThroughputReport(num_scenes=num_scenes, workers=workers, strategies=timings)
