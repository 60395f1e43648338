"""randr: deterministic domain-randomization datasets of shape primitives.

Synthesizes annotated object-detection scenes (boxes, cylinders, spheres on a
ground plane) with procedurally textured surfaces, randomized camera and
lighting, exact mask-derived bounding boxes, detection metrics (IoU-0.5
AP/mAP/PR), and an object-pool vs rebuild-per-scene throughput benchmark.
"""

from .annotate import Annotation, BBox, analytic_sphere_bbox, boxes_from_idmask, downscale_idmask
from .config import (
    AnnotatorConfig,
    PipelineConfig,
    RenderConfig,
    config_from_dict,
    parse_config,
    with_disabled_patterns,
)
from .dataset import (
    Manifest,
    SceneMeta,
    ThroughputReport,
    bench,
    dumps_canonical,
    generate_dataset,
    texture_master_seed,
    write_sample,
)
from .evaluate import (
    Detection,
    EvalReport,
    GroundTruthBox,
    average_precision,
    build_report,
    evaluate,
    iou,
    match_detections,
    write_report,
)
from .render import Hit, Ray, RenderOutput, downscale, intersect, render, shade, to_uint8
from .sampler import (
    FixedCamera,
    LightSampler,
    MovingCamera,
    SamplerConfig,
    sample_camera,
    sample_grid_cells,
    sample_scene,
)
from .scene import (
    BACKGROUND_ID,
    GROUND_ID,
    CameraModel,
    LightSource,
    ObjectInstance,
    Pose,
    SceneSpec,
    ShapeClass,
    derived_seed,
    look_at,
    project,
)
from .textures import (
    ChessPattern,
    FlatPattern,
    GradientPattern,
    PerlinPattern,
    PermutationTable,
    TextureConfig,
    TextureImage,
    TextureLibrary,
    build_texture_library,
    fbm2,
    gen_texture,
    perlin2,
    perlin2_grad,
    sample_pattern,
)
from .version import __version__
from .workers import resolve_workers

__all__ = [name for name in dir() if not name.startswith("_")]
