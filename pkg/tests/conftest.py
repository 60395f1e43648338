import math

import numpy as np
import pytest

from randr.config import PipelineConfig, RenderConfig, config_from_dict
from randr.dataset import texture_master_seed
from randr.sampler import SamplerConfig
from randr.textures import TextureConfig, build_texture_library


def tiny_config(tmp_path, **overrides) -> PipelineConfig:
    """Small, fast pipeline config for tests: low render res, tiny library."""
    doc = {
        "master_seed": 42,
        "num_scenes": 4,
        "output_dir": str(tmp_path / "out"),
        "render": {"width": 320, "height": 180, "downscale": 2, "jpeg_quality": 90},
        "textures": {"library_size": 24, "resolution": 64},
        "annotator": {"min_visible_pixels": 4},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return config_from_dict(doc)


@pytest.fixture(scope="session")
def small_library():
    cfg = TextureConfig(library_size=24, resolution=64)
    return build_texture_library(cfg, texture_master_seed(42), workers=1)


@pytest.fixture(scope="session")
def small_sampler_config():
    return SamplerConfig(image_width=320, image_height=180, texture_count=24)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
