import math

import numpy as np
import pytest

from randr.errors import BadTextureId, IndivisibleDimensions
from randr.render import (
    Hit,
    Ray,
    downscale,
    intersect,
    render,
    shade,
    to_uint8,
)
from randr.sampler import SamplerConfig, sample_scene
from randr.scene import (
    BACKGROUND_ID,
    GROUND_ID,
    CameraModel,
    LightSource,
    ObjectInstance,
    Pose,
    SceneSpec,
    ShapeClass,
    look_at,
    project,
    quat_from_yaw,
)
from randr.textures import FlatPattern, TextureConfig, build_texture_library, gen_texture

IDENT = (1.0, 0.0, 0.0, 0.0)


def _sphere(center, r, obj_id=1):
    return ObjectInstance(obj_id, ShapeClass.SPHERE, Pose(center, IDENT), (r, r, r), 0)


def _box(center, dims, obj_id=1, yaw=0.0):
    return ObjectInstance(obj_id, ShapeClass.BOX, Pose(center, quat_from_yaw(yaw)), dims, 0)


def _cyl(center, r, length, obj_id=1):
    return ObjectInstance(obj_id, ShapeClass.CYLINDER, Pose(center, IDENT), (r, r, length), 0)


class TestIntersect:
    def test_sphere_head_on(self):
        h = intersect(Ray((0, 0, 0), (1, 0, 0)), _sphere((5, 0, 0), 1.0))
        assert h.t == pytest.approx(4.0, abs=1e-12)
        np.testing.assert_allclose(h.point, [4, 0, 0], atol=1e-12)
        np.testing.assert_allclose(h.normal, [-1, 0, 0], atol=1e-12)

    def test_sphere_miss(self):
        assert intersect(Ray((0, 0, 0), (1, 0, 0)), _sphere((5, 3, 0), 1.0)) is None

    def test_sphere_grazing_offset(self):
        # slab-free quadratic oracle: offset 0.6, radius 1 -> half chord 0.8
        h = intersect(Ray((0, 0.6, 0), (1, 0, 0)), _sphere((5, 0, 0), 1.0))
        assert h.t == pytest.approx(5.0 - 0.8, abs=1e-9)

    def test_box_slab_oracle(self):
        h = intersect(Ray((-3, 0.2, 0.3), (1, 0, 0)), _box((0, 0, 0), (1, 1, 1)))
        assert h.t == pytest.approx(2.5, abs=1e-12)
        np.testing.assert_allclose(h.normal, [-1, 0, 0], atol=1e-12)

    def test_box_miss_beside(self):
        assert intersect(Ray((-3, 0.8, 0), (1, 0, 0)), _box((0, 0, 0), (1, 1, 1))) is None

    def test_box_from_inside_exits(self):
        h = intersect(Ray((0, 0, 0), (1, 0, 0)), _box((0, 0, 0), (1, 1, 1)))
        assert h.t == pytest.approx(0.5)
        # normal flipped to face the (interior) ray origin
        assert float(np.dot(h.normal, [1, 0, 0])) < 0

    def test_box_rotated_45deg(self):
        # yaw pi/4 turns the unit box corner toward the ray: first hit at the
        # corner distance sqrt(2)/2 from center
        h = intersect(Ray((-3, 0, 0.0), (1, 0, 0)), _box((0, 0, 0), (1, 1, 1), yaw=math.pi / 4))
        assert h.t == pytest.approx(3 - math.sqrt(2) / 2, abs=1e-9)

    def test_cylinder_lateral(self):
        h = intersect(Ray((-3, 0, 0), (1, 0, 0)), _cyl((0, 0, 0), 0.5, 2.0))
        assert h.t == pytest.approx(2.5, abs=1e-12)
        np.testing.assert_allclose(h.normal, [-1, 0, 0], atol=1e-12)

    def test_cylinder_cap(self):
        h = intersect(Ray((0.1, 0.2, 5), (0, 0, -1)), _cyl((0, 0, 0), 0.5, 2.0))
        assert h.t == pytest.approx(4.0, abs=1e-12)
        np.testing.assert_allclose(h.normal, [0, 0, 1], atol=1e-12)

    def test_cylinder_misses_past_cap(self):
        assert intersect(Ray((-3, 0, 1.1), (1, 0, 0)), _cyl((0, 0, 0), 0.5, 2.0)) is None

    def test_normal_faces_origin_random(self, rng):
        objs = [
            _sphere((0, 0, 0.4), 0.4),
            _box((0, 0, 0.2), (0.5, 0.3, 0.4), yaw=0.7),
            _cyl((0, 0, 0.3), 0.25, 0.6),
        ]
        checked = 0
        for _ in range(500):
            origin = rng.uniform(-3, 3, 3)
            origin[2] = abs(origin[2]) + 0.5
            target = rng.uniform(-0.2, 0.2, 3)
            d = target - origin
            d = d / np.linalg.norm(d)
            for obj in objs:
                h = intersect(Ray(origin, d), obj)
                if h is not None:
                    assert float(np.dot(h.normal, d)) < 0
                    assert 0.0 <= h.uv[0] <= 1.0 and 0.0 <= h.uv[1] <= 1.0
                    checked += 1
        assert checked > 300

    def test_uv_sphere_equator(self):
        h = intersect(Ray((-3, 0, 0), (1, 0, 0)), _sphere((0, 0, 0), 1.0))
        # hit at (-1, 0, 0): azimuth atan2(0,-1) = pi -> u = 1; equator v=0.5
        assert h.uv[0] == pytest.approx(1.0)
        assert h.uv[1] == pytest.approx(0.5)


class TestShade:
    def _hit(self, normal):
        return Hit(t=1.0, point=np.array([0.0, 0.0, 1.0]), normal=np.asarray(normal, float),
                   object_id=1, uv=np.array([0.5, 0.5]))

    def _texture(self, color=(0.8, 0.6, 0.4)):
        return gen_texture(FlatPattern(color=color), 8, 0)

    def test_facing_light(self):
        light = LightSource(position=(0, 0, 5), intensity=1.0, ambient=0.25)
        rgb = shade(self._hit((0, 0, 1)), light, self._texture())
        np.testing.assert_allclose(rgb, np.minimum(np.array([0.8, 0.6, 0.4]) * 1.25, 1.0), atol=1e-6)

    def test_perpendicular_light(self):
        light = LightSource(position=(5, 0, 1), intensity=1.0, ambient=0.25)
        rgb = shade(self._hit((0, 0, 1)), light, self._texture())
        np.testing.assert_allclose(rgb, np.array([0.8, 0.6, 0.4]) * 0.25, atol=1e-6)

    def test_occluded_gets_ambient_only(self):
        # shadow-ray oracle: a sphere sits between the point and the light
        light = LightSource(position=(0, 0, 5), intensity=1.0, ambient=0.25)
        blocker = _sphere((0, 0, 3), 0.5, obj_id=2)
        rgb = shade(self._hit((0, 0, 1)), light, self._texture(), occluders=[blocker])
        np.testing.assert_allclose(rgb, np.array([0.8, 0.6, 0.4]) * 0.25, atol=1e-6)

    def test_clamped_to_one(self):
        light = LightSource(position=(0, 0, 5), intensity=2.0, ambient=1.0)
        rgb = shade(self._hit((0, 0, 1)), light, self._texture((1.0, 1.0, 1.0)))
        np.testing.assert_allclose(rgb, [1, 1, 1], atol=1e-7)


@pytest.fixture(scope="module")
def small_lib():
    return build_texture_library(TextureConfig(library_size=24, resolution=32), 3, workers=1)


def _camera(eye=(0.0, -2.0, 1.5), target=(0.0, 0.0, 0.0), width=320, height=180):
    return CameraModel(look_at(eye, target), horizontal_fov=math.pi / 3, width=width, height=height)


def _scene(objects, camera=None, light=None, ground_tex=0):
    return SceneSpec(
        scene_index=0,
        seed=1,
        objects=tuple(objects),
        camera=camera or _camera(),
        light=light or LightSource(position=(1.0, -1.0, 3.0), intensity=1.0, ambient=0.25),
        ground_texture_id=ground_tex,
    )


class TestRender:
    def test_empty_scene_ids(self, small_lib):
        out = render(_scene([]), small_lib)
        ids = set(np.unique(out.id_mask).tolist())
        assert ids <= {GROUND_ID, BACKGROUND_ID}
        assert GROUND_ID in ids

    def test_background_present_when_horizon_visible(self, small_lib):
        cam = _camera(eye=(0.0, -2.0, 0.3), target=(0.0, 2.0, 0.5))
        out = render(_scene([], camera=cam), small_lib)
        assert BACKGROUND_ID in np.unique(out.id_mask)

    def test_single_sphere_mask_centroid(self, small_lib):
        # analytic projection oracle: an on-axis sphere's silhouette centroid
        # sits on the principal point
        sphere = _sphere((0, 0, 0.3), 0.3)
        cam = _camera(target=(0, 0, 0.3))
        out = render(_scene([sphere], camera=cam), small_lib)
        ys, xs = np.nonzero(out.id_mask == 1)
        assert ys.size > 50
        cx, cy = xs.mean() + 0.5, ys.mean() + 0.5
        assert abs(cx - 160.0) < 1.0
        assert abs(cy - 90.0) < 1.0

    def test_worker_counts_bit_identical(self, small_lib, small_sampler_config):
        spec = sample_scene(small_sampler_config, 42, 2)
        spec = SceneSpec(spec.scene_index, spec.seed, spec.objects, spec.camera, spec.light, 3)
        a = render(spec, small_lib, workers=1)
        b = render(spec, small_lib, workers=8)
        assert np.array_equal(a.color, b.color)
        assert np.array_equal(a.id_mask, b.id_mask)

    def test_repeat_render_bit_identical(self, small_lib, small_sampler_config):
        spec = sample_scene(small_sampler_config, 9, 0)
        spec = SceneSpec(spec.scene_index, spec.seed, spec.objects, spec.camera, spec.light, 1)
        a = render(spec, small_lib)
        b = render(spec, small_lib)
        assert np.array_equal(a.color, b.color)
        assert np.array_equal(a.id_mask, b.id_mask)

    def test_bad_texture_id(self, small_lib):
        with pytest.raises(BadTextureId):
            render(_scene([], ground_tex=99), small_lib)
        sphere = ObjectInstance(1, ShapeClass.SPHERE, Pose((0, 0, 0.3), IDENT), (0.3, 0.3, 0.3), 99)
        with pytest.raises(BadTextureId):
            render(_scene([sphere]), small_lib)

    def test_nearest_hit_consistency(self, small_lib, small_sampler_config, rng):
        # winner pixels re-intersected against every object: the recorded
        # winner has the smallest hit distance
        spec = sample_scene(small_sampler_config, 4, 1)
        spec = SceneSpec(spec.scene_index, spec.seed, spec.objects, spec.camera, spec.light, 0)
        out = render(spec, small_lib)
        cam = spec.camera
        eye = cam.pose.position
        rot = cam.pose.rotation
        f = cam.focal_px
        obj_pixels = np.nonzero(out.id_mask > GROUND_ID)
        if obj_pixels[0].size == 0:
            pytest.skip("no object pixels in this scene")
        pick = rng.choice(obj_pixels[0].size, size=min(300, obj_pixels[0].size), replace=False)
        objects_by_id = {o.id: o for o in spec.objects}
        for k in pick:
            py, px = int(obj_pixels[0][k]), int(obj_pixels[1][k])
            d_cam = np.array([(px + 0.5 - cam.width / 2) / f, (py + 0.5 - cam.height / 2) / f, 1.0])
            d = rot @ (d_cam / np.linalg.norm(d_cam))
            winner = int(out.id_mask[py, px])
            hit = intersect(Ray(eye, d), objects_by_id[winner])
            assert hit is not None
            for obj in spec.objects:
                if obj.id == winner:
                    continue
                other = intersect(Ray(eye, d), obj)
                if other is not None:
                    assert hit.t <= other.t + 1e-4

    def test_shadow_darkens_ground(self, small_lib):
        # a sphere directly under the light must cast an ambient-only shadow
        light = LightSource(position=(0.0, 0.0, 4.0), intensity=1.0, ambient=0.25)
        sphere = _sphere((0, 0, 0.5), 0.25)
        flat_lib = build_texture_library(
            TextureConfig(library_size=2, resolution=8, enabled_patterns=("flat",)), 1, workers=1
        )
        out = render(_scene([sphere], light=light), flat_lib)
        H, W = out.id_mask.shape
        cam = _camera()
        shadow_px = project(cam, (0.0, 0.0, 0.0))
        sx, sy = int(shadow_px[0]), int(shadow_px[1])
        far_color = out.color[H - 5, 10]
        shadow_color = out.color[sy, sx]
        assert out.id_mask[sy, sx] == GROUND_ID
        assert shadow_color.max() < far_color.max() * 0.5


class TestDownscale:
    def test_shape(self):
        img = np.zeros((1080, 1920, 3), dtype=np.float32)
        assert downscale(img, 2).shape == (540, 960, 3)

    def test_constant_preserved(self):
        img = np.full((8, 8, 3), 0.37, dtype=np.float32)
        np.testing.assert_array_equal(downscale(img, 2), np.full((4, 4, 3), np.float32(0.37)))

    def test_block_average_oracle(self):
        img = np.zeros((2, 2, 3), dtype=np.float32)
        vals = np.array([0, 4, 8, 4], dtype=np.float32) / 255.0
        img[0, 0] = vals[0]
        img[0, 1] = vals[1]
        img[1, 0] = vals[2]
        img[1, 1] = vals[3]
        out = downscale(img, 2)
        np.testing.assert_array_equal(out[0, 0], np.full(3, np.float32(4.0 / 255.0)))

    def test_indivisible(self):
        with pytest.raises(IndivisibleDimensions):
            downscale(np.zeros((5, 4, 3)), 2)

    def test_to_uint8_rounding(self):
        img = np.array([[[0.0, 1.0, 0.5]]], dtype=np.float32)
        np.testing.assert_array_equal(to_uint8(img), [[[0, 255, 128]]])
        assert to_uint8(np.array([[[2.0]]])).item() == 255


class TestThroughput:
    def test_full_hd_frame_budget(self, small_sampler_config):
        # seven-object Full-HD frame within 2 seconds (0.5 fps floor)
        import time
        import dataclasses

        from randr.sampler import SamplerConfig
        from randr.textures import TextureConfig, build_texture_library

        lib = build_texture_library(TextureConfig(library_size=8, resolution=64), 5, workers=1)
        cfg = SamplerConfig(min_count=7, max_count=7, texture_count=8)
        spec = sample_scene(cfg, 11, 0)
        render(spec, lib, workers=2)  # warm caches
        t0 = time.perf_counter()
        render(spec, lib, workers=min(4, __import__("os").cpu_count() or 1))
        assert time.perf_counter() - t0 <= 2.0
