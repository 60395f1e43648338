import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randr.errors import DegenerateLookAt
from randr.scene import (
    CameraModel,
    LightSource,
    ObjectInstance,
    Pose,
    ShapeClass,
    derived_seed,
    look_at,
    matrix_to_quat,
    project,
    quat_from_yaw,
    quat_to_matrix,
)


class TestDerivedSeed:
    def test_purity(self):
        assert derived_seed(123456789, 42) == derived_seed(123456789, 42)

    def test_distinct_indices(self):
        assert derived_seed(7, 0) != derived_seed(7, 1)

    def test_output_is_u64(self):
        for s, i in [(0, 0), (2**64 - 1, 2**31), (42, 999999)]:
            v = derived_seed(s, i)
            assert 0 <= v < 2**64

    @given(st.integers(0, 2**64 - 1), st.integers(0, 2**32))
    def test_purity_property(self, seed, idx):
        assert derived_seed(seed, idx) == derived_seed(seed, idx)

    def test_avalanche(self):
        # Monte-Carlo bit-flip oracle: flipping one random input bit should
        # flip about half of the 64 output bits on average.
        rng = np.random.default_rng(0)
        n = 10**5
        seeds = rng.integers(0, 2**63, size=n, dtype=np.uint64)
        indices = rng.integers(0, 2**32, size=n, dtype=np.uint64)
        bits = rng.integers(0, 64, size=n)
        total_flips = 0
        for s, i, b in zip(seeds.tolist(), indices.tolist(), bits.tolist()):
            base = derived_seed(s, i)
            mutated = derived_seed(s ^ (1 << b), i)
            total_flips += bin(base ^ mutated).count("1")
        mean = total_flips / n
        assert 24.0 <= mean <= 40.0


class TestPose:
    def test_quaternion_normalization_enforced(self):
        with pytest.raises(ValueError):
            Pose(position=(0, 0, 0), orientation=(1.0, 0.0, 0.1, 0.0))

    def test_arrays_frozen(self):
        p = Pose(position=(1, 2, 3), orientation=(1, 0, 0, 0))
        with pytest.raises(ValueError):
            p.position[0] = 5.0

    def test_yaw_quaternion_rotates_x_to_y(self):
        q = quat_from_yaw(math.pi / 2)
        m = quat_to_matrix(q)
        np.testing.assert_allclose(m @ [1, 0, 0], [0, 1, 0], atol=1e-12)

    @given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_matrix_quat_roundtrip(self, a, b, c):
        q = np.array([1.0, a, b, c])
        q /= np.linalg.norm(q)
        m = quat_to_matrix(q)
        q2 = matrix_to_quat(m)
        np.testing.assert_allclose(quat_to_matrix(q2), m, atol=1e-9)


class TestObjectInstance:
    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ValueError):
            ObjectInstance(1, ShapeClass.BOX, Pose((0, 0, 0), (1, 0, 0, 0)), (0.0, 1, 1), 0)

    def test_round_shapes_need_equal_radii(self):
        with pytest.raises(ValueError):
            ObjectInstance(1, ShapeClass.CYLINDER, Pose((0, 0, 0), (1, 0, 0, 0)), (0.1, 0.2, 0.3), 0)

    def test_half_height(self):
        sphere = ObjectInstance(1, ShapeClass.SPHERE, Pose((0, 0, 0.2), (1, 0, 0, 0)), (0.2, 0.2, 0.2), 0)
        assert sphere.half_height == pytest.approx(0.2)
        assert sphere.min_z == pytest.approx(0.0)
        box = ObjectInstance(2, ShapeClass.BOX, Pose((0, 0, 0.15), (1, 0, 0, 0)), (0.1, 0.2, 0.3), 0)
        assert box.half_height == pytest.approx(0.15)

    def test_shape_codes_stable(self):
        assert (ShapeClass.BOX, ShapeClass.CYLINDER, ShapeClass.SPHERE) == (0, 1, 2)
        assert ShapeClass.from_label("sphere") is ShapeClass.SPHERE


class TestLightSource:
    def test_bounds(self):
        with pytest.raises(ValueError):
            LightSource(position=(0, 0, 1), intensity=0.0, ambient=0.2)
        with pytest.raises(ValueError):
            LightSource(position=(0, 0, 1), intensity=1.0, ambient=1.5)


class TestLookAt:
    def test_forward_direction(self):
        pose = look_at((0, -5, 5), (0, 0, 0))
        forward = pose.rotation[:, 2]
        expected = np.array([0.0, 5.0, -5.0]) / math.sqrt(50.0)
        np.testing.assert_allclose(forward, expected, atol=1e-12)

    def test_degenerate_coincident(self):
        with pytest.raises(DegenerateLookAt):
            look_at((1, 1, 1), (1, 1, 1))

    def test_degenerate_parallel_up(self):
        with pytest.raises(DegenerateLookAt):
            look_at((0, 0, 5), (0, 0, 0), up_hint=(0, 0, 1))

    def test_rotation_is_orthonormal(self):
        pose = look_at((1.0, -2.0, 3.0), (0.2, 0.4, 0.1))
        m = pose.rotation
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(m) == pytest.approx(1.0)

    def test_target_projects_to_center_random(self):
        # look_at + project composition: target lands on the principal point
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            eye = rng.uniform(-5, 5, 3)
            target = rng.uniform(-5, 5, 3)
            if np.linalg.norm(eye - target) < 1e-3:
                continue
            forward = (target - eye) / np.linalg.norm(target - eye)
            if abs(forward[2]) > 0.999:
                continue
            cam = CameraModel(look_at(eye, target), horizontal_fov=1.2, width=1920, height=1080)
            px = project(cam, target)
            worst = max(worst, abs(px[0] - 960.0), abs(px[1] - 540.0))
        assert worst < 1e-6


class TestProject:
    def _camera(self, fov=math.pi / 2, width=640, height=480):
        return CameraModel(look_at((0, 0, 1), (0, 5, 1)), horizontal_fov=fov, width=width, height=height)

    def test_optical_axis_hits_principal_point(self):
        cam = self._camera()
        np.testing.assert_allclose(project(cam, (0, 3, 1)), [320.0, 240.0], atol=1e-9)

    def test_focal_length_at_right_angle_fov(self):
        cam = self._camera(fov=math.pi / 2, width=640)
        assert cam.focal_px == pytest.approx(320.0)

    def test_behind_camera(self):
        cam = self._camera()
        assert project(cam, (0, -1, 1)) is None

    def test_known_offset(self):
        cam = self._camera()
        # point one unit right of the axis at depth equal to the focal plane
        px = project(cam, (1.0, 1.0, 1.0))
        assert px[0] == pytest.approx(320.0 + 320.0)
        assert px[1] == pytest.approx(240.0)
