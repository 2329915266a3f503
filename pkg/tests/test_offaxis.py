"""Tests des caméras hors-axe (matrices, sténopé, paire stéréo)."""

import logging
import math

import numpy as np
import pytest

from app.geom import DegenerateScreenError, GeometryError, frustum_matrix, project
from app.offaxis import (
    Box2,
    CameraMatrices,
    EyeBehindScreenError,
    EyeOffScreenError,
    InvalidCameraError,
    NonRectangularScreenError,
    PinholeCamera,
    ScreenConfig,
    StereoRig,
    check_rectangular,
    frustum_distances,
    offaxis_stereo_camera,
    offaxis_stereo_transform,
    stereo_eyes,
)
from app.sampling import random_configuration

NDC_CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


class TestScreenConfig:
    def test_derived_corners(self, unit_screen):
        np.testing.assert_allclose(unit_screen.upper_left, [-1, 1, 0])
        np.testing.assert_allclose(unit_screen.center, [0, 0, 0])
        assert unit_screen.width == pytest.approx(2.0)
        assert unit_screen.height == pytest.approx(2.0)
        assert unit_screen.diagonal == pytest.approx(2 * math.sqrt(2))

    def test_collinear_rejected(self):
        with pytest.raises(DegenerateScreenError):
            ScreenConfig((0, 0, 0), (1, 0, 0), (3, 0, 0))

    def test_sheared_rejected(self):
        screen = ScreenConfig((0, 0, 0), (2, 0, 0), (2.5, 2, 0))
        with pytest.raises(NonRectangularScreenError):
            frustum_distances(screen, (1, 1, 1))

    def test_slight_skew_warns(self, caplog):
        screen = ScreenConfig((0, 0, 0), (2, 0, 0), (2.001, 2, 0))
        with caplog.at_level(logging.WARNING, logger="app.offaxis"):
            check_rectangular(screen)
        assert "non rectangulaire" in caplog.text

    def test_frustum_distances_stays_silent_on_slight_skew(self, caplog):
        screen = ScreenConfig((0, 0, 0), (2, 0, 0), (2.001, 2, 0))
        with caplog.at_level(logging.WARNING, logger="app.offaxis"):
            for eye in ((1, 1, 1), (0.97, 1, 1), (1.03, 1, 1)):
                frustum_distances(screen, eye)
        assert caplog.records == []


class TestFrustumDistances:
    def test_centered(self, unit_screen):
        d = frustum_distances(unit_screen, (0, 0, 1))
        assert (d.dist, d.left, d.right, d.bottom, d.top) == pytest.approx((1, 1, 1, 1, 1))

    def test_offset(self, unit_screen):
        d = frustum_distances(unit_screen, (-0.5, 0, 1))
        assert (d.dist, d.left, d.right, d.bottom, d.top) == pytest.approx((1, 0.5, 1.5, 1, 1))

    def test_eye_behind(self, unit_screen):
        with pytest.raises(EyeBehindScreenError):
            frustum_distances(unit_screen, (0, 0, -1))

    def test_eye_on_plane(self, unit_screen):
        with pytest.raises(EyeBehindScreenError):
            frustum_distances(unit_screen, (0, 0, 0))

    def test_eye_off_screen(self, unit_screen):
        with pytest.raises(EyeOffScreenError):
            frustum_distances(unit_screen, (1.5, 0, 1))

    def test_eye_on_edge_accepted(self, unit_screen):
        d = frustum_distances(unit_screen, (-1, 0, 1))
        assert d.left == pytest.approx(0.0)


class TestStereoTransform:
    def test_symmetric_projection(self, unit_screen):
        cams = offaxis_stereo_transform(unit_screen, (0, 0, 1))
        expected = frustum_matrix(-1e-3, 1e-3, -1e-3, 1e-3, 1e-3, 1000)
        np.testing.assert_allclose(cams.proj, expected, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(cams.view[:3, :3], np.eye(3), atol=1e-12)

    def test_view_sends_eye_to_origin(self, unit_screen):
        eye = np.array([0.3, -0.2, 1.4])
        cams = offaxis_stereo_transform(unit_screen, eye)
        np.testing.assert_allclose((cams.view @ np.append(eye, 1.0))[:3], 0, atol=1e-12)
        np.testing.assert_allclose(cams.eye, eye, atol=1e-12)

    def test_forward_points_into_screen(self, unit_screen):
        cams = offaxis_stereo_transform(unit_screen, (0.3, -0.2, 1.4))
        np.testing.assert_allclose(cams.forward, [0, 0, -1], atol=1e-12)
        assert cams.is_perspective

    def test_corner_pinning_random(self, rng):
        for _ in range(100):
            screen, eye = random_configuration(rng)
            cams = offaxis_stereo_transform(screen, eye)
            ndc = project(cams.proj, cams.view, np.stack(screen.corners()))
            np.testing.assert_allclose(ndc[:, :2], NDC_CORNERS, atol=1e-5)

    def test_screen_plane_has_zero_disparity(self, unit_screen, rng):
        rig = StereoRig((0.2, 0.1, 1.5), (1, 0, 0), 0.063)
        left, right = (offaxis_stereo_transform(unit_screen, e) for e in stereo_eyes(rig))
        points = np.column_stack([rng.uniform(-1, 1, (50, 2)), np.zeros(50)])
        np.testing.assert_allclose(
            project(left.proj, left.view, points)[:, :2],
            project(right.proj, right.view, points)[:, :2],
            atol=1e-9,
        )

    def test_custom_clip_planes(self, unit_screen):
        cams = offaxis_stereo_transform(unit_screen, (0, 0, 1), znear=0.5, zfar=10)
        near = project(cams.proj, cams.view, [0, 0, 0.5])
        assert near[2] == pytest.approx(-1.0)


class TestCameraMatrices:
    def test_rejects_wrong_inverse(self):
        with pytest.raises(InvalidCameraError):
            CameraMatrices(np.eye(4), np.eye(4), 2 * np.eye(4), np.eye(4))

    def test_orthographic_is_not_perspective(self):
        assert not CameraMatrices.from_matrices(np.eye(4), np.eye(4)).is_perspective


class TestStereoCamera:
    def test_centered(self, unit_screen):
        cam = offaxis_stereo_camera(unit_screen, (0, 0, 1))
        assert cam.fovy == pytest.approx(math.pi / 2)
        assert cam.aspect == pytest.approx(1.0)
        assert cam.image_region.is_unit

    def test_worked_example(self, unit_screen):
        cam = offaxis_stereo_camera(unit_screen, (-0.5, 0, 1))
        assert cam.fovy == pytest.approx(math.pi / 2, abs=1e-9)
        assert cam.aspect == pytest.approx(1.5, abs=1e-9)
        assert cam.image_region.min == pytest.approx((1 / 3, 0.0), abs=1e-9)
        assert cam.image_region.max == pytest.approx((1.0, 1.0), abs=1e-9)
        np.testing.assert_allclose(cam.direction, [0, 0, -1])
        np.testing.assert_allclose(cam.up, [0, 1, 0])
        np.testing.assert_allclose(cam.right, [1, 0, 0])

    def test_vertical_offset(self, unit_screen):
        # bottom=1.5, top=0.5 : plan virtuel de hauteur 3, on garde le bas
        cam = offaxis_stereo_camera(unit_screen, (0, 0.5, 1))
        assert cam.fovy == pytest.approx(2 * math.atan(1.5))
        assert cam.aspect == pytest.approx(2 / 3)
        assert cam.image_region.min == pytest.approx((0.0, 0.0))
        assert cam.image_region.max == pytest.approx((1.0, 2 / 3))

    def test_mirrored_eyes_mirror_regions(self, unit_screen):
        a = offaxis_stereo_camera(unit_screen, (-0.4, 0.2, 1.2)).image_region
        b = offaxis_stereo_camera(unit_screen, (0.4, 0.2, 1.2)).image_region
        assert a.min[0] == pytest.approx(1 - b.max[0])
        assert a.max[0] == pytest.approx(1 - b.min[0])
        assert a.min[1] == pytest.approx(b.min[1])

    def test_region_covers_screen_fraction(self, rng):
        for _ in range(50):
            screen, eye = random_configuration(rng)
            cam = offaxis_stereo_camera(screen, eye)
            d = frustum_distances(screen, eye)
            region_w = cam.image_region.max[0] - cam.image_region.min[0]
            region_h = cam.image_region.max[1] - cam.image_region.min[1]
            virtual_h = 2 * d.dist * math.tan(cam.fovy / 2)
            assert region_w * cam.aspect * virtual_h == pytest.approx(screen.width, rel=1e-9)
            assert region_h * virtual_h == pytest.approx(screen.height, rel=1e-9)

    def test_eye_behind(self, unit_screen):
        with pytest.raises(EyeBehindScreenError):
            offaxis_stereo_camera(unit_screen, (0, 0, -1))


class TestPinholeCamera:
    def test_rejects_non_orthogonal(self):
        with pytest.raises(InvalidCameraError):
            PinholeCamera((0, 0, 0), (0, 0, -1), (0, 0, 1), 1.0, 1.0)

    @pytest.mark.parametrize("fovy", [0.0, math.pi, -1.0])
    def test_rejects_bad_fovy(self, fovy):
        with pytest.raises(InvalidCameraError):
            PinholeCamera((0, 0, 0), (0, 0, -1), (0, 1, 0), fovy, 1.0)

    def test_box_validation(self):
        with pytest.raises(GeometryError):
            Box2((0.5, 0.0), (0.2, 1.0))
        assert Box2().is_unit


class TestStereoEyes:
    def test_symmetric_offset(self):
        left, right = stereo_eyes(StereoRig((0, 0, 1), (1, 0, 0), 0.064))
        np.testing.assert_allclose(left, [-0.032, 0, 1])
        np.testing.assert_allclose(right, [0.032, 0, 1])

    def test_zero_ipd(self):
        left, right = stereo_eyes(StereoRig((0, 0, 1), (1, 0, 0), 0.0))
        np.testing.assert_array_equal(left, right)

    def test_rotated_head(self):
        left, right = stereo_eyes(StereoRig((0, 0, 0), (0, 0, 1), 0.06))
        np.testing.assert_allclose(left, [0, 0, -0.03])
        np.testing.assert_allclose(right, [0, 0, 0.03])

    def test_negative_ipd(self):
        with pytest.raises(InvalidCameraError):
            StereoRig((0, 0, 1), (1, 0, 0), -0.01)

    def test_unusual_ipd_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="app.offaxis"):
            StereoRig((0, 0, 1), (1, 0, 0), 0.2)
        assert "IPD inhabituelle" in caplog.text
