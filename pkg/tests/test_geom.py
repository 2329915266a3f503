"""Tests des primitives géométriques."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.geom import (
    DegenerateFrustumError,
    DegenerateScreenError,
    GeometryError,
    Line,
    ParallelLinesError,
    ParallelPlanesError,
    Plane,
    SingularMatrixError,
    UnprojectionError,
    closest_segment_between_lines,
    from_column_major,
    frustum_matrix,
    intersect_plane_plane,
    invert,
    normalize,
    project,
    screen_basis,
    to_column_major,
    unproject_ndc,
    vec3,
)
from app.offaxis import ScreenConfig, offaxis_stereo_transform


def _clip_to_ndc(m, point):
    h = m @ np.append(point, 1.0)
    return h[:3] / h[3]


class TestVec3:
    def test_from_scalars_and_iterable(self):
        assert np.array_equal(vec3(1, 2, 3), vec3([1, 2, 3]))
        assert vec3(1, 2, 3).dtype == np.float64

    def test_rejects_wrong_shape(self):
        with pytest.raises(GeometryError):
            vec3([1, 2])

    def test_rejects_non_finite(self):
        with pytest.raises(GeometryError):
            vec3(0.0, np.nan, 1.0)

    def test_normalize_zero_vector(self):
        with pytest.raises(GeometryError):
            normalize(np.zeros(3))


class TestFrustumMatrix:
    def test_near_center_maps_to_ndc_near(self):
        m = frustum_matrix(-1, 1, -1, 1, 1, 100)
        np.testing.assert_allclose(_clip_to_ndc(m, [0, 0, -1]), [0, 0, -1], atol=1e-12)

    def test_reference_entries(self):
        m = frustum_matrix(-1, 1, -1, 1, 1, 100)
        assert m[0, 0] == pytest.approx(1.0)
        assert m[1, 1] == pytest.approx(1.0)
        assert m[2, 2] == pytest.approx(-101 / 99)
        assert m[2, 3] == pytest.approx(-200 / 99)
        np.testing.assert_array_equal(m[3], [0, 0, -1, 0])

    def test_near_corner_maps_to_ndc_corner(self):
        n, f = 0.25, 50.0
        m = frustum_matrix(-n, n, -n, n, n, f)
        np.testing.assert_allclose(_clip_to_ndc(m, [n, n, -n]), [1, 1, -1], atol=1e-12)

    def test_far_plane_maps_to_plus_one(self):
        m = frustum_matrix(-1, 2, -0.5, 1, 0.1, 100)
        assert _clip_to_ndc(m, [0.3, 0.2, -100])[2] == pytest.approx(1.0)

    @pytest.mark.parametrize(
        "args",
        [
            (1, 1, -1, 1, 1, 100),
            (-1, 1, 2, 2, 1, 100),
            (-1, 1, -1, 1, 0, 100),
            (-1, 1, -1, 1, -1, 100),
            (-1, 1, -1, 1, 10, 10),
        ],
    )
    def test_degenerate(self, args):
        with pytest.raises(DegenerateFrustumError):
            frustum_matrix(*args)


class TestInvert:
    def test_identity(self):
        np.testing.assert_array_equal(invert(np.eye(4)), np.eye(4))

    def test_translation(self):
        m = np.eye(4)
        m[:3, 3] = [1, 2, 3]
        expected = np.eye(4)
        expected[:3, 3] = [-1, -2, -3]
        np.testing.assert_allclose(invert(m), expected, atol=1e-12)

    def test_frustum_round_trip(self):
        m = frustum_matrix(-1, 2, -1, 1, 0.1, 100)
        np.testing.assert_allclose(invert(m) @ m, np.eye(4), atol=1e-6)

    def test_singular(self):
        m = np.eye(4)
        m[2] = m[1]
        with pytest.raises(SingularMatrixError):
            invert(m)

    def test_random_well_conditioned(self, rng):
        for _ in range(1000):
            m = rng.uniform(-1.0, 1.0, (4, 4)) + 5.0 * np.eye(4)
            np.testing.assert_allclose(m @ invert(m), np.eye(4), atol=1e-6)


class TestColumnMajor:
    def test_translation_is_last_four(self):
        m = np.eye(4)
        m[:3, 3] = [1, 2, 3]
        assert to_column_major(m)[12:] == (1.0, 2.0, 3.0, 1.0)

    def test_round_trip(self, rng):
        m = rng.normal(size=(4, 4))
        np.testing.assert_array_equal(from_column_major(to_column_major(m)), m)

    def test_wrong_length(self):
        with pytest.raises(GeometryError):
            from_column_major(range(15))


class TestUnproject:
    def test_identity(self):
        p = unproject_ndc(np.eye(4), np.eye(4), [0.3, -0.2, 0.5])
        np.testing.assert_allclose(p, [0.3, -0.2, 0.5])

    def test_far_corner_lies_on_eye_ray(self, unit_screen):
        eye = np.array([0.0, 0.0, 1.0])
        cams = offaxis_stereo_transform(unit_screen, eye)
        p = unproject_ndc(cams.proj_inv, cams.view_inv, [-1, -1, 1])
        cross = np.cross(normalize(p - eye), normalize(unit_screen.lower_left - eye))
        assert np.linalg.norm(cross) < 1e-9

    def test_batch_shape(self):
        out = unproject_ndc(np.eye(4), np.eye(4), np.zeros((5, 7, 3)))
        assert out.shape == (5, 7, 3)

    def test_zero_w(self):
        m = np.eye(4)
        m[3, 3] = 0.0
        m[3, 0] = 1.0
        with pytest.raises(UnprojectionError):
            unproject_ndc(m, np.eye(4), [0.0, 0.5, 0.5])

    @settings(max_examples=200, deadline=None)
    @given(
        x=st.floats(-0.99, 0.99),
        y=st.floats(-0.99, 0.99),
        z=st.floats(-0.99, 0.99),
    )
    def test_project_inverts_unproject(self, x, y, z):
        screen = ScreenConfig((-1, -1, 0), (1, -1, 0), (1, 1, 0))
        screen_cams = offaxis_stereo_transform(screen, np.array([-0.5, 0.25, 1.7]))
        p = unproject_ndc(screen_cams.proj_inv, screen_cams.view_inv, [x, y, z])
        np.testing.assert_allclose(
            project(screen_cams.proj, screen_cams.view, p), [x, y, z], atol=1e-5
        )


class TestPlanes:
    def test_plane_requires_unit_normal(self):
        with pytest.raises(GeometryError):
            Plane((0, 0, 2), (0, 0, 0))
        assert Plane.from_normal_point((0, 0, 2), (0, 0, 1)).signed_distance((0, 0, 3)) == 2

    def test_axis_planes(self):
        line = intersect_plane_plane(Plane((1, 0, 0), (0, 0, 0)), Plane((0, 1, 0), (0, 0, 0)))
        np.testing.assert_allclose(np.abs(line.direction), [0, 0, 1])
        np.testing.assert_allclose(line.point[:2], [0, 0], atol=1e-12)

    def test_offset_planes(self):
        line = intersect_plane_plane(Plane((0, 0, 1), (0, 0, 1)), Plane((1, 0, 0), (2, 0, 0)))
        assert line.point[0] == pytest.approx(2.0)
        assert line.point[2] == pytest.approx(1.0)
        np.testing.assert_allclose(np.abs(line.direction), [0, 1, 0])

    def test_parallel(self):
        with pytest.raises(ParallelPlanesError):
            intersect_plane_plane(Plane((0, 0, 1), (0, 0, 0)), Plane((0, 0, -1), (0, 0, 3)))

    def test_random_residuals(self, rng):
        for _ in range(1000):
            a = Plane.from_normal_point(rng.normal(size=3), rng.uniform(-10, 10, 3))
            b = Plane.from_normal_point(rng.normal(size=3), rng.uniform(-10, 10, 3))
            if np.linalg.norm(np.cross(a.normal, b.normal)) < 1e-3:
                continue
            line = intersect_plane_plane(a, b)
            for t in (0.0, 3.0, 10.0):
                p = line.at(t)
                assert abs(a.signed_distance(p)) < 1e-6
                assert abs(b.signed_distance(p)) < 1e-6


class TestClosestSegment:
    def test_axis_aligned_skew_lines(self):
        p1, p2 = closest_segment_between_lines(
            Line((0, 0, 0), (1, 0, 0)), Line((0, 1, 1), (0, 1, 0))
        )
        np.testing.assert_allclose(p1, [0, 0, 0], atol=1e-12)
        np.testing.assert_allclose(p2, [0, 0, 1], atol=1e-12)
        assert np.linalg.norm(p2 - p1) == pytest.approx(1.0)

    def test_intersecting_lines(self):
        target = np.array([1.0, 2.0, 3.0])
        a = Line(target - 2 * normalize([1, 1, 0]), normalize([1, 1, 0]))
        b = Line(target + 5 * normalize([0, 1, -1]), normalize([0, 1, -1]))
        p1, p2 = closest_segment_between_lines(a, b)
        np.testing.assert_allclose(p1, target, atol=1e-6)
        np.testing.assert_allclose(p2, target, atol=1e-6)

    def test_swapping_swaps_endpoints(self):
        a = Line((0, 0, 0), (1, 0, 0))
        b = Line((0, 1, 1), (0, 1, 0))
        p1, p2 = closest_segment_between_lines(a, b)
        q1, q2 = closest_segment_between_lines(b, a)
        np.testing.assert_allclose(p1, q2, atol=1e-12)
        np.testing.assert_allclose(p2, q1, atol=1e-12)

    def test_parallel(self):
        with pytest.raises(ParallelLinesError):
            closest_segment_between_lines(Line((0, 0, 0), (0, 0, 1)), Line((1, 0, 0), (0, 0, -1)))

    def test_random_perpendicularity(self, rng):
        for _ in range(1000):
            a = Line(rng.uniform(-10, 10, 3), normalize(rng.normal(size=3)))
            b = Line(rng.uniform(-10, 10, 3), normalize(rng.normal(size=3)))
            if np.linalg.norm(np.cross(a.direction, b.direction)) < 1e-3:
                continue
            p1, p2 = closest_segment_between_lines(a, b)
            gap = p2 - p1
            assert abs(np.dot(gap, a.direction)) < 1e-6
            assert abs(np.dot(gap, b.direction)) < 1e-6


class TestScreenBasis:
    def test_axis_aligned(self):
        x, y, z = screen_basis((0, 0, 0), (2, 0, 0), (2, 2, 0))
        np.testing.assert_allclose(x, [1, 0, 0])
        np.testing.assert_allclose(y, [0, 1, 0])
        np.testing.assert_allclose(z, [0, 0, 1])

    def test_rotated_about_y(self):
        # X × Y = (0,0,-1) × (0,1,0) = (1,0,0)
        x, y, z = screen_basis((0, 0, 0), (0, 0, -2), (0, 2, -2))
        np.testing.assert_allclose(x, [0, 0, -1])
        np.testing.assert_allclose(y, [0, 1, 0])
        np.testing.assert_allclose(z, [1, 0, 0])

    def test_collinear(self):
        with pytest.raises(DegenerateScreenError):
            screen_basis((0, 0, 0), (1, 0, 0), (2, 0, 0))

    def test_coincident(self):
        with pytest.raises(DegenerateScreenError):
            screen_basis((0, 0, 0), (0, 0, 0), (1, 1, 0))
