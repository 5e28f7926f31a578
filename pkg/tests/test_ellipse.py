from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from fuzzysphere.ellipse import (
    ALPHA,
    BETA,
    aspect_ratio_from_shape,
    boundary_polyline,
    conic_matrix,
    eccentricity1_to_3,
    ellipse_geometry,
    perimeter_approx,
    perimeter_exact,
    principal_axes,
    shape_param,
    shape_param_exact,
)
from fuzzysphere.membrane import InvariantCoords, MembraneConfig, invariants

vec = st.lists(st.floats(-4, 4, allow_nan=False), min_size=3, max_size=3)


def _gram_axes(cfg):
    g = np.array([[cfg.x @ cfg.x, cfg.x @ cfg.y], [cfg.x @ cfg.y, cfg.y @ cfg.y]])
    lo, hi = np.linalg.eigvalsh(g)
    return math.sqrt(max(hi, 0)), math.sqrt(max(lo, 0))


def test_coefficients():
    assert ALPHA + BETA == pytest.approx(2 * math.pi)
    assert ALPHA == pytest.approx(4 * math.sqrt(2))


class TestAxes:
    @given(vec, vec)
    def test_against_gram_eigenvalues(self, x, y):
        cfg = MembraneConfig(x, y)
        a, b, theta = principal_axes(cfg)
        ea, eb = _gram_axes(cfg)
        assert a == pytest.approx(ea, rel=1e-9, abs=1e-9)
        assert b == pytest.approx(eb, rel=1e-6, abs=1e-6)
        assert -math.pi / 2 <= theta < math.pi / 2

    def test_documented_example(self):
        a, b, _ = principal_axes(MembraneConfig([1, 1, 0], [0, 1, 1]))
        assert a == pytest.approx(math.sqrt(3)) and b == pytest.approx(1.0)
        geom = ellipse_geometry(MembraneConfig([1, 1, 0], [0, 1, 1]))
        assert geom.A == pytest.approx(2 * math.pi * math.sqrt(3))

    def test_conic_matrix_is_gram(self):
        cfg = MembraneConfig([1, 2, 0], [0, 1, 3])
        g = conic_matrix(cfg)
        assert g.shape == (2, 2)
        assert np.allclose(np.sort(np.linalg.eigvalsh(g)), np.sort(np.array(_gram_axes(cfg)) ** 2))


class TestPerimeter:
    @pytest.mark.parametrize("a,b", [(1, 1), (2, 1), (5, 0.3), (1, 0)])
    def test_against_arc_length(self, a, b):
        ref, _ = integrate.quad(lambda t: math.hypot(a * math.sin(t), b * math.cos(t)), 0, 2 * math.pi,
                                epsabs=1e-13, limit=200)
        assert perimeter_exact(a, b) == pytest.approx(ref, rel=1e-11)

    def test_argument_order(self):
        with pytest.raises(ValueError):
            perimeter_exact(1.0, 2.0)
        assert perimeter_exact(0.0, 0.0) == 0.0

    @given(st.floats(0.01, 1.0))
    def test_approximation_within_four_percent(self, W):
        d = math.sqrt(1 - W)
        a, b = math.sqrt(1 + d), math.sqrt(W / (1 + d))
        inv = InvariantCoords(1.0, W, W)
        assert abs(perimeter_approx(inv) / perimeter_exact(a, b) - 1) <= 0.04
        assert abs(shape_param(inv) / shape_param_exact(a, b) - 1) <= 0.08

    def test_endpoints_exact(self):
        assert perimeter_approx(InvariantCoords(2.0, 4.0, 1.0)) == pytest.approx(2 * math.pi * math.sqrt(2), rel=1e-15)
        assert perimeter_approx(InvariantCoords(2.0, 0.0, 0.0)) == pytest.approx(perimeter_exact(2.0, 0.0), rel=1e-15)


class TestShape:
    def test_circle_and_needle(self):
        assert shape_param(InvariantCoords(3.0, 9.0, 1.0)) == pytest.approx(1.0)
        assert shape_param(InvariantCoords(1.0, 0.0, 0.0)) == math.inf
        assert shape_param_exact(1.0, 0.0) == math.inf

    @given(st.floats(1.0, 50.0))
    def test_aspect_ratio_roundtrip(self, r):
        s = shape_param_exact(r, 1.0)
        assert aspect_ratio_from_shape(s) == pytest.approx(r, rel=1e-9)

    def test_typical_ratio(self):
        assert aspect_ratio_from_shape(2.225) == pytest.approx(4.973, abs=0.005)
        assert aspect_ratio_from_shape(1.0) == 1.0
        with pytest.raises(ValueError):
            aspect_ratio_from_shape(0.9)


class TestGeometryRecord:
    def test_circle(self):
        g = ellipse_geometry(MembraneConfig([1, 0, 0], [0, 1, 0]))
        assert g.A == pytest.approx(2 * math.pi)
        assert g.E3 == 0.0 and g.S == pytest.approx(1.0)

    def test_needle(self):
        g = ellipse_geometry(MembraneConfig([1, 0, 0], [2, 0, 0]))
        assert g.E3 == 1.0 and g.S == math.inf
        assert g.L_exact == pytest.approx(4 * math.sqrt(5))
        assert g.to_dict()["S"] == math.inf

    @given(vec, vec)
    def test_eccentricity_relation(self, x, y):
        cfg = MembraneConfig(x, y)
        if invariants(cfg).U < 1e-6:
            return
        g = ellipse_geometry(cfg)
        assert g.E3 == pytest.approx(eccentricity1_to_3(g.E1), abs=1e-6)

    @given(vec, vec)
    def test_boundary_on_conic(self, x, y):
        g = ellipse_geometry(MembraneConfig(x, y))
        if g.b < 1e-3:
            return
        pts = boundary_polyline(g, 64)
        assert pts.shape == (64, 2)
        from fuzzysphere.ellipse import conic_residual
        assert np.max(np.abs(conic_residual(g, pts))) < 1e-9

    def test_boundary_matches_membrane_image(self):
        # the rim of the projected sphere coincides with the principal-axis ellipse
        from fuzzysphere.membrane import membrane_point
        from fuzzysphere.ellipse import conic_residual
        cfg = MembraneConfig([1.0, 0.5, -0.2], [0.3, -0.8, 1.1])
        g = ellipse_geometry(cfg)
        th, ph = np.meshgrid(np.linspace(0, math.pi, 60), np.linspace(0, 2 * math.pi, 60))
        X, Y = membrane_point(cfg, th, ph)
        r = conic_residual(g, np.stack([X.ravel(), Y.ravel()], axis=1))
        assert r.max() <= 1e-9
        assert r.max() > -1e-3  # some points reach the rim

    def test_polyline_needs_points(self):
        g = ellipse_geometry(MembraneConfig([1, 0, 0], [0, 1, 0]))
        with pytest.raises(ValueError):
            boundary_polyline(g, 2)
