import math

import numpy as np
import pytest

from autogcas.terrain import (
    ScanPattern,
    TerrainFormatError,
    TerrainGrid,
    peaks,
    peaks_terrain,
    sample_height,
    scan_max,
    scan_points,
)


def _random_grid(rng, n=30):
    x = np.linspace(-2000, 2000, n)
    y = np.linspace(-1500, 1500, n + 3)
    return TerrainGrid(x, y, rng.uniform(0, 500, (x.size, y.size)))


class TestPeaks:
    def test_origin_value(self):
        assert peaks(0.0, 0.0) == pytest.approx(0.9810, abs=5e-5)

    def test_zero_vertical_scale_is_flat(self):
        g = peaks_terrain((0, 1000), (0, 1000), 100, 200, 0.0)
        assert np.all(g.z == 0.0)

    def test_grid_matches_formula(self):
        g = peaks_terrain((-3000, 3000), (-3000, 3000), 500, 1000, 100)
        for (i, j) in [(0, 0), (3, 9), (6, 6), (12, 2)]:
            expected = max(100 * float(peaks(g.x[i] / 1000, g.y[j] / 1000)), 0.0)
            assert g.z[i, j] == pytest.approx(expected)
        # mirrored pairs in y: the formula itself is not symmetric, so the grid follows it
        for (i, j) in [(4, 2), (6, 1), (9, 5)]:
            jm = g.y.size - 1 - j
            assert g.z[i, jm] == pytest.approx(max(100 * float(peaks(g.x[i] / 1000, -g.y[j] / 1000)), 0.0))

    def test_floored_at_zero(self):
        g = peaks_terrain((-3000, 3000), (-3000, 3000), 100, 1000, 150)
        assert g.z.min() == 0.0 and g.z.max() > 500

    def test_invalid(self):
        with pytest.raises(ValueError):
            peaks_terrain((0, 1), (0, 1), 0.0, 1.0, 1.0)


class TestGrid:
    def test_round_trip(self, rng):
        g = _random_grid(rng, 6)
        h = TerrainGrid.loads(g.dumps())
        np.testing.assert_array_equal(h.z, g.z)
        np.testing.assert_array_equal(h.x, g.x)

    def test_bad_shape(self):
        with pytest.raises(TerrainFormatError):
            TerrainGrid([0, 1], [0, 1, 2], np.zeros((2, 2)))

    def test_not_increasing(self):
        with pytest.raises(TerrainFormatError):
            TerrainGrid([0, 0], [0, 1], np.zeros((2, 2)))

    def test_non_finite(self):
        with pytest.raises(TerrainFormatError):
            TerrainGrid([0, 1], [0, 1], np.array([[0, np.nan], [0, 0]]))

    @pytest.mark.parametrize("text", ["x 0 1\ny 0 1\nz\n0 0\n", "x 0 1\ny 0 1\nz\n0 0\n0 a\n", "nonsense\n"])
    def test_malformed_text(self, text):
        with pytest.raises(TerrainFormatError):
            TerrainGrid.loads(text)


class TestSampling:
    def test_node_identity(self, rng):
        g = _random_grid(rng)
        for i, j in [(0, 0), (5, 7), (29, 32)]:
            assert sample_height(g, g.x[i], g.y[j]) == pytest.approx(g.z[i, j])

    def test_flat(self):
        g = TerrainGrid.flat(42.0)
        assert sample_height(g, 123.0, -5e5) == 42.0
        assert sample_height(g, 2e6, 0.0) == 42.0

    def test_cell_midpoint(self, rng):
        g = _random_grid(rng)
        x = 0.5 * (g.x[3] + g.x[4])
        y = 0.5 * (g.y[10] + g.y[11])
        assert sample_height(g, x, y) == pytest.approx(g.z[3:5, 10:12].mean())

    def test_outside(self, rng):
        g = _random_grid(rng)
        assert sample_height(g, 1e5, 0.0) == g.outside


class TestScan:
    def test_flat_zero(self):
        assert scan_max(TerrainGrid.flat(0.0), (0.0, 0.0), 0.3) == 0.0

    def test_bump_ahead(self):
        x = np.arange(-1000.0, 2001.0, 25.0)
        y = np.arange(-1000.0, 1001.0, 25.0)
        z = np.zeros((x.size, y.size))
        z[np.searchsorted(x, 500.0), np.searchsorted(y, 0.0)] = 120.0
        g = TerrainGrid(x, y, z)
        assert scan_max(g, (0.0, 0.0), 0.0) == pytest.approx(120.0)
        # the same bump is behind when flying south
        assert scan_max(g, (0.0, 0.0), math.pi) == 0.0

    def test_points_cover_rectangle(self):
        pat = ScanPattern(750.0, 150.0, 25.0)
        pts = scan_points((100.0, 200.0), math.radians(30.0), pat)
        assert pts.shape == (31 * 13, 2)
        rel = pts - [100.0, 200.0]
        h = math.radians(30.0)
        along = rel[:, 0] * math.cos(h) + rel[:, 1] * math.sin(h)
        across = -rel[:, 0] * math.sin(h) + rel[:, 1] * math.cos(h)
        assert along.min() == pytest.approx(0.0, abs=1e-9) and along.max() == pytest.approx(750.0)
        assert np.abs(across).max() == pytest.approx(150.0)

    def test_matches_exhaustive_maximum(self, rng):
        g = _random_grid(rng)
        for _ in range(10):
            pos = tuple(rng.uniform(-500, 500, 2))
            hdg = rng.uniform(-math.pi, math.pi)
            pts = scan_points(pos, hdg, ScanPattern())
            brute = max(sample_height(g, x, y) for x, y in pts)
            assert scan_max(g, pos, hdg) == pytest.approx(brute)

    def test_invalid_pattern(self):
        with pytest.raises(ValueError):
            ScanPattern(ahead=0.0)
