"""
Tests for AFM scan ingestion and preprocessing.

Covers: grid file parsing and errors, unit scaling and datum shift,
profile extraction, downsampling, statistics, phase segmentation and the
mixture rule.
"""

import numpy as np
import pytest

from mpjr.core.exceptions import GridDataError, GridParseError, PhaseFractionError, ProfileIndexError
from mpjr.schemas.grid import GridKind
from mpjr.services import afm_ingest
from mpjr.services.afm_ingest import make_grid


# ================================================================
# Loading
# ================================================================
class TestLoadScanGrid:
    def test_height_datum_shift(self, grid_file):
        path = grid_file("h.txt", [[1, 2], [3, 4]])
        grid = afm_ingest.load_scan_grid(path, GridKind.HEIGHT)
        np.testing.assert_array_equal(grid.values, [[0, 1], [2, 3]])
        assert grid.values.min() == 0.0
        assert grid.unit == "nm"

    def test_peak_force_scaled_not_shifted(self, grid_file):
        path = grid_file("p.txt", [[1, 2], [3, 4]], kind="peak_force")
        grid = afm_ingest.load_scan_grid(path, GridKind.PEAK_FORCE, unit_scale=0.5)
        np.testing.assert_array_equal(grid.values, [[0.5, 1.0], [1.5, 2.0]])
        assert grid.unit_scale == 0.5

    def test_range_preserved_by_datum_shift(self, grid_file):
        values = np.random.default_rng(3).normal(size=(4, 5))
        grid = afm_ingest.load_scan_grid(grid_file("h.txt", values), GridKind.HEIGHT, unit_scale=2.0)
        assert grid.values.max() == pytest.approx(2.0 * (values.max() - values.min()), rel=1e-14)

    def test_values_read_only(self, grid_file):
        grid = afm_ingest.load_scan_grid(grid_file("h.txt", [[1, 2], [3, 4]]), GridKind.HEIGHT)
        with pytest.raises(ValueError):
            grid.values[0, 0] = 5.0

    def test_kind_mismatch(self, grid_file):
        path = grid_file("h.txt", [[1, 2], [3, 4]], kind="modulus")
        with pytest.raises(GridParseError) as exc:
            afm_ingest.load_scan_grid(path, GridKind.HEIGHT)
        assert exc.value.line == 3

    def test_short_row_reports_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("3 2\n1 1\nheight\nnm\n1 2 3\n4 5\n")
        with pytest.raises(GridParseError) as exc:
            afm_ingest.load_scan_grid(path, GridKind.HEIGHT)
        assert exc.value.line == 6

    def test_missing_rows(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("2 3\n1 1\nheight\nnm\n1 2\n3 4\n")
        with pytest.raises(GridParseError):
            afm_ingest.load_scan_grid(path, GridKind.HEIGHT)

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("two 2\n1 1\nheight\nnm\n1 2\n3 4\n")
        with pytest.raises(GridParseError) as exc:
            afm_ingest.load_scan_grid(path, GridKind.HEIGHT)
        assert exc.value.line == 1

    def test_non_finite_value_reports_index(self, tmp_path):
        path = tmp_path / "nan.txt"
        path.write_text("3 2\n1 1\nheight\nnm\n1 2 3\n4 nan 6\n")
        with pytest.raises(GridDataError) as exc:
            afm_ingest.load_scan_grid(path, GridKind.HEIGHT)
        assert exc.value.index == (1, 1)

    def test_negative_dissipation_rejected(self, grid_file):
        path = grid_file("d.txt", [[1, -2], [3, 4]], kind="dissipation")
        with pytest.raises(GridDataError):
            afm_ingest.load_scan_grid(path, GridKind.DISSIPATION)

    def test_save_and_reload(self, tmp_path):
        values = np.random.default_rng(1).uniform(1, 2, size=(3, 4))
        grid = make_grid(values, 0.1, 0.2, GridKind.MODULUS, unit="MPa")
        afm_ingest.save_scan_grid(grid, tmp_path / "m.txt")
        again = afm_ingest.load_scan_grid(tmp_path / "m.txt", GridKind.MODULUS)
        np.testing.assert_array_equal(again.values, grid.values)
        assert (again.dx, again.dy, again.unit) == (0.1, 0.2, "MPa")

    def test_hash_comment_round_trip(self, tmp_path):
        grid = make_grid([[1.0, 2.0], [3.0, 4.0]], 0.5, 0.25, GridKind.MODULUS)
        afm_ingest.save_scan_grid(grid, tmp_path / "m.txt", config_hash="abc123")
        assert (tmp_path / "m.txt").read_text().splitlines()[0] == "# config_hash: abc123"
        again = afm_ingest.load_scan_grid(tmp_path / "m.txt", GridKind.MODULUS)
        np.testing.assert_array_equal(again.values, grid.values)

    def test_line_numbers_count_comment_lines(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# config_hash: abc123\n3 2\n1 1\nheight\nnm\n1 2 3\n4 5\n")
        with pytest.raises(GridParseError) as exc:
            afm_ingest.load_scan_grid(path, GridKind.HEIGHT)
        assert exc.value.line == 7

    def test_csv_export(self, tmp_path):
        grid = make_grid([[1.0, 2.0], [3.0, 4.0]], 0.5, 0.25, GridKind.MODULUS)
        afm_ingest.export_grid_csv(grid, tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[0] == "i,j,x,y,value"
        assert len(lines) == 5
        assert lines[4].split(",") == ["1", "1", "0.5", "0.25", "4"]


# ================================================================
# Profiles and downsampling
# ================================================================
class TestProfiles:
    def test_row_selection(self):
        values = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
        grid = make_grid(values, 1.0, 1.0, GridKind.MODULUS)
        profile = afm_ingest.extract_profile(grid, 1)
        assert profile.is_profile
        np.testing.assert_array_equal(profile.values, [[4.0, 5.0, 6.0]])

    def test_height_profile_redatumed(self):
        grid = make_grid([[5.0, 6.0], [1.0, 3.0]], 1.0, 1.0, GridKind.HEIGHT)
        # make_grid already shifts by the global minimum (1)
        np.testing.assert_array_equal(afm_ingest.extract_profile(grid, 1).values, [[0.0, 2.0]])
        np.testing.assert_array_equal(afm_ingest.extract_profile(grid, 0).values, [[0.0, 1.0]])

    def test_random_rows_match_copy(self):
        values = np.random.default_rng(5).uniform(1, 2, size=(8, 8))
        grid = make_grid(values, 1.0, 1.0, GridKind.PEAK_FORCE)
        for row in range(8):
            np.testing.assert_array_equal(afm_ingest.extract_profile(grid, row).values[0], values[row])

    @pytest.mark.parametrize("row", [-1, 3])
    def test_row_out_of_range(self, row):
        grid = make_grid(np.ones((3, 3)), 1.0, 1.0, GridKind.MODULUS)
        with pytest.raises(ProfileIndexError):
            afm_ingest.extract_profile(grid, row)


class TestDownsample:
    def test_stride_two(self):
        values = np.arange(25.0).reshape(5, 5) + 1
        grid = make_grid(values, 0.1, 0.1, GridKind.MODULUS)
        coarse = afm_ingest.downsample(grid, 2)
        assert (coarse.nx, coarse.ny) == (3, 3)
        np.testing.assert_array_equal(coarse.values, values[::2, ::2])
        assert coarse.dx == pytest.approx(0.2)

    def test_identity(self):
        grid = make_grid(np.ones((3, 3)), 1.0, 1.0, GridKind.MODULUS)
        assert afm_ingest.downsample(grid, 1) is grid

    def test_ramp_corners_and_center(self):
        x, y = np.meshgrid(np.arange(9.0), np.arange(9.0))
        grid = make_grid(x + 2 * y, 1.0, 1.0, GridKind.HEIGHT)
        coarse = afm_ingest.downsample(grid, 4)
        np.testing.assert_array_equal(coarse.values, [[0, 4, 8], [8, 12, 16], [16, 20, 24]])

    def test_composition(self):
        values = np.random.default_rng(2).uniform(1, 2, size=(13, 13))
        grid = make_grid(values, 1.0, 1.0, GridKind.MODULUS)
        twice = afm_ingest.downsample(afm_ingest.downsample(grid, 2), 3)
        once = afm_ingest.downsample(grid, 6)
        np.testing.assert_array_equal(twice.values, once.values)

    def test_invalid_factor(self):
        grid = make_grid(np.ones((3, 3)), 1.0, 1.0, GridKind.MODULUS)
        with pytest.raises(GridDataError):
            afm_ingest.downsample(grid, 0)


# ================================================================
# Statistics and composite surfaces
# ================================================================
class TestSurfaceStatistics:
    def test_two_pass_rms(self):
        values = np.random.default_rng(11).normal(size=(16, 16))
        grid = make_grid(values, 1.0, 1.0, GridKind.HEIGHT)
        stats = afm_ingest.surface_statistics(grid)
        shifted = values - values.min()
        mean = shifted.sum() / shifted.size
        rms = np.sqrt(((shifted - mean) ** 2).sum() / shifted.size)
        assert stats.h_rms == pytest.approx(rms, rel=1e-12)
        assert stats.h_max == pytest.approx(values.max() - values.min(), rel=1e-14)
        assert stats.min == 0.0

    def test_composite_adds_datum_fields(self):
        a = make_grid([[0.0, 1.0, 3.0]], 1.0, 1.0, GridKind.HEIGHT)
        b = make_grid([[2.0, 0.0, 1.0]], 1.0, 1.0, GridKind.HEIGHT)
        combined = afm_ingest.composite_topography(a, b)
        np.testing.assert_array_equal(combined.values, [[1.0, 0.0, 3.0]])

    def test_composite_shape_mismatch(self):
        a = make_grid([[0.0, 1.0]], 1.0, 1.0, GridKind.HEIGHT)
        b = make_grid([[0.0, 1.0, 2.0]], 1.0, 1.0, GridKind.HEIGHT)
        with pytest.raises(GridDataError):
            afm_ingest.composite_topography(a, b)

    def test_averaged(self):
        grid = make_grid([[1.0, 3.0], [5.0, 7.0]], 1.0, 1.0, GridKind.PEAK_FORCE)
        np.testing.assert_array_equal(afm_ingest.averaged(grid).values, np.full((2, 2), 4.0))


# ================================================================
# Phases
# ================================================================
class TestSegmentPhases:
    def test_threshold_comparison(self):
        grid = make_grid([[60.0, 80.0]], 1.0, 1.0, GridKind.MODULUS)
        mask = afm_ingest.segment_phases(grid, 72.44)
        np.testing.assert_array_equal(mask.labels, [[1, 0]])
        assert mask.inclusion_fraction == 0.5

    def test_all_matrix(self):
        grid = make_grid(np.full((2, 3), 100.0), 1.0, 1.0, GridKind.MODULUS)
        mask = afm_ingest.segment_phases(grid, 72.44)
        assert mask.inclusion_fraction == 0.0
        assert mask.inclusion_mean is None
        assert mask.matrix_fraction + mask.inclusion_fraction == 1.0

    def test_masked_means(self):
        values = np.random.default_rng(4).uniform(40, 140, size=(10, 10))
        grid = make_grid(values, 1.0, 1.0, GridKind.MODULUS)
        mask = afm_ingest.segment_phases(grid, 72.44)
        assert mask.inclusion_mean == pytest.approx(values[values < 72.44].mean(), rel=1e-14)
        assert mask.matrix_mean == pytest.approx(values[values >= 72.44].mean(), rel=1e-14)
        assert mask.matrix_fraction + mask.inclusion_fraction == 1.0

    def test_requires_modulus(self):
        grid = make_grid([[1.0, 2.0]], 1.0, 1.0, GridKind.PEAK_FORCE)
        with pytest.raises(GridDataError):
            afm_ingest.segment_phases(grid, 1.5)

    def test_mask_csv(self, tmp_path):
        grid = make_grid([[60.0, 80.0]], 0.5, 0.5, GridKind.MODULUS)
        mask = afm_ingest.segment_phases(grid, 72.44)
        afm_ingest.export_phase_mask_csv(mask, 0.5, 0.5, tmp_path / "mask.csv")
        assert (tmp_path / "mask.csv").read_text().splitlines() == ["i,j,x,y,label", "0,0,0,0,1", "1,0,0.5,0,0"]


class TestEffectiveModulus:
    def test_uniform(self):
        assert afm_ingest.effective_modulus([(0.5, 1.0), (0.5, 1.0)]) == 1.0

    def test_weighted_mean(self):
        assert afm_ingest.effective_modulus([(0.85, 132.03), (0.15, 66.88)]) == pytest.approx(122.2575, rel=1e-14)

    def test_single_phase(self):
        assert afm_ingest.effective_modulus([(1.0, 66.88)]) == 66.88

    def test_convex_combination(self):
        E = afm_ingest.effective_modulus([(0.3, 128.67), (0.7, 64.27)])
        assert 64.27 <= E <= 128.67

    def test_fraction_sum_violation(self):
        with pytest.raises(PhaseFractionError):
            afm_ingest.effective_modulus([(0.5, 1.0), (0.4, 2.0)])

    def test_negative_fraction(self):
        with pytest.raises(PhaseFractionError):
            afm_ingest.effective_modulus([(1.2, 1.0), (-0.2, 2.0)])
