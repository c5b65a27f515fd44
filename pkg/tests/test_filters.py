from __future__ import annotations

import numpy as np
import pytest

from treeloop.filters import (
    FilterConfig,
    TrunkEstimate,
    atl_pre_filter,
    different_tree_detection,
    estimate_trunk_position,
    false_branch_detection,
    false_trunk_detection,
    scaled_config,
    small_blob_removal,
    y_shaped_tree_filter,
)
from treeloop.mask import connected_components, empty_mask, storage_row

from conftest import draw_y_tree

H = W = 256


def rect(m: np.ndarray, y_lo: int, y_hi: int, x_lo: int, x_hi: int) -> None:
    """Fill an inclusive tree-coordinate rectangle."""
    h = m.shape[0]
    m[storage_row(y_hi, h) : storage_row(y_lo, h) + 1, x_lo : x_hi + 1] = True


class TestTrunkEstimate:
    def test_symmetric_trunk(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 0, 39, 126, 130)
        est = estimate_trunk_position(m, default_cfg)
        assert est.found and est.t_pos == 128

    def test_empty_bottom_region(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 100, 150, 0, 255)  # foreground, but above the scan band
        est = estimate_trunk_position(m, default_cfg)
        assert not est.found

    def test_weighted_mean_truncated(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 0, 39, 10, 10)  # 1 px per row over 40 rows
        rect(m, 0, 39, 20, 22)  # 3 px per row over 40 rows
        est = estimate_trunk_position(m, default_cfg)
        # hand check: (10*40 + 21*120) / 160 = 18.25, truncated to 18
        assert est.t_pos == 18

    def test_oracle_on_random_bands(self, default_cfg):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = rng.random((H, W)) < 0.02
            band = m[H - default_cfg.trunk_scan_rows :, :]
            cols = np.nonzero(band)[1]
            est = estimate_trunk_position(m, default_cfg)
            if cols.size == 0:
                assert not est.found
            else:
                assert est.t_pos == int(np.floor(cols.mean()))


class TestSmallBlobRemoval:
    def test_threshold_is_strict(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 10, 16, 10, 16)  # 7x7 = 49 px, removed
        rect(m, 40, 44, 40, 49)  # 5x10 = 50 px, kept
        out = small_blob_removal(m, default_cfg)
        assert out.sum() == 50

    def test_empty(self, default_cfg):
        out = small_blob_removal(empty_mask(8, 8), default_cfg)
        assert not out.any()

    def test_specks_removed_tree_kept(self, default_cfg):
        m = draw_y_tree()
        tree_px = int(m.sum())
        for y, x in ((30, 20), (200, 240), (120, 30)):
            rect(m, y, y + 2, x, x + 2)  # 9-px specks
        out = small_blob_removal(m, default_cfg)
        assert out.sum() == tree_px


class TestDifferentTree:
    def test_far_blob_removed(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 50, 80, 235, 245)  # centroid x = 240
        out = different_tree_detection(m, TrunkEstimate(128, True), default_cfg)
        assert not out.any()

    def test_boundary_inclusive(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 50, 80, 228, 228)  # centroid exactly at 128 + 100
        out = different_tree_detection(m, TrunkEstimate(128, True), default_cfg)
        assert out.any()

    def test_neighbor_fragment_removed(self, default_cfg):
        m = draw_y_tree()
        frag = empty_mask(H, W)
        rect(frag, 60, 140, 5, 14)
        out = different_tree_detection(m | frag, TrunkEstimate(128, True), default_cfg)
        assert np.array_equal(out, m)

    def test_no_trunk_is_noop(self, default_cfg):
        m = draw_y_tree()
        out = different_tree_detection(m, TrunkEstimate.not_found(), default_cfg)
        assert np.array_equal(out, m)


class TestFalseBranch:
    def test_high_tall_blob_removed(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 245, 254, 60, 70)  # centroid y 249.5 > 240, height 10 > 5
        assert not false_branch_detection(m, default_cfg).any()

    def test_short_blob_kept(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 248, 252, 60, 70)  # height 5, not > 5
        assert false_branch_detection(m, default_cfg).any()

    def test_low_blob_kept(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 185, 214, 60, 70)  # centroid y 199.5, height 30
        assert false_branch_detection(m, default_cfg).any()


class TestFalseTrunk:
    def test_pole_removed(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 20, 139, 185, 192)  # x ~ 188.5 = t_pos + 60, h 120, w 8
        out = false_trunk_detection(m, TrunkEstimate(128, True), default_cfg)
        assert not out.any()

    def test_wide_pole_kept(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 20, 139, 179, 198)  # width 20, conjunction fails
        out = false_trunk_detection(m, TrunkEstimate(128, True), default_cfg)
        assert out.any()

    def test_near_trunk_kept(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 20, 139, 135, 142)  # centroid 138.5, within +-30
        out = false_trunk_detection(m, TrunkEstimate(128, True), default_cfg)
        assert out.any()


class TestAtlPreFilter:
    def test_clean_tree_is_fixed_point(self, default_cfg):
        m = draw_y_tree()
        res = atl_pre_filter(m, default_cfg)
        assert np.array_equal(res.mask, m)
        assert res.warnings == ()

    def test_noisy_fixture_reduced_to_tree(self, default_cfg):
        tree = draw_y_tree()
        m = tree.copy()
        rect(m, 30, 32, 20, 22)  # speck (9 px < 50)
        rect(m, 150, 152, 230, 232)  # speck
        rect(m, 20, 139, 185, 192)  # pole: off-trunk, tall, thin
        rect(m, 60, 140, 2, 11)  # neighbor tree fragment at x ~ 6
        res = atl_pre_filter(m, default_cfg)
        assert np.array_equal(res.mask, tree)

    def test_empty_mask_warns(self, default_cfg):
        res = atl_pre_filter(empty_mask(H, W), default_cfg)
        assert not res.mask.any()
        assert not res.trunk.found
        assert len(res.warnings) == 1

    def test_fixed_point_after_one_pass(self, default_cfg):
        rng = np.random.default_rng(9)
        for _ in range(10):
            m = draw_y_tree() | (rng.random((H, W)) < 0.003)
            once = atl_pre_filter(m, default_cfg).mask
            twice = atl_pre_filter(once, default_cfg).mask
            assert np.array_equal(once, twice)

    def test_output_subset_of_input(self, default_cfg):
        rng = np.random.default_rng(19)
        for _ in range(10):
            m = rng.random((H, W)) < 0.01
            out = atl_pre_filter(m, default_cfg).mask
            assert not (out & ~m).any()


class TestYShapedTreeFilter:
    def test_y_fixture_passes(self, default_cfg):
        m = draw_y_tree()
        res = y_shaped_tree_filter(m, default_cfg)
        assert res.passes
        assert np.array_equal(res.mask, m)

    def test_i_shape_fails(self, default_cfg):
        m = empty_mask(H, W)
        rect(m, 0, 255, 126, 130)  # full-height bar: one section in each band
        res = y_shaped_tree_filter(m, default_cfg)
        assert not res.passes
        assert not res.mask.any()

    def test_largest_ranges_over_qualifying_only(self, default_cfg):
        y = draw_y_tree()
        big = empty_mask(H, W)
        rect(big, 10, 50, 160, 250)  # larger clear rectangle: not qualifying
        assert big.sum() > y.sum()
        assert not (big & y).any()
        res = y_shaped_tree_filter(y | big, default_cfg)
        assert res.passes
        assert np.array_equal(res.mask, y)

    def test_output_repasses(self, default_cfg):
        m = draw_y_tree()
        res = y_shaped_tree_filter(m, default_cfg)
        again = y_shaped_tree_filter(res.mask, default_cfg)
        assert again.passes
        assert np.array_equal(again.mask, res.mask)
        blobs = connected_components(res.mask)
        assert len(blobs) == 1

    def test_empty_fails(self, default_cfg):
        assert not y_shaped_tree_filter(empty_mask(H, W), default_cfg).passes


class TestConfig:
    def test_validate_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            FilterConfig(min_blob_area=0).validate()

    def test_validate_band_below_height(self):
        with pytest.raises(ValueError):
            FilterConfig().validate(height=200)

    def test_scaled_config_96(self):
        cfg = scaled_config(96, 96)
        assert cfg.trunk_scan_rows == 15
        assert cfg.y_filter_top_rows == 8
        assert cfg.false_branch_y_min == 90
        assert cfg.min_blob_area == 7
        cfg.validate(height=96)
