"""Partition arithmetic, increment bookkeeping and overlap structure."""

import csv

import numpy as np
import pytest

from blockqmle.blocks import BlockConfig, build_blocks, default_block_size, dump_csv
from blockqmle.errors import ConfigError, DataError
from blockqmle.simulate import ObservationSet
from oracles import brute_overlaps


def make_obs(t1, y1, t2, y2, T=1.0):
    return ObservationSet(times=(np.asarray(t1, float), np.asarray(t2, float)),
                          values=(np.asarray(y1, float), np.asarray(y2, float)), T=T)


def equidistant_obs(n_per_comp=9, T=1.0):
    t = np.linspace(0, T, n_per_comp)
    return make_obs(t, np.arange(n_per_comp, dtype=float), t,
                    np.arange(n_per_comp, dtype=float) ** 2, T=T)


class TestConfig:
    def test_default_rule(self):
        assert default_block_size(5000) == int(5000 ** 0.625)
        cfg = BlockConfig(b_n=5000)
        assert cfg.k_n == default_block_size(5000)
        assert 1 <= cfg.k_n <= cfg.b_n

    def test_partition_boundaries(self):
        cfg = BlockConfig(b_n=10, k_n=4)
        assert cfg.n_blocks == 2
        bd = build_blocks(equidistant_obs(), cfg)
        np.testing.assert_allclose(bd.s, [0.0, 0.5, 1.0])

    def test_bad_sizes_rejected(self):
        with pytest.raises(ConfigError):
            BlockConfig(b_n=10, k_n=11)
        with pytest.raises(ConfigError):
            build_blocks(equidistant_obs(), BlockConfig(b_n=4, k_n=4))

    def test_too_few_observations_rejected(self):
        obs = make_obs([0.0], [1.0], [0.0, 0.5, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(DataError):
            build_blocks(obs, BlockConfig(b_n=8, k_n=4))


class TestCounterArithmetic:
    def test_synchronous_equidistant_counts(self):
        # times i/8 for i=0..8, two blocks: three increments live strictly
        # inside the second block under the boundary-counter definitions
        bd = build_blocks(equidistant_obs(9), BlockConfig(b_n=8, k_n=4))
        blk2 = bd.blocks[1]
        assert blk2.counts == (3, 3)
        np.testing.assert_allclose(blk2.lo[0], [4 / 8, 5 / 8, 6 / 8])
        np.testing.assert_allclose(blk2.hi[0], [5 / 8, 6 / 8, 7 / 8])

    def test_first_block_excluded_but_present(self):
        bd = build_blocks(equidistant_obs(9), BlockConfig(b_n=8, k_n=4))
        assert bd.blocks[0].excluded and not bd.blocks[0].degenerate
        assert not bd.blocks[1].excluded

    def test_empty_component_block_degenerate(self):
        # component 2 has no observation inside (0.5, 1): its second-block
        # increment count collapses and the block is excluded
        t2 = [0.0, 0.2, 0.4, 1.0]
        obs = make_obs(np.linspace(0, 1, 9), np.zeros(9), t2, np.zeros(4))
        bd = build_blocks(obs, BlockConfig(b_n=8, k_n=4))
        assert bd.blocks[1].degenerate
        assert bd.blocks[1].excluded

    def test_telescoping_reconstruction(self, obs2000, bd2000):
        for blk in bd2000.included():
            for k in range(2):
                first = np.searchsorted(obs2000.times[k], blk.s_lo, side="left")
                # increments span observed marks between the block's first
                # and last used indices
                total = np.sum(blk.z[k])
                y = obs2000.values[k]
                lo_idx = np.searchsorted(obs2000.times[k], blk.lo[k][0])
                hi_idx = np.searchsorted(obs2000.times[k], blk.hi[k][-1])
                assert total == pytest.approx(y[hi_idx] - y[lo_idx], abs=1e-12)
                del first

    def test_shift_invariance_of_increments(self, obs2000, bd2000):
        shifted = ObservationSet(
            times=obs2000.times,
            values=(obs2000.values[0] + 17.0, obs2000.values[1] - 3.0),
            T=obs2000.T, n=obs2000.n,
        )
        bd_shift = build_blocks(shifted, BlockConfig(b_n=2000))
        for a, b in zip(bd2000.blocks, bd_shift.blocks):
            np.testing.assert_allclose(a.zb, b.zb, atol=1e-12)

    def test_partition_consistency(self, obs2000, bd2000):
        for k in range(2):
            used = sum(max(b.counts[k], 0) + 1 for b in bd2000.blocks)
            assert used <= bd2000.increment_counts[k] + bd2000.n_blocks + 1
        # interval lengths within a block cannot exceed the block width
        # by more than the edge-straddling allowance
        for blk in bd2000.blocks:
            for k in range(2):
                if blk.counts[k] > 0:
                    assert np.sum(blk.lens[k]) <= bd2000.delta_s + 2 * bd2000.r_max + 1e-12


class TestOverlapMatrix:
    def test_identical_grids_give_diagonal(self):
        bd = build_blocks(equidistant_obs(17), BlockConfig(b_n=16, k_n=8))
        blk = bd.blocks[1]
        g = blk.overlap_matrix()
        np.testing.assert_allclose(g, np.diag(blk.lens[0]), atol=1e-15)

    def test_alternating_intervals_by_hand(self):
        # component 2 endpoints strictly interleave component 1's
        t1 = [0.0, 0.5, 0.6, 0.7, 0.8, 1.0]
        t2 = [0.0, 0.55, 0.65, 0.75, 0.85, 1.0]
        obs = make_obs(t1, np.zeros(6), t2, np.zeros(6))
        bd = build_blocks(obs, BlockConfig(b_n=10, k_n=5))
        blk = bd.blocks[1]
        g = blk.overlap_matrix()
        expected = brute_overlaps(blk.lo[0], blk.hi[0], blk.lo[1], blk.hi[1])
        np.testing.assert_allclose(g, expected, atol=1e-15)
        assert np.all(g.sum(axis=1) <= blk.lens[0] + 1e-15)
        assert np.all(g >= 0)

    def test_disjoint_interval_supports(self):
        # both components observed in the block, but their increment
        # intervals never intersect in time
        t1 = [0.0, 0.52, 0.55, 0.58, 0.62]
        t2 = [0.0, 0.82, 0.85, 0.88, 1.0]
        obs = make_obs(t1, np.zeros(5), t2, np.zeros(5))
        bd = build_blocks(obs, BlockConfig(b_n=10, k_n=5))
        blk = bd.blocks[1]
        assert blk.counts == (3, 2)
        assert blk.overlap_matrix().max(initial=0.0) == 0.0

    def test_operator_norm_bounded_by_max_length(self, bd2000):
        for blk in bd2000.included():
            g = blk.overlap_matrix()
            assert np.linalg.norm(g, 2) <= bd2000.r_max + 1e-12

    def test_overlaps_match_brute_force(self, bd2000):
        for blk in bd2000.included()[:5]:
            np.testing.assert_allclose(
                blk.overlap_matrix(),
                brute_overlaps(blk.lo[0], blk.hi[0], blk.lo[1], blk.hi[1]),
                atol=1e-15,
            )


class TestBandedStructure:
    def test_positions_are_a_permutation(self, bd2000):
        for blk in bd2000.included():
            merged = np.concatenate([blk.pos1, blk.pos2])
            assert sorted(merged) == list(range(blk.size))

    def test_bandwidth_covers_all_couplings(self, bd2000):
        for blk in bd2000.included():
            if len(blk.pos1) > 1:
                assert np.max(np.diff(blk.pos1)) <= blk.bandwidth
            if len(blk.oi):
                assert np.max(np.abs(blk.pos1[blk.oi] - blk.pos2[blk.oj])) <= blk.bandwidth

    def test_merged_increments_match_components(self, bd2000):
        for blk in bd2000.included():
            np.testing.assert_array_equal(blk.zb[blk.pos1], blk.z[0])
            np.testing.assert_array_equal(blk.zb[blk.pos2], blk.z[1])


class TestDump:
    def test_debug_csv(self, bd2000, tmp_path):
        p = tmp_path / "blocks.csv"
        dump_csv(bd2000, str(p))
        with open(p) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["m", "s_m", "k1_m", "k2_m", "degenerate"]
        assert len(rows) == bd2000.n_blocks + 1
        assert rows[1][0] == "1"
