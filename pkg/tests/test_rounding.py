"""Feasible set, Max and Search rounding, oracle parity, determinism."""

import numpy as np
import pytest

from oracles import best_subset_bounded, best_subset_exhaustive
from silstruct.errors import EmptyFeasibleSetError
from silstruct.rasterizer import from_bits, render_scene, scene_bits
from silstruct.rounding import (
    SearchConfig,
    StructureEstimate,
    feasible_set,
    round_max,
    round_search,
)
from silstruct.sketch import build_sketch
from silstruct.solver import deconstruct


def pack_templates(library, rig):
    packed = []
    for t in library.templates:
        packed.append(np.packbits(scene_bits([t], rig)))
    return np.stack(packed)


class TestFeasibleSet:
    def test_threshold_filters(self):
        alpha = np.array([0.0, 0.5, 0.009, 0.011, 1.0])
        assert feasible_set(alpha, 0.01) == [2, 4, 5]

    def test_threshold_one_empties(self):
        alpha = np.array([0.2, 1.0])
        assert feasible_set(alpha, 1.0) == []

    def test_zero_threshold_keeps_positive_entries(self):
        alpha = np.array([0.0, 1e-12, 0.3])
        assert feasible_set(alpha, 0.0) == [2, 3]

    def test_ids_ascend(self):
        alpha = np.array([0.9, 0.1, 0.8])
        assert feasible_set(alpha, 0.05) == [1, 2, 3]


class TestRoundMax:
    def test_picks_top_n_by_weight(self, block_library, block_rig):
        target = render_scene([block_library[3], block_library[12]], block_rig)
        alpha = np.zeros(18)
        alpha[2] = 0.9  # id 3
        alpha[11] = 0.7  # id 12
        alpha[5] = 0.2
        estimate = round_max(alpha, 2, target, block_library, block_rig)
        assert estimate.template_ids == (3, 12)
        assert estimate.error == 0

    def test_tie_breaks_to_lower_id(self, block_library, block_rig):
        target = render_scene([block_library[4]], block_rig)
        alpha = np.zeros(18)
        alpha[6] = 0.5
        alpha[3] = 0.5
        estimate = round_max(alpha, 1, target, block_library, block_rig)
        assert estimate.template_ids == (4,)

    def test_score_combines_error_and_size(self, block_library, block_rig):
        target = render_scene([block_library[1]], block_rig)
        alpha = np.zeros(18)
        alpha[0] = 1.0
        estimate = round_max(alpha, 1, target, block_library, block_rig, lambda_search=0.5)
        assert estimate.error == 0
        assert estimate.score == pytest.approx(0.5)

    def test_n_out_of_range_raises(self, block_library, block_rig):
        target = render_scene([block_library[1]], block_rig)
        with pytest.raises(ValueError):
            round_max(np.zeros(18), 0, target, block_library, block_rig)
        with pytest.raises(ValueError):
            round_max(np.zeros(18), 19, target, block_library, block_rig)


class TestRoundSearch:
    def _solve(self, small_plant, **config_kwargs):
        model, library, rig, clean = small_plant
        phi = build_sketch(60, rig.n_bits, 0.05, seed=7)
        solution, _ = deconstruct(clean, library, rig, phi, lam=1e-2)
        config = SearchConfig(**config_kwargs)
        return model, library, rig, clean, solution, config

    def test_recovers_small_plant(self, small_plant):
        model, library, rig, clean, solution, config = self._solve(small_plant)
        estimate = round_search(solution, config, clean, library, rig)
        assert estimate.template_ids == model.true_ids()
        assert estimate.error == 0

    def test_singleton_feasible_set(self, block_library, block_rig):
        target = render_scene([block_library[9]], block_rig)
        alpha = np.zeros(18)
        alpha[8] = 0.8
        config = SearchConfig(alpha_threshold=0.5)
        estimate = round_search(alpha, config, target, block_library, block_rig)
        assert estimate.template_ids == (9,)
        assert estimate.error == 0

    def test_empty_feasible_set_raises(self, block_library, block_rig):
        target = render_scene([block_library[9]], block_rig)
        config = SearchConfig(alpha_threshold=0.5)
        with pytest.raises(EmptyFeasibleSetError):
            round_search(np.zeros(18), config, target, block_library, block_rig)

    def test_min_parts_above_feasible_size_raises(self, block_library, block_rig):
        target = render_scene([block_library[9]], block_rig)
        alpha = np.zeros(18)
        alpha[8] = 0.8
        config = SearchConfig(alpha_threshold=0.5, min_parts=2)
        with pytest.raises(EmptyFeasibleSetError):
            round_search(alpha, config, target, block_library, block_rig)

    def test_matches_bounded_brute_force(self, block_library, block_rig, rng):
        packed_templates = pack_templates(block_library, block_rig)
        for trial in range(6):
            ids = rng.choice(18, size=3, replace=False) + 1
            target = render_scene([block_library[int(i)] for i in ids], block_rig)
            alpha = np.zeros(18)
            alpha[ids - 1] = rng.uniform(0.5, 1.0, size=3)
            noise_ids = rng.choice(18, size=4, replace=False)
            alpha[noise_ids] = np.maximum(alpha[noise_ids], rng.uniform(0.05, 0.3, size=4))
            config = SearchConfig(alpha_threshold=0.01, min_parts=1, max_parts=7, max_candidates=200000, lambda_search=1e-3)
            estimate = round_search(alpha, config, target, block_library, block_rig)
            feasible = np.array(feasible_set(alpha, 0.01))
            subset_packed = packed_templates[feasible - 1]
            target_packed = np.packbits(target.to_bool())
            best_error, best_size, best_pos = best_subset_bounded(subset_packed, target_packed, block_rig.n_bits, 1, 7)
            oracle_ids = tuple(int(feasible[p - 1]) for p in best_pos)
            assert estimate.error == best_error
            assert estimate.template_ids == oracle_ids

    def test_dominates_max_method(self, small_plant):
        # on the same fractional solution, Search's score never exceeds
        # Max's at the same cardinality
        model, library, rig, clean, solution, config = self._solve(small_plant)
        estimate_search = round_search(solution, config, clean, library, rig)
        n = len(estimate_search.template_ids)
        estimate_max = round_max(solution, n, clean, library, rig, config.lambda_search)
        assert estimate_search.score <= estimate_max.score + 1e-12

    def test_overlapping_templates_not_double_counted(self, block_library, block_rig):
        # two stacked blocks share silhouette pixels; the union error is
        # computed on the OR, not the sum
        target = render_scene([block_library[1], block_library[10]], block_rig)
        alpha = np.zeros(18)
        alpha[0] = 0.9
        alpha[9] = 0.9
        config = SearchConfig(alpha_threshold=0.5, max_parts=2)
        estimate = round_search(alpha, config, target, block_library, block_rig)
        assert estimate.template_ids == (1, 10)
        assert estimate.error == 0

    def test_deterministic(self, small_plant):
        model, library, rig, clean, solution, config = self._solve(small_plant)
        a = round_search(solution, config, clean, library, rig)
        b = round_search(solution, config, clean, library, rig)
        assert a == b

    def test_budget_limits_candidates(self, small_plant):
        # tiny budget still returns a valid estimate from the top stream
        model, library, rig, clean, solution, _ = self._solve(small_plant)
        config = SearchConfig(max_candidates=3)
        estimate = round_search(solution, config, clean, library, rig)
        assert len(estimate.template_ids) >= 1

    def test_cardinality_reward_prefers_bigger_sets(self, block_library, block_rig):
        # two disjoint blocks, both fully inside the target: penalty mode
        # stops at the error minimizer, reward mode keeps both when error ties
        target = render_scene([block_library[1], block_library[3]], block_rig)
        alpha = np.zeros(18)
        alpha[0] = 0.9
        alpha[2] = 0.8
        reward = SearchConfig(alpha_threshold=0.5, cardinality_reward=True)
        penalty = SearchConfig(alpha_threshold=0.5)
        est_reward = round_search(alpha, reward, target, block_library, block_rig)
        est_penalty = round_search(alpha, penalty, target, block_library, block_rig)
        assert est_reward.template_ids == (1, 3)
        assert est_penalty.template_ids == (1, 3)
        assert est_reward.score < est_penalty.score


class TestEstimateValue:
    def test_estimate_fields(self):
        e = StructureEstimate((1, 2), 5, 5.02)
        assert e.template_ids == (1, 2)
        assert e.error == 5
        assert e.score == pytest.approx(5.02)

    def test_estimates_order_by_score_then_ids(self):
        a = StructureEstimate((1, 2), 5, 5.02)
        b = StructureEstimate((1, 3), 5, 5.02)
        assert (a.score, a.template_ids) < (b.score, b.template_ids)
