from __future__ import annotations

import numpy as np
import pytest

from gazeseg.core import NON_POINT, PointPrompt
from gazeseg.errors import EmptyInput, InsufficientPoints, InvalidParam, NoFixations
from gazeseg.gaze import Fixation
from gazeseg.strategy import (
    StrategyConfig,
    StrategyState,
    label_points,
    next_prompt,
    next_prompt_accumulate,
    next_prompt_fixation,
    next_prompt_incremental,
    next_prompt_linear,
)


def fresh_points(rng, n, lo=0.0, hi=100.0):
    return [tuple(p) for p in rng.uniform(lo, hi, size=(n, 2))]


def assert_valid(prompt: PointPrompt, capacity: int):
    assert prompt.capacity == capacity
    assert len(prompt.points) == capacity
    labels = [lab for _, _, lab in prompt.points]
    assert set(labels) <= {1, 0, -1}
    in_padding = False
    for x, y, lab in prompt.points:
        if lab == NON_POINT:
            in_padding = True
            assert (x, y) == (0.0, 0.0)
        else:
            assert not in_padding


class TestAccumulate:
    def test_samples_from_full_history(self, rng):
        state = StrategyState(StrategyConfig(kind="accumulate_sample", capacity=20), seed=5)
        next_prompt_accumulate(state, fresh_points(rng, 15))
        prompt = next_prompt_accumulate(state, fresh_points(rng, 15))
        assert state.history_len == 30
        live = prompt.live_points()
        assert len(live) == 20
        history = {tuple(p) for p in state.history_view()}
        assert all((x, y) in history for x, y, _ in live)
        assert len({(x, y) for x, y, _ in live}) == 20  # without replacement
        assert_valid(prompt, 20)

    def test_small_history_pads(self, rng):
        state = StrategyState(StrategyConfig(kind="accumulate_sample", capacity=20), seed=5)
        prompt = next_prompt_accumulate(state, fresh_points(rng, 5))
        assert len(prompt.live_points()) == 5
        assert sum(1 for *_, lab in prompt.points if lab == NON_POINT) == 15
        assert_valid(prompt, 20)

    def test_seeded_replay_is_identical(self, rng):
        pts = [fresh_points(rng, 10) for _ in range(3)]
        runs = []
        for _ in range(2):
            state = StrategyState(StrategyConfig(kind="accumulate_sample"), seed=99)
            runs.append([next_prompt_accumulate(state, p).points for p in pts])
        assert runs[0] == runs[1]


class TestLinearCombo:
    def test_first_iteration_passes_through(self):
        state = StrategyState(StrategyConfig(kind="linear_combo", capacity=4), seed=0)
        prompt = next_prompt_linear(state, [(3.0, 4.0), (5.0, 6.0)])
        assert [(x, y) for x, y, _ in prompt.live_points()] == [(3.0, 4.0), (5.0, 6.0)]

    def test_alpha_blend_fixture(self):
        state = StrategyState(StrategyConfig(kind="linear_combo", capacity=1, alpha=0.6), seed=0)
        next_prompt_linear(state, [(10.0, 10.0)])
        prompt = next_prompt_linear(state, [(20.0, 20.0)])
        (x, y, _), = prompt.live_points()
        assert (x, y) == (14.0, 14.0)  # 0.6 * previous + 0.4 * current

    def test_alpha_zero_is_identity_on_current(self, rng):
        state = StrategyState(StrategyConfig(kind="linear_combo", capacity=8, alpha=0.0), seed=1)
        next_prompt_linear(state, fresh_points(rng, 8))
        cur = fresh_points(rng, 8)
        prompt = next_prompt_linear(state, cur)
        assert [(x, y) for x, y, _ in prompt.live_points()] == [
            (float(x), float(y)) for x, y in cur
        ]

    def test_alpha_one_outputs_previous_members(self, rng):
        state = StrategyState(StrategyConfig(kind="linear_combo", capacity=8, alpha=1.0), seed=1)
        first = next_prompt_linear(state, fresh_points(rng, 8))
        prev = {(x, y) for x, y, _ in first.live_points()}
        prompt = next_prompt_linear(state, fresh_points(rng, 8))
        assert all((x, y) in prev for x, y, _ in prompt.live_points())

    def test_nearest_match_tie_breaks_to_lowest_index(self):
        state = StrategyState(StrategyConfig(kind="linear_combo", capacity=2, alpha=1.0), seed=0)
        next_prompt_linear(state, [(0.0, 0.0), (2.0, 0.0)])
        prompt = next_prompt_linear(state, [(1.0, 0.0)])  # equidistant to both
        (x, y, _), = prompt.live_points()
        assert (x, y) == (0.0, 0.0)

    def test_empty_input_raises(self):
        state = StrategyState(StrategyConfig(kind="linear_combo"), seed=0)
        with pytest.raises(EmptyInput):
            next_prompt_linear(state, [])


class TestIncremental:
    def test_live_counts_grow_by_k(self, rng):
        state = StrategyState(StrategyConfig(kind="incremental", k=2, capacity=20), seed=3)
        counts = []
        for _ in range(3):
            prompt = next_prompt_incremental(state, fresh_points(rng, 2))
            counts.append(len(prompt.live_points()))
        assert counts == [2, 4, 6]

    def test_cap_subsamples_accumulated_set(self, rng):
        state = StrategyState(StrategyConfig(kind="incremental", k=2, capacity=20), seed=3)
        for _ in range(15):
            prompt = next_prompt_incremental(state, fresh_points(rng, 2))
        assert len(prompt.live_points()) == 20
        history = {tuple(p) for p in state.history_view()}
        assert all((x, y) in history for x, y, _ in prompt.live_points())

    def test_single_point_first_iteration(self, rng):
        state = StrategyState(StrategyConfig(kind="incremental", k=1, capacity=20), seed=3)
        prompt = next_prompt_incremental(state, fresh_points(rng, 1))
        assert len(prompt.live_points()) == 1
        assert sum(1 for *_, lab in prompt.points if lab == NON_POINT) == 19

    def test_insufficient_points(self, rng):
        state = StrategyState(StrategyConfig(kind="incremental", k=3), seed=3)
        with pytest.raises(InsufficientPoints):
            next_prompt_incremental(state, fresh_points(rng, 2))

    def test_live_count_formula_holds_over_200_iterations(self, rng):
        k, cap = 3, 17
        state = StrategyState(StrategyConfig(kind="incremental", k=k, capacity=cap), seed=8)
        for i in range(201):
            prompt = next_prompt_incremental(state, fresh_points(rng, k))
            assert len(prompt.live_points()) == min(k * (i + 1), cap)


class TestFixationStrategies:
    def fixations(self, coords):
        return [Fixation(cx=x, cy=y, start_t=i * 200.0, end_t=i * 200.0 + 150.0, sample_count=10)
                for i, (x, y) in enumerate(coords)]

    def test_replace_resamples_current_window(self):
        state = StrategyState(StrategyConfig(kind="fixation_replace", capacity=20), seed=4)
        fixes = self.fixations([(10, 10), (50, 50), (90, 90)])
        prompt = next_prompt_fixation(state, fixes, "replace")
        live = prompt.live_points()
        assert len(live) == 20
        centroids = {(f.cx, f.cy) for f in fixes}
        assert all((x, y) in centroids for x, y, _ in live)

    def test_accumulate_draws_distinct_centroids(self):
        state = StrategyState(StrategyConfig(kind="fixation_accumulate", capacity=20), seed=4)
        first = self.fixations([(i * 3.0, i * 2.0) for i in range(13)])
        second = self.fixations([(100 + i * 3.0, i * 2.0) for i in range(12)])
        next_prompt_fixation(state, first, "accumulate")
        prompt = next_prompt_fixation(state, second, "accumulate")
        live = prompt.live_points()
        assert len(live) == 20
        assert len({(x, y) for x, y, _ in live}) == 20

    def test_no_fixations_raises(self):
        state = StrategyState(StrategyConfig(kind="fixation_replace"), seed=4)
        with pytest.raises(NoFixations):
            next_prompt_fixation(state, [], "replace")


class TestLabelsAndConfig:
    def test_fixed_ones(self):
        rng = np.random.default_rng(0)
        assert label_points([(1, 1)] * 5, "fixed_ones", rng) == [1] * 5

    def test_random_binary_reproducible(self):
        a = label_points([(0, 0)] * 12, "random_binary", np.random.default_rng(5))
        b = label_points([(0, 0)] * 12, "random_binary", np.random.default_rng(5))
        assert a == b
        assert set(a) <= {0, 1}

    def test_empty_points(self):
        assert label_points([], "fixed_ones", np.random.default_rng(0)) == []

    def test_random_capacity_mode_draws_once(self):
        caps = set()
        for seed in range(30):
            state = StrategyState(
                StrategyConfig(kind="accumulate_sample", capacity=20, capacity_mode="random_1_to_20"),
                seed=seed,
            )
            assert 1 <= state.live_cap <= 20
            caps.add(state.live_cap)
            first = state.live_cap
            next_prompt(state, new_points=[(1.0, 1.0)] * 25)
            assert state.live_cap == first
        assert len(caps) > 5  # actually varies with the seed

    def test_random_capacity_limits_live_points(self, rng):
        state = StrategyState(
            StrategyConfig(kind="accumulate_sample", capacity=20, capacity_mode="random_1_to_20"),
            seed=12,
        )
        prompt = next_prompt(state, new_points=fresh_points(rng, 40))
        assert len(prompt.live_points()) == state.live_cap
        assert_valid(prompt, 20)

    @pytest.mark.parametrize(
        "bad",
        [
            {"kind": "nope"},
            {"capacity": 0},
            {"capacity": 51},
            {"alpha": 1.5},
            {"k": 0},
            {"label_mode": "nope"},
            {"capacity_mode": "nope"},
            {"source": "nope"},
        ],
    )
    def test_config_validation(self, bad):
        with pytest.raises(InvalidParam):
            StrategyConfig(**bad)

    def test_config_round_trip(self):
        cfg = StrategyConfig(kind="linear_combo", alpha=0.25, capacity=10)
        assert StrategyConfig.from_dict(cfg.to_dict()) == cfg

    def test_describe_labels(self):
        assert StrategyConfig(kind="linear_combo", alpha=0.6).describe() == "linear_combo(alpha=0.6)"
        assert StrategyConfig(kind="incremental", k=2).describe() == "incremental(k=2)"
        assert StrategyConfig().describe() == "accumulate_sample"


class TestDispatcherEmitsValidPrompts:
    @pytest.mark.parametrize("kind", ["accumulate_sample", "linear_combo", "incremental"])
    def test_point_kinds(self, kind, rng):
        state = StrategyState(StrategyConfig(kind=kind, capacity=20, k=2), seed=6)
        for _ in range(4):
            prompt = next_prompt(state, new_points=fresh_points(rng, 20))
            assert_valid(prompt, 20)
            assert all(lab == 1 for *_, lab in prompt.live_points())

    def test_fixation_kinds(self):
        fixes = [Fixation(cx=5.0, cy=5.0, start_t=0, end_t=150, sample_count=9)]
        for kind in ("fixation_replace", "fixation_accumulate"):
            state = StrategyState(StrategyConfig(kind=kind, capacity=20), seed=6)
            prompt = next_prompt(state, fixations=fixes)
            assert_valid(prompt, 20)
