"""Evaluation statistics against brute-force and closed-form oracles."""

from __future__ import annotations

import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conpredict.learning.dataset import Dataset
from conpredict.learning.models import ClassifierSpec, train
from conpredict.stats import (
    auc,
    cliffs_delta,
    confusion,
    f_sf,
    feature_effect,
    magnitude_of,
    permutation_importance,
    pofb20,
    popt,
    prf,
    scott_knott,
    wilcoxon_rank_sum,
)


def brute_force_auc(prob, y):
    """Direct pair counting: P(faulty > clean) + 0.5 P(tie)."""
    pos = [p for p, l in zip(prob, y) if l == 1]
    neg = [p for p, l in zip(prob, y) if l == 0]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


class TestAuc:
    def test_perfect_and_inverted(self):
        y = np.array([0, 0, 1, 1])
        assert auc(np.array([0.1, 0.2, 0.8, 0.9]), y) == 1.0
        assert auc(np.array([0.9, 0.8, 0.2, 0.1]), y) == 0.0

    def test_all_tied_is_half(self):
        assert auc(np.full(6, 0.5), np.array([1, 0, 1, 0, 1, 0])) == 0.5

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_matches_brute_force(self, data):
        n = data.draw(st.integers(4, 30))
        y = np.array(
            data.draw(
                st.lists(st.integers(0, 1), min_size=n, max_size=n).filter(
                    lambda l: 0 < sum(l) < len(l)
                )
            )
        )
        # Coarse grid so ties actually occur.
        prob = np.array(
            data.draw(st.lists(st.sampled_from([0.0, 0.25, 0.5, 0.75, 1.0]),
                               min_size=n, max_size=n))
        )
        assert auc(prob, y) == pytest.approx(brute_force_auc(prob, y), abs=1e-12)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc(np.array([0.5, 0.5]), np.array([1, 1]))


class TestEffortMetrics:
    def test_pofb20_perfect_ranking(self):
        loc = np.full(10, 10.0)
        bugs = np.array([1, 1, 0, 0, 0, 0, 0, 0, 0, 0], dtype=float)
        prob = np.array([0.9, 0.8] + [0.1] * 8)
        # Budget = 20 LOC = first two functions, holding both bugs.
        assert pofb20(prob, loc, bugs) == 1.0

    def test_pofb20_adversarial_ranking(self):
        loc = np.full(10, 10.0)
        bugs = np.array([0] * 8 + [1, 1], dtype=float)
        prob = np.linspace(1.0, 0.1, 10)  # buggy rows inspected last
        assert pofb20(prob, loc, bugs) == 0.0

    def test_pofb20_boundary_function_counted_in_full(self):
        loc = np.array([15.0, 10.0, 75.0])
        bugs = np.array([1.0, 1.0, 0.0])
        prob = np.array([0.9, 0.8, 0.1])
        # Budget is 20: the second function crosses it and counts whole.
        assert pofb20(prob, loc, bugs) == 1.0

    def test_popt_optimal_order_is_one(self):
        loc = np.array([5.0, 10.0, 20.0, 40.0])
        bugs = np.array([2.0, 1.0, 1.0, 0.0])
        density = bugs / loc
        assert popt(density, loc, bugs) == pytest.approx(1.0)

    def test_popt_two_row_hand_case(self):
        # Optimal curve knots (0,0),(.5,1),(1,1); worst prediction gives
        # (0,0),(.5,0),(1,1): area between = 0.5, so Popt = 0.5.
        loc = np.array([1.0, 1.0])
        bugs = np.array([1.0, 0.0])
        prob = np.array([0.1, 0.9])
        assert popt(prob, loc, bugs) == pytest.approx(0.5)

    def test_popt_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            n = rng.integers(3, 12)
            loc = rng.integers(1, 50, n).astype(float)
            bugs = rng.integers(0, 3, n).astype(float)
            if bugs.sum() == 0:
                bugs[0] = 1
            prob = rng.random(n)
            v = popt(prob, loc, bugs)
            assert 0.0 <= v <= 1.0


def independent_exact_p(a, b, w_obs, alternative):
    """Test-local re-derivation of the exact rank-sum tail using midranks
    computed from scratch (no shared helpers)."""
    vals = list(a) + list(b)
    order = sorted(range(len(vals)), key=lambda i: vals[i])
    ranks = [0.0] * len(vals)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    m = len(a)
    mn2 = m * len(b) / 2
    total = hits = 0
    for pick in combinations(range(len(vals)), m):
        w = sum(ranks[i] for i in pick) - m * (m + 1) / 2
        total += 1
        if alternative == "greater":
            hits += w >= w_obs - 1e-12
        else:
            hits += abs(w - mn2) >= abs(w_obs - mn2) - 1e-12
    return hits / total


class TestWilcoxon:
    def test_fully_separated_small_samples(self):
        # a = {3,4} beats b = {1,2} in all C(4,2) = 6 assignments but one.
        assert wilcoxon_rank_sum([3, 4], [1, 2]) == pytest.approx(1 / 6)
        assert wilcoxon_rank_sum([3, 4], [1, 2], "two-sided") == pytest.approx(2 / 6)

    @settings(max_examples=30, deadline=None)
    @given(st.data())
    def test_exact_matches_independent_enumeration(self, data):
        m = data.draw(st.integers(2, 5))
        n = data.draw(st.integers(2, 5))
        a = data.draw(st.lists(st.integers(0, 6), min_size=m, max_size=m))
        b = data.draw(st.lists(st.integers(0, 6), min_size=n, max_size=n))
        for alt in ("greater", "two-sided"):
            got = wilcoxon_rank_sum(a, b, alt)
            # Recompute W from scratch inside the oracle itself.
            vals = list(a) + list(b)
            order = sorted(range(len(vals)), key=lambda i: vals[i])
            rr = [0.0] * len(vals)
            i = 0
            while i < len(order):
                j = i
                while j + 1 < len(order) and vals[order[j + 1]] == vals[order[i]]:
                    j += 1
                for t in range(i, j + 1):
                    rr[order[t]] = (i + j) / 2 + 1
                i = j + 1
            w_obs = sum(rr[:m]) - m * (m + 1) / 2
            assert got == pytest.approx(
                independent_exact_p(a, b, w_obs, alt), abs=1e-12
            )

    def test_large_sample_approximation_sane(self):
        rng = np.random.default_rng(1)
        a = rng.normal(2.0, 1.0, 40)
        b = rng.normal(0.0, 1.0, 40)
        assert wilcoxon_rank_sum(a, b) < 1e-6
        assert wilcoxon_rank_sum(b, a) > 0.999
        same = rng.normal(0.0, 1.0, 40)
        assert 0.01 < wilcoxon_rank_sum(same, same.copy(), "two-sided") <= 1.0

    def test_all_tied_large_sample(self):
        a = np.full(20, 3.0)
        b = np.full(20, 3.0)
        assert wilcoxon_rank_sum(a, b, "two-sided") == 1.0


class TestCliffsDelta:
    def test_hand_values(self):
        eff = cliffs_delta([2, 2], [1, 1])
        assert eff.d == 1.0 and eff.magnitude == "large"
        eff = cliffs_delta([1, 1], [2, 2])
        assert eff.d == -1.0
        eff = cliffs_delta([1, 2], [1, 2])
        assert eff.d == 0.0 and eff.magnitude == "negligible"

    def test_pair_counting_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.integers(0, 10, 30).astype(float)
        b = rng.integers(0, 10, 25).astype(float)
        eff = cliffs_delta(a, b)
        gt = sum(1 for x in a for y in b if x > y)
        lt = sum(1 for x in a for y in b if x < y)
        assert eff.d == pytest.approx((gt - lt) / (30 * 25), abs=1e-12)

    def test_magnitude_boundaries_closed_left(self):
        assert magnitude_of(0.1469) == "negligible"
        assert magnitude_of(0.147) == "small"
        assert magnitude_of(0.3299) == "small"
        assert magnitude_of(0.33) == "medium"
        assert magnitude_of(0.4739) == "medium"
        assert magnitude_of(0.474) == "large"
        assert magnitude_of(-0.5) == "large"  # magnitude uses |d|


class TestFDistribution:
    def test_closed_form_d1_2_d2_2(self):
        # Survival of F(2,2) is 1/(1+x).
        for x in (0.5, 1.0, 2.0, 7.0):
            assert f_sf(x, 2, 2) == pytest.approx(1.0 / (1.0 + x), rel=1e-10)

    def test_closed_form_d1_2_d2_4(self):
        # Survival of F(2,4) is (1 + x/2)^-2.
        for x in (0.5, 1.0, 2.0, 5.0):
            assert f_sf(x, 2, 4) == pytest.approx((1 + x / 2) ** -2, rel=1e-10)

    def test_monotone_decreasing(self):
        xs = [0.1, 0.5, 1.0, 3.0, 10.0]
        vals = [f_sf(x, 4, 17) for x in xs]
        assert vals == sorted(vals, reverse=True)
        assert 0.0 < vals[-1] < vals[0] < 1.0


class TestConfusion:
    def test_counts_and_prf(self):
        prob = np.array([0.9, 0.4, 0.8, 0.3])
        y = np.array([1, 1, 0, 0])
        cm = confusion(prob, y)
        assert (cm.tp, cm.fp, cm.fn, cm.tn) == (1, 1, 1, 1)
        p, r, f1 = prf(cm)
        assert (p, r, f1) == (0.5, 0.5, 0.5)

    def test_degenerate_denominators(self):
        cm = confusion(np.array([0.1, 0.2]), np.array([0, 0]))
        assert prf(cm) == (0.0, 0.0, 0.0)


def planted_dataset(n=80, seed=0):
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < 0.4).astype(np.int64)
    X = rng.normal(size=(n, 3))
    X[:, 0] += 3.0 * y
    return Dataset(("signal", "noise1", "noise2"), X, y)


class TestPermutationImportance:
    def test_signal_beats_noise(self):
        d = planted_dataset()
        m = train(d, ClassifierSpec(kind="random-forest", n_trees=30, seed=1))
        imp = permutation_importance(m, d, seed=0).as_dict()
        assert imp["signal"] > imp["noise1"]
        assert imp["signal"] > imp["noise2"]
        assert imp["signal"] > 0.1

    def test_unselected_features_score_zero(self):
        d = planted_dataset(seed=1)
        m = train(
            d,
            ClassifierSpec(kind="random-forest", n_trees=15, seed=2),
            selected=("signal",),
        )
        imp = permutation_importance(m, d, seed=0).as_dict()
        assert imp["noise1"] == 0.0 and imp["noise2"] == 0.0

    def test_non_forest_rejected(self):
        d = planted_dataset(seed=2)
        m = train(d, ClassifierSpec(kind="naive-bayes"))
        with pytest.raises(ValueError):
            permutation_importance(m, d, seed=0)


class TestScottKnott:
    def test_separated_means_split(self):
        rng = np.random.default_rng(3)
        samples = {
            "high": 10.0 + 0.1 * rng.standard_normal(20),
            "mid": 5.0 + 0.1 * rng.standard_normal(20),
            "low": 0.0 + 0.1 * rng.standard_normal(20),
        }
        sk = scott_knott(samples)
        assert sk.groups == (("high",), ("mid",), ("low",))
        assert sk.rank_of == {"high": 1, "mid": 2, "low": 3}
        assert sk.rank_mean["high"] == 1.0
        assert sk.rank_highest["low"] == 3.0 == sk.rank_lowest["low"]

    def test_indistinguishable_features_share_group(self):
        rng = np.random.default_rng(4)
        base = rng.standard_normal(15)
        samples = {"a": base + 0.001, "b": base - 0.001, "c": base}
        sk = scott_knott(samples)
        assert len(sk.groups) == 1
        assert set(sk.groups[0]) == {"a", "b", "c"}

    def test_groups_are_contiguous_in_mean_order(self):
        rng = np.random.default_rng(5)
        samples = {f"f{i}": rng.normal(i * 0.8, 1.0, 12) for i in range(6)}
        sk = scott_knott(samples)
        flat = [f for g in sk.groups for f in g]
        means = [float(np.mean(samples[f])) for f in flat]
        assert means == sorted(means, reverse=True)
        ranks = [sk.rank_of[f] for f in flat]
        assert ranks == sorted(ranks)


class TestFeatureEffect:
    def test_shifted_feature_positive(self):
        d = planted_dataset(seed=6)
        p, eff, direction = feature_effect(d, "signal")
        assert direction == "+"
        assert p < 0.01 and abs(eff.d) >= 0.147

    def test_negative_shift(self):
        rng = np.random.default_rng(7)
        y = (rng.random(60) < 0.5).astype(np.int64)
        X = rng.normal(size=(60, 1))
        X[:, 0] -= 3.0 * y
        p, eff, direction = feature_effect(Dataset(("f",), X, y), "f")
        assert direction == "-"

    def test_pure_noise_no_direction(self):
        rng = np.random.default_rng(8)
        y = (rng.random(60) < 0.5).astype(np.int64)
        X = rng.normal(size=(60, 1))
        _, _, direction = feature_effect(Dataset(("f",), X, y), "f")
        assert direction == ""


def test_sanity_math_helpers():
    assert math.isclose(f_sf(1.0, 2, 2), 0.5)
    assert math.isclose(f_sf(2.0, 2, 4), 0.25)
