"""Synthetic corpus generator: determinism, separability, and null cases."""

from __future__ import annotations

import numpy as np
import pytest

from conpredict.features import ALL_FEATURES, CONPREDICTOR_FEATURES
from conpredict.learning.models import ClassifierSpec, train
from conpredict.learning.select import f1_faulty
from conpredict.stats import auc
from conpredict.synth import PLANTED_CONCURRENCY, SynthSpec, synth


class TestShape:
    def test_all_columns_present(self):
        d, nloc, meta = synth(SynthSpec(n=50, seed=1))
        assert d.feature_names == ALL_FEATURES
        assert d.n_rows == 50
        assert nloc.shape == (50,)
        assert meta["n_faulty"] == int(d.y.sum()) == 5

    def test_faulty_count_rounds_with_floor_of_one(self):
        d, _, _ = synth(SynthSpec(n=11, faulty_fraction=0.02, seed=0))
        assert int(d.y.sum()) == 1

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            SynthSpec(n=1)
        with pytest.raises(ValueError):
            SynthSpec(faulty_fraction=0.0)
        with pytest.raises(ValueError):
            SynthSpec(noise=-0.1)

    def test_percent_columns_quantized(self):
        d, _, _ = synth(SynthSpec(n=100, seed=2))
        for name in d.feature_names:
            if name.startswith(("MuDuE_", "MuDuK_")):
                col = d.X[:, d.feature_names.index(name)]
                assert set(np.unique(col)) <= {0.0, 25.0, 50.0, 75.0, 100.0}

    def test_killed_never_exceeds_executed(self):
        d, _, _ = synth(SynthSpec(n=200, seed=3))
        names = list(d.feature_names)
        for name in names:
            if name.startswith("MuDuK_"):
                op = name[len("MuDuK_"):]
                k = d.X[:, names.index(name)]
                e = d.X[:, names.index(f"MuDuE_{op}")]
                assert (k <= e).all()


class TestDeterminism:
    def test_same_seed_bitwise_identical(self):
        a, nloc_a, meta_a = synth(SynthSpec(n=80, seed=7))
        b, nloc_b, meta_b = synth(SynthSpec(n=80, seed=7))
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)
        np.testing.assert_array_equal(nloc_a, nloc_b)
        assert meta_a == meta_b

    def test_different_seeds_differ(self):
        a, _, _ = synth(SynthSpec(n=80, seed=7))
        b, _, _ = synth(SynthSpec(n=80, seed=8))
        assert not np.array_equal(a.X, b.X)


class TestSignal:
    def test_planted_columns_shift_by_meta(self):
        d, _, meta = synth(SynthSpec(n=400, faulty_fraction=0.5, noise=0.0, seed=4))
        names = list(d.feature_names)
        for col, shift in meta["planted_shifts"].items():
            j = names.index(col)
            gap = d.X[d.y == 1, j].mean() - d.X[d.y == 0, j].mean()
            # Quantization clips percent columns at 100, so the realized
            # gap is bounded by the plant but clearly positive.
            assert 0 < gap <= shift + 1e-9

    def test_noiseless_signal_is_linearly_separable(self):
        d, _, _ = synth(
            SynthSpec(n=200, faulty_fraction=0.5, noise=0.0, seed=5)
        )
        m = train(d, ClassifierSpec(kind="logistic-regression"))
        pred = (m.predict_proba(d.X) >= 0.5).astype(np.int64)
        assert f1_faulty(d.y, pred) == 1.0

    def test_zero_signal_forest_auc_near_half(self):
        d, _, _ = synth(
            SynthSpec(n=300, faulty_fraction=0.5, concurrency_signal=0.0,
                      noise=1.0, seed=6)
        )
        m = train(d, ClassifierSpec(kind="random-forest", n_trees=30, seed=1))
        # In-sample fit memorizes, so score fresh rows from the same null.
        d2, _, _ = synth(
            SynthSpec(n=300, faulty_fraction=0.5, concurrency_signal=0.0,
                      noise=1.0, seed=16)
        )
        assert abs(auc(m.predict_proba(d2.X), d2.y) - 0.5) < 0.1

    def test_planted_features_are_concurrency_features(self):
        assert set(PLANTED_CONCURRENCY) <= set(CONPREDICTOR_FEATURES)

    def test_sequential_signal_off_by_default(self):
        _, _, meta = synth(SynthSpec(n=50, seed=9))
        assert meta["planted_sequential"] == []
        _, _, meta2 = synth(SynthSpec(n=50, sequential_signal=1.0, seed=9))
        assert meta2["planted_sequential"] == ["CC", "CP", "MuDuE_ssdl"]
