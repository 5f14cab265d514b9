import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imrec.corpus import ImageCategory
from imrec.errors import DataError
from imrec.models import (
    ForestConfig,
    SvmOvrModel,
    TreeLeaf,
    TreeNode,
    ensemble_predict,
    forest_predict_proba,
    gnb_positive_proba,
    gnb_predict_proba,
    learn_threshold,
    logistic,
    necessity_proba,
    svm_binary_proba,
    svm_confidences,
    svm_margins,
    train_forest,
    train_gnb,
    train_necessity_scorer,
    train_svm_binary,
    train_svm_ovr,
)


class TestGnb:
    def _worked_model(self):
        X = np.array([[0.0], [2.0], [4.0], [6.0]])
        y = [0, 0, 1, 1]
        return train_gnb(X, y)

    def test_worked_parameters(self):
        model = self._worked_model()
        assert model.classes == (0, 1)
        assert model.priors.tolist() == [0.5, 0.5]
        assert model.means[:, 0].tolist() == [1.0, 5.0]
        assert model.variances[:, 0].tolist() == [1.0, 1.0]

    def test_worked_posterior(self):
        model = self._worked_model()
        assert gnb_predict_proba(model, np.array([2.5]))[0] == pytest.approx(
            1 / (1 + math.exp(-2)), abs=1e-9
        )
        assert gnb_predict_proba(model, np.array([3.0]))[0] == pytest.approx(0.5, abs=1e-9)
        assert gnb_predict_proba(model, np.array([1.0]))[0] == pytest.approx(
            1 / (1 + math.exp(-8)), abs=1e-9
        )

    def test_constant_feature_gets_smoothing_floor(self):
        X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        model = train_gnb(X, [0, 0, 1, 1])
        assert model.variances[:, 0].min() == model.var_smoothing
        probs = gnb_predict_proba(model, np.array([1.0, 0.5]))
        assert np.isfinite(probs).all()

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="one class"):
            train_gnb(np.array([[0.0], [1.0]]), [1, 1])

    def test_probabilities_sum_to_one(self):
        model = train_gnb(np.array([[0.0, 1.0], [2.0, 0.0], [4.0, 3.0], [6.0, 2.0]]), [0, 0, 1, 2])
        probs = gnb_predict_proba(model, np.array([1.0, 1.0]))
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert (probs >= 0).all()

    def test_positive_proba_is_class_one(self):
        model = self._worked_model()
        p = gnb_positive_proba(model, np.array([2.5]))
        assert p == pytest.approx(1 - 1 / (1 + math.exp(-2)), abs=1e-12)

    def test_extreme_inputs_stay_finite(self):
        model = self._worked_model()
        probs = gnb_predict_proba(model, np.array([1e6]))
        assert np.isfinite(probs).all()
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def _stump_config(d=1, **kw):
    # full-feature single tree, no bootstrap: deterministic CART
    defaults = dict(n_trees=1, bootstrap=False, max_features=d)
    defaults.update(kw)
    return ForestConfig(**defaults)


class TestForest:
    def test_two_point_split(self):
        model = train_forest(np.array([[0.0], [1.0]]), [0, 1], _stump_config(), seed=0)
        tree = model.trees[0]
        assert isinstance(tree, TreeNode)
        assert tree.feature == 0
        assert tree.threshold == 0.5
        assert forest_predict_proba(model, np.array([0.2])) == 0.0
        assert forest_predict_proba(model, np.array([0.9])) == 1.0

    def test_pure_labels_single_leaf(self):
        model = train_forest(np.array([[0.0], [1.0], [2.0]]), [1, 1, 1], _stump_config(), seed=0)
        assert isinstance(model.trees[0], TreeLeaf)
        assert forest_predict_proba(model, np.array([5.0])) == 1.0

    def test_min_samples_leaf_stops_growth(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        model = train_forest(X, [0, 0, 1, 1], _stump_config(min_samples_leaf=2), seed=0)
        tree = model.trees[0]
        assert isinstance(tree, TreeNode)
        assert isinstance(tree.left, TreeLeaf) and isinstance(tree.right, TreeLeaf)

    def test_tie_breaks_lowest_feature(self):
        # identical columns: both features split perfectly; lowest index wins
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        model = train_forest(X, [0, 1], _stump_config(d=2), seed=0)
        assert model.trees[0].feature == 0

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 4))
        y = (X[:, 0] > 0).astype(int).tolist()
        a = train_forest(X, y, ForestConfig(n_trees=5), seed=9)
        b = train_forest(X, y, ForestConfig(n_trees=5), seed=9)
        assert a.trees == b.trees
        c = train_forest(X, y, ForestConfig(n_trees=5), seed=10)
        assert a.trees != c.trees

    def test_default_config(self):
        cfg = ForestConfig()
        assert cfg.n_trees == 100
        assert cfg.max_features is None  # floor(sqrt(d)) at train time
        assert cfg.min_samples_leaf == 1
        assert cfg.bootstrap

    def test_bad_config_rejected(self):
        with pytest.raises(DataError):
            ForestConfig(n_trees=0)
        with pytest.raises(DataError):
            ForestConfig(min_samples_leaf=0)

    def test_non_binary_labels_rejected(self):
        with pytest.raises(DataError, match="binary"):
            train_forest(np.array([[0.0], [1.0]]), [0, 2], _stump_config(), seed=0)

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    def test_proba_in_unit_interval(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(12, 3))
        y = rng.integers(0, 2, size=12)
        if len(set(y.tolist())) < 2:
            y[0], y[1] = 0, 1
        model = train_forest(X, y.tolist(), ForestConfig(n_trees=3), seed=seed)
        p = forest_predict_proba(model, rng.normal(size=3))
        assert 0.0 <= p <= 1.0


class TestSvm:
    def test_zero_model_confidences_half(self):
        model = SvmOvrModel(
            weights=np.zeros((10, 2)),
            biases=np.zeros(10),
            lam=1e-4,
            epochs=20,
            seed=0,
            schema_id=None,
        )
        assert np.array_equal(svm_margins(model, np.array([3.0, -1.0])), np.zeros(10))
        assert np.array_equal(svm_confidences(model, np.array([3.0, -1.0])), np.full(10, 0.5))

    def test_logistic_of_fixed_margins(self):
        weights = np.zeros((10, 1))
        weights[0, 0] = 2.0
        weights[1, 0] = -2.0
        model = SvmOvrModel(weights=weights, biases=np.zeros(10), lam=1e-4, epochs=20, seed=0, schema_id=None)
        conf = svm_confidences(model, np.array([1.0]))
        assert conf[0] == pytest.approx(0.880797, abs=1e-6)
        assert conf[1] == pytest.approx(0.119203, abs=1e-6)

    def test_binary_separable(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(2.0, 0.3, size=(20, 1)), rng.normal(-2.0, 0.3, size=(20, 1))])
        y = [1] * 20 + [0] * 20
        model = train_svm_binary(X, y, seed=0)
        assert svm_binary_proba(model, np.array([2.0])) > 0.9
        assert svm_binary_proba(model, np.array([-2.0])) < 0.1

    def test_binary_deterministic(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 3))
        y = (X[:, 1] > 0).astype(int).tolist()
        a = train_svm_binary(X, y, seed=5)
        b = train_svm_binary(X, y, seed=5)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias

    def test_ovr_has_ten_machines_and_separates(self):
        rng = np.random.default_rng(1)
        X = np.vstack([rng.normal(1.0, 0.2, size=(15, 2)), rng.normal(-1.0, 0.2, size=(15, 2))])
        Y = [{ImageCategory.CODE}] * 15 + [{ImageCategory.DIALOG_BOX}] * 15
        model = train_svm_ovr(X, Y, seed=2)
        assert model.weights.shape == (10, 2)
        conf_pos = svm_confidences(model, np.array([1.0, 1.0]))
        conf_neg = svm_confidences(model, np.array([-1.0, -1.0]))
        assert conf_pos[int(ImageCategory.CODE)] > conf_neg[int(ImageCategory.CODE)]
        assert conf_neg[int(ImageCategory.DIALOG_BOX)] > conf_pos[int(ImageCategory.DIALOG_BOX)]


class TestNecessityDispatch:
    def test_kinds_round_trip(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = [0, 0, 1, 1]
        for kind in ("forest", "gnb", "svm"):
            model = train_necessity_scorer(kind, X, y, seed=1)
            p = necessity_proba(kind, model, np.array([3.0]))
            assert 0.0 <= p <= 1.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(DataError, match="unknown"):
            train_necessity_scorer("boost", np.array([[0.0], [1.0]]), [0, 1])


class TestEnsemble:
    def test_truth_table_unanimity(self):
        for votes in itertools.product([False, True], repeat=3):
            probs = [0.9 if v else 0.1 for v in votes]
            verdict, prob = ensemble_predict(probs, [0.5, 0.5, 0.5])
            assert verdict == all(votes)
            assert prob == min(probs)

    def test_vote_uses_inclusive_threshold(self):
        verdict, _ = ensemble_predict([0.5], [0.5])
        assert verdict

    def test_probability_is_min(self):
        _, prob = ensemble_predict([0.9, 0.6, 0.7], [0.0, 0.0, 0.0])
        assert prob == 0.6

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            ensemble_predict([], [])

    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            ensemble_predict([0.5], [0.5, 0.5])

    @given(
        st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=5),
        st.floats(min_value=0, max_value=1),
    )
    def test_veto_monotone_in_members(self, probs, extra):
        thresholds = [0.5] * len(probs)
        base, _ = ensemble_predict(probs, thresholds)
        grown, _ = ensemble_predict(probs + [extra], thresholds + [0.5])
        # adding a member can only remove positives, never add them
        assert (not base) or grown == (extra >= 0.5)
        if grown:
            assert base


class TestLearnThreshold:
    def test_worked_case(self):
        assert learn_threshold([0.2, 0.6, 0.8], [0, 1, 1]) == pytest.approx(0.21)

    def test_calibrated_case(self):
        assert learn_threshold([0.0, 0.0, 1.0, 1.0], [0, 0, 1, 1]) == pytest.approx(0.01)

    def test_all_equal_probs_deterministic(self):
        assert learn_threshold([0.4, 0.4, 0.4], [0, 1, 1]) == 0.0

    def test_single_class_rejected(self):
        with pytest.raises(DataError, match="both classes"):
            learn_threshold([0.2, 0.8], [1, 1])

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            learn_threshold([], [])


def test_logistic_basics():
    assert logistic(0.0) == 0.5
    assert logistic(2.0) == pytest.approx(0.8807970779778823)
    assert logistic(-800.0) == pytest.approx(0.0, abs=1e-300)
    assert logistic(800.0) == 1.0
