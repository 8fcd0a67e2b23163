import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score

from elmkit import ELMClassifier, ELMEnsembleClassifier

from conftest import make_gaussian_task


@pytest.fixture(scope="module")
def task():
    train, test = make_gaussian_task(num_classes=3, num_features=8, k_train=400, k_test=200, seed=21)
    return train.x.T, train.labels, test.x.T, test.labels


class TestELMClassifier:
    @pytest.mark.parametrize("solver", ["pi", "lda"])
    def test_learns_the_task(self, task, solver):
        X, y, Xt, yt = task
        clf = ELMClassifier(fan_out=6, solver=solver, random_state=0).fit(X, y)
        assert clf.score(Xt, yt) > 0.85

    def test_predict_proba_rows_sum_to_one(self, task):
        X, y, Xt, _ = task
        clf = ELMClassifier(fan_out=4, random_state=1).fit(X, y)
        proba = clf.predict_proba(Xt)
        assert proba.shape == (Xt.shape[0], 3)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
        assert np.array_equal(clf.predict(Xt), clf.classes_[proba.argmax(axis=1)])

    def test_decision_function_shape(self, task):
        X, y, Xt, _ = task
        clf = ELMClassifier(fan_out=4, random_state=1).fit(X, y)
        assert clf.decision_function(Xt).shape == (Xt.shape[0], 3)

    def test_non_contiguous_labels_round_trip(self, task):
        X, y, Xt, _ = task
        relabeled = np.array([3, 7, 11])[y]
        clf = ELMClassifier(fan_out=4, random_state=2).fit(X, relabeled)
        np.testing.assert_array_equal(clf.classes_, [3, 7, 11])
        assert set(np.unique(clf.predict(Xt))) <= {3, 7, 11}

    def test_deterministic_given_random_state(self, task):
        X, y, Xt, _ = task
        a = ELMClassifier(fan_out=4, random_state=42).fit(X, y).predict_proba(Xt)
        b = ELMClassifier(fan_out=4, random_state=42).fit(X, y).predict_proba(Xt)
        assert np.array_equal(a, b)

    def test_random_state_none_draws_fresh_seed(self, task):
        X, y, _, _ = task
        clf = ELMClassifier(fan_out=2).fit(X, y)
        assert hasattr(clf, "seed_")

    def test_n_hidden_overrides_fan_out(self, task):
        X, y, _, _ = task
        clf = ELMClassifier(fan_out=4, n_hidden=13, random_state=0).fit(X, y)
        assert clf.hidden_layer_.num_hidden == 13

    def test_unfitted_predict_raises(self, task):
        _, _, Xt, _ = task
        with pytest.raises(NotFittedError):
            ELMClassifier().predict(Xt)

    def test_single_class_rejected(self, task):
        X, _, _, _ = task
        with pytest.raises(ValueError, match="two classes"):
            ELMClassifier().fit(X, np.zeros(X.shape[0], dtype=int))

    def test_invalid_solver_and_activation(self, task):
        X, y, _, _ = task
        with pytest.raises(ValueError, match="solver"):
            ELMClassifier(solver="svd").fit(X, y)
        with pytest.raises(ValueError, match="activation"):
            ELMClassifier(activation="gelu").fit(X, y)

    def test_clone_and_params_round_trip(self):
        clf = ELMClassifier(fan_out=9, solver="pi", ridge=0.5, random_state=7)
        params = clf.get_params()
        assert params["fan_out"] == 9 and params["ridge"] == 0.5
        cloned = clone(clf)
        assert cloned.get_params() == params
        clf.set_params(fan_out=2)
        assert clf.get_params()["fan_out"] == 2

    def test_cross_val_smoke(self, task):
        X, y, _, _ = task
        scores = cross_val_score(ELMClassifier(fan_out=3, random_state=0), X, y, cv=3)
        assert scores.min() > 0.7

    def test_nan_input_rejected(self, task):
        X, y, _, _ = task
        bad = X.copy()
        bad[0, 0] = np.nan
        with pytest.raises(ValueError):
            ELMClassifier().fit(bad, y)

    def test_feature_count_checked_at_predict(self, task):
        X, y, Xt, _ = task
        clf = ELMClassifier(fan_out=2, random_state=0).fit(X, y)
        with pytest.raises(ValueError):
            clf.predict(Xt[:, :-1])


class TestELMEnsembleClassifier:
    def test_single_member_matches_single_model(self, task):
        X, y, Xt, _ = task
        ens = ELMEnsembleClassifier(n_members=1, fan_out=4, priors="uniform", random_state=5).fit(X, y)
        from elmkit.seeding import spawn_seed

        single = ELMClassifier(fan_out=4, priors="uniform", random_state=spawn_seed(5, 0)).fit(X, y)
        assert np.array_equal(ens.predict_proba(Xt), single.predict_proba(Xt))

    def test_members_have_distinct_seeds(self, task):
        X, y, _, _ = task
        ens = ELMEnsembleClassifier(n_members=4, fan_out=2, random_state=3).fit(X, y)
        seeds = [layer.seed for layer, _ in ens.ensemble_model_.members]
        assert len(set(seeds)) == 4

    def test_improves_on_task(self, task):
        X, y, Xt, yt = task
        single = ELMClassifier(fan_out=4, random_state=11).fit(X, y).score(Xt, yt)
        ens = ELMEnsembleClassifier(n_members=7, fan_out=4, random_state=11).fit(X, y).score(Xt, yt)
        assert ens >= single - 0.02  # averaging should not hurt materially

    def test_least_squares_members_need_flag(self, task):
        X, y, _, _ = task
        with pytest.raises(ValueError, match="allow_least_squares"):
            ELMEnsembleClassifier(n_members=2, solver="pi", random_state=0).fit(X, y)
        ens = ELMEnsembleClassifier(
            n_members=2, solver="pi", allow_least_squares=True, random_state=0
        ).fit(X, y)
        proba = ens.predict_proba(X[:5])
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)

    def test_proba_on_simplex(self, task):
        X, y, Xt, _ = task
        ens = ELMEnsembleClassifier(n_members=3, fan_out=3, random_state=2).fit(X, y)
        proba = ens.predict_proba(Xt)
        assert (proba >= 0).all()
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)

    def test_clone(self):
        ens = ELMEnsembleClassifier(n_members=3, fan_out=2, random_state=1)
        assert clone(ens).get_params() == ens.get_params()
