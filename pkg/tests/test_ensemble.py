import numpy as np
import pytest

from elmkit.ensemble import (
    EnsembleModel,
    combine_posteriors,
    ensemble_predict,
    load_ensemble,
    save_ensemble,
)
from elmkit.hidden import forward_hidden, init_hidden_layer
from elmkit.solvers import (
    build_targets,
    class_stats,
    classify,
    posteriors,
    score,
    solve_lda,
    solve_pi,
)
from elmkit.seeding import spawn_seed

from conftest import make_gaussian_task


def _random_posteriors(rng, n, k):
    p = rng.uniform(0.01, 1.0, size=(n, k))
    return p / p.sum(axis=0, keepdims=True)


def _train_member(train, fan_out, seed, solver="lda"):
    layer = init_hidden_layer(train.num_features, fan_out, seed=seed)
    acts = forward_hidden(layer, train.x)
    if solver == "lda":
        weights = solve_lda(class_stats(acts, train.labels, "uniform", train.num_classes))
    else:
        weights = solve_pi(acts, build_targets(train.labels, train.num_classes), 0.0)
    return layer, weights


class TestCombinePosteriors:
    def test_single_member_is_identity(self):
        rng = np.random.default_rng(0)
        p = _random_posteriors(rng, 3, 10)
        np.testing.assert_array_equal(combine_posteriors([p]), p)

    def test_two_opposite_members(self):
        a = np.array([[1.0], [0.0]])
        b = np.array([[0.0], [1.0]])
        np.testing.assert_array_equal(combine_posteriors([a, b]), [[0.5], [0.5]])

    def test_duplicate_averaging_is_identity(self):
        rng = np.random.default_rng(1)
        p = _random_posteriors(rng, 4, 6)
        np.testing.assert_array_equal(combine_posteriors([p, p]), p)

    def test_mean_stays_on_simplex(self):
        """Averaging E valid posterior matrices keeps column sums at 1."""
        rng = np.random.default_rng(2)
        members = [_random_posteriors(rng, 5, 200) for _ in range(7)]
        combined = combine_posteriors(members)
        assert (combined >= 0).all()
        np.testing.assert_allclose(combined.sum(axis=0), 1.0, atol=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        members = [_random_posteriors(rng, 3, 50) for _ in range(5)]
        forward = combine_posteriors(members)
        backward = combine_posteriors(members[::-1])
        np.testing.assert_allclose(forward, backward, rtol=1e-12, atol=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            combine_posteriors([])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="shape"):
            combine_posteriors([np.ones((2, 3)) / 2, np.ones((3, 3)) / 3])


class TestEnsembleModel:
    def test_needs_members(self):
        with pytest.raises(ValueError, match="at least one"):
            EnsembleModel(members=())

    def test_duplicate_seeds_rejected(self):
        train, _ = make_gaussian_task(num_classes=3, num_features=4, k_train=120, k_test=10)
        member = _train_member(train, 2, seed=5)
        with pytest.raises(ValueError, match="distinct"):
            EnsembleModel(members=(member, member))

    def test_class_count_mismatch_rejected(self):
        train, _ = make_gaussian_task(num_classes=3, num_features=4, k_train=120, k_test=10)
        other, _ = make_gaussian_task(num_classes=4, num_features=4, k_train=120, k_test=10, seed=9)
        m1 = _train_member(train, 2, seed=1)
        m2 = _train_member(other, 2, seed=2)
        with pytest.raises(ValueError, match="class count"):
            EnsembleModel(members=(m1, m2))

    def test_least_squares_members_need_flag(self):
        train, _ = make_gaussian_task(num_classes=3, num_features=4, k_train=120, k_test=10)
        m = _train_member(train, 2, seed=3, solver="pi")
        with pytest.raises(ValueError, match="allow_least_squares"):
            EnsembleModel(members=(m,))
        EnsembleModel(members=(m,), allow_least_squares=True)


class TestEnsemblePredict:
    def test_single_member_equals_direct_prediction(self):
        train, test = make_gaussian_task(num_classes=3, num_features=6, k_train=200, k_test=40)
        layer, weights = _train_member(train, 3, seed=7)
        model = EnsembleModel(members=((layer, weights),))
        combined, labels = ensemble_predict(model, test.x)
        direct = posteriors(score(weights, forward_hidden(layer, test.x)))
        assert np.array_equal(combined, direct)
        assert np.array_equal(labels, classify(direct))

    def test_input_dimension_checked(self):
        train, _ = make_gaussian_task(num_classes=3, num_features=6, k_train=200, k_test=10)
        model = EnsembleModel(members=(_train_member(train, 2, seed=8),))
        with pytest.raises(ValueError, match="features"):
            ensemble_predict(model, np.zeros((5, 2)))

    def test_five_members_beat_mean_single_on_synthetic(self):
        """Averaged posteriors do at least as well as the average member,
        over ten seed sets on a 3-class Gaussian task."""
        train, test = make_gaussian_task(
            num_classes=3, num_features=8, k_train=400, k_test=600, radius=2.2, seed=13
        )
        ensemble_errors, single_errors = [], []
        for s in range(10):
            members = [_train_member(train, 5, seed=spawn_seed(99, s, m)) for m in range(5)]
            posts = [
                posteriors(score(w, forward_hidden(layer, test.x))) for layer, w in members
            ]
            for p in posts:
                single_errors.append(np.mean(classify(p) != test.labels))
            combined = combine_posteriors(posts)
            ensemble_errors.append(np.mean(classify(combined) != test.labels))
        assert np.mean(ensemble_errors) <= np.mean(single_errors)


class TestManifest:
    def test_round_trip(self, tmp_path):
        train, test = make_gaussian_task(num_classes=3, num_features=5, k_train=150, k_test=30)
        members = tuple(_train_member(train, 2, seed=spawn_seed(4, m)) for m in range(3))
        model = EnsembleModel(members=members)
        manifest = tmp_path / "ensemble.json"
        paths = save_ensemble(manifest, model)
        assert len(paths) == 3
        loaded = load_ensemble(manifest)
        p1, l1 = ensemble_predict(model, test.x)
        p2, l2 = ensemble_predict(loaded, test.x)
        assert np.array_equal(p1, p2)
        assert np.array_equal(l1, l2)

    def test_missing_member_file(self, tmp_path):
        manifest = tmp_path / "ensemble.json"
        manifest.write_text('{"members": ["gone.elmw"]}')
        with pytest.raises(FileNotFoundError):
            load_ensemble(manifest)
