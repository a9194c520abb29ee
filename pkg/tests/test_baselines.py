from io import StringIO

import numpy as np
import pytest

from oddkit.baselines import (
    CentroidModel,
    DldaModel,
    SingularScatterError,
    centroid_fit,
    centroid_scores,
    dlda_fit,
    dlda_scores,
    load_dlda,
    save_dlda,
)
from oddkit.classifier import ModelFormatError
from oddkit.numerics import InvalidInputError, covariance


def shared_cov_blobs(seed=3, m=200):
    rng = np.random.default_rng(seed)
    A = np.array([[1.0, 0.6, 0.0],
                  [0.0, 0.8, 0.3],
                  [0.0, 0.0, 0.5]])
    X0 = rng.normal(size=(m, 3)) @ A.T
    X1 = rng.normal(size=(m, 3)) @ A.T + np.array([1.0, -0.5, 0.8])
    X = np.vstack([X0, X1])
    y = np.repeat([0, 1], m)
    return X, y


class TestDldaFit:
    def test_binary_direction_matches_closed_form(self):
        X, y = shared_cov_blobs()
        model = dlda_fit(X, y)
        S_W = covariance(X[y == 0]) + covariance(X[y == 1])
        gap = X[y == 1].mean(axis=0) - X[y == 0].mean(axis=0)
        want = np.linalg.solve(S_W, gap)
        want /= np.linalg.norm(want)
        got = model.projection[:, 0]
        assert abs(float(got @ want)) == pytest.approx(1.0, abs=1e-6)

    def test_projection_columns_are_unit_length(self):
        X, y = shared_cov_blobs(seed=5)
        model = dlda_fit(X, y)
        assert np.linalg.norm(model.projection, axis=0) == pytest.approx(
            np.ones(1), abs=1e-12)

    def test_binary_gives_single_column(self):
        X, y = shared_cov_blobs(seed=7)
        model = dlda_fit(X, y)
        assert model.projection.shape == (3, 1)
        assert model.class_means_projected.shape == (2, 1)

    def test_three_classes_give_two_columns(self):
        rng = np.random.default_rng(11)
        X = np.vstack([rng.normal(mu, 0.5, (80, 4))
                       for mu in ((0, 0, 0, 0), (2, 0, 1, 0), (0, 2, 0, 1))])
        y = np.repeat([0, 1, 2], 80)
        model = dlda_fit(X, y)
        assert model.projection.shape == (4, 2)
        assert model.class_inventory == (0, 1, 2)

    def test_no_random_direction_beats_the_scatter_ratio(self):
        X, y = shared_cov_blobs(seed=13)
        model = dlda_fit(X, y)
        means = np.vstack([X[y == k].mean(axis=0) for k in (0, 1)])
        centered = means - means.mean(axis=0)
        S_B = centered.T @ centered / 2
        S_W = covariance(X[y == 0]) + covariance(X[y == 1])

        def ratio(w):
            return float(w @ S_B @ w) / float(w @ S_W @ w)

        best = ratio(model.projection[:, 0])
        rng = np.random.default_rng(17)
        for _ in range(100):
            w = rng.normal(size=3)
            w /= np.linalg.norm(w)
            assert ratio(w) <= best + 1e-9

    def test_rank_starved_scatter_raises_with_class_sizes(self):
        rng = np.random.default_rng(19)
        X = rng.normal(size=(10, 20))  # 8 within-class dof for 20 dims
        y = np.repeat([0, 1], 5)
        with pytest.raises(SingularScatterError) as exc:
            dlda_fit(X, y)
        assert exc.value.class_sizes == (5, 5)

    def test_more_discriminants_than_features_rejected(self):
        rng = np.random.default_rng(23)
        X = rng.normal(size=(40, 2))
        y = np.repeat([0, 1, 2, 3], 10)
        with pytest.raises(SingularScatterError):
            dlda_fit(X, y)

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 3))
        with pytest.raises(InvalidInputError):
            dlda_fit(X, np.zeros(10, int))


class TestDldaScores:
    def test_projected_mean_preimage_scores_highest_for_own_class(self):
        X, y = shared_cov_blobs(seed=29)
        model = dlda_fit(X, y)
        means = np.vstack([X[y == k].mean(axis=0) for k in (0, 1)])
        S = dlda_scores(model, means)
        assert S.argmax(axis=1).tolist() == [0, 1]

    def test_rows_form_a_simplex(self):
        X, y = shared_cov_blobs(seed=31)
        model = dlda_fit(X, y)
        S = dlda_scores(model, X)
        assert np.all(S >= -1e-12) and np.all(S <= 1 + 1e-12)
        assert S.sum(axis=1) == pytest.approx(np.ones(X.shape[0]), abs=1e-9)

    def test_feature_width_checked(self):
        X, y = shared_cov_blobs(seed=37)
        model = dlda_fit(X, y)
        with pytest.raises(InvalidInputError):
            dlda_scores(model, np.zeros((2, 7)))


class TestDldaIO:
    def test_roundtrip_scores_bit_exact(self):
        X, y = shared_cov_blobs(seed=41)
        model = dlda_fit(X, y, class_names=("left", "right"))
        buf = StringIO()
        save_dlda(model, buf)
        back = load_dlda(StringIO(buf.getvalue()))
        assert isinstance(back, DldaModel)
        assert np.array_equal(dlda_scores(back, X), dlda_scores(model, X))
        assert back.class_names == ("left", "right")
        assert back.class_inventory == model.class_inventory

    def test_wrong_magic_rejected(self):
        with pytest.raises(ModelFormatError, match="line 1"):
            load_dlda(StringIO("BOGUS\n"))

    def test_roundtrip_keeps_normalization_state(self):
        from dataclasses import replace

        from oddkit.data import NormalizationState

        X, y = shared_cov_blobs(seed=67)
        state = NormalizationState(
            feature_min=np.array([-1.0, -2.0, -3.0]),
            feature_max=np.array([1.0, 2.0, 3.0]),
            kept_mask=np.array([True, True, True]),
        )
        model = replace(dlda_fit(X, y), preprocess=state)
        buf = StringIO()
        save_dlda(model, buf)
        back = load_dlda(StringIO(buf.getvalue()))
        assert back.preprocess is not None
        assert np.array_equal(back.preprocess.feature_min, state.feature_min)
        assert np.array_equal(back.preprocess.feature_max, state.feature_max)
        assert np.array_equal(back.preprocess.kept_mask, state.kept_mask)


class TestCentroid:
    def test_centroids_are_class_means(self):
        X, y = shared_cov_blobs(seed=43)
        model = centroid_fit(X, y)
        want = np.vstack([X[y == k].mean(axis=0) for k in (0, 1)])
        assert np.array_equal(model.centroids, want)
        assert isinstance(model, CentroidModel)

    def test_centroid_preimage_scores_highest_for_own_class(self):
        X, y = shared_cov_blobs(seed=47)
        model = centroid_fit(X, y)
        S = centroid_scores(model, model.centroids)
        assert S.argmax(axis=1).tolist() == [0, 1]

    def test_rows_form_a_simplex(self):
        X, y = shared_cov_blobs(seed=53)
        model = centroid_fit(X, y)
        S = centroid_scores(model, X)
        assert np.all(S >= -1e-12) and np.all(S <= 1 + 1e-12)
        assert S.sum(axis=1) == pytest.approx(np.ones(X.shape[0]), abs=1e-9)

    def test_three_classes_supported(self):
        rng = np.random.default_rng(59)
        X = np.vstack([rng.normal(mu, 0.3, (20, 2))
                       for mu in ((0, 0), (3, 0), (0, 3))])
        y = np.repeat([0, 1, 2], 20)
        model = centroid_fit(X, y)
        assert model.centroids.shape == (3, 2)
        S = centroid_scores(model, X)
        assert np.mean(S.argmax(axis=1) == y) > 0.95

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(8, 2))
        with pytest.raises(InvalidInputError):
            centroid_fit(X, np.zeros(8, int))

    def test_feature_width_checked(self):
        X, y = shared_cov_blobs(seed=61)
        model = centroid_fit(X, y)
        with pytest.raises(InvalidInputError):
            centroid_scores(model, np.zeros((2, 9)))
