from dataclasses import replace
from io import StringIO

import numpy as np
import pytest

from oddkit.classifier import (
    ModelFormatError,
    OddConfig,
    fit,
    load_model,
    predict_labels,
    predict_scores,
    save_model,
    select_threshold,
)
from oddkit.core import class_summaries, transform
from oddkit.data import NormalizationState
from oddkit.metrics import macro_auc
from oddkit.numerics import InvalidInputError


def blobs(seed=13, m=40, gap=2.0, sigma=0.3):
    rng = np.random.default_rng(seed)
    X = np.vstack([
        rng.normal((-gap, 0.0), sigma, (m, 2)),
        rng.normal((+gap, 0.0), sigma, (m, 2)),
    ])
    y = np.repeat([0, 1], m)
    return X, y


def xor_clusters(seed=5, per=30, sigma=0.15):
    rng = np.random.default_rng(seed)
    pts, labs = [], []
    for cx, cy in ((1, 1), (-1, -1), (1, -1), (-1, 1)):
        pts.append(rng.normal((cx, cy), sigma, (per, 2)))
        labs.append(np.full(per, 0 if cx * cy > 0 else 1))
    return np.vstack(pts), np.concatenate(labs)


class TestFit:
    def test_separated_blobs_reach_high_accuracy(self):
        X, y = blobs()
        model = fit(X, y, OddConfig.odd1(seed=0))
        acc = np.mean(predict_labels(model, X) == y)
        assert acc >= 0.99

    def test_xor_needs_the_nonlinear_transform(self):
        X, y = xor_clusters()
        nl = fit(X, y, OddConfig(p=2, nonlinearity="tanh", seed=0))
        auc_nl = macro_auc(predict_scores(nl, X), y)
        lin = fit(X, y, OddConfig.odd1(seed=0))
        auc_lin = macro_auc(predict_scores(lin, X), y)
        assert auc_nl > 0.95
        assert auc_lin < 0.7

    def test_objective_never_worse_than_start(self):
        X, y = blobs(seed=17)
        model = fit(X, y, OddConfig.odd1(seed=3))
        assert model.objective_final <= model.objective_initial

    def test_refit_is_bit_identical(self):
        X, y = blobs(seed=19)
        a = fit(X, y, OddConfig.odd1(seed=5))
        b = fit(X, y, OddConfig.odd1(seed=5))
        assert np.array_equal(a.transform.weights, b.transform.weights)
        assert np.array_equal(a.centers, b.centers)
        assert np.array_equal(a.thresholds, b.thresholds)

    def test_default_projection_width_is_class_count(self):
        rng = np.random.default_rng(23)
        X = np.vstack([rng.normal(c * 3.0, 0.4, (15, 2)) for c in range(3)])
        y = np.repeat([0, 1, 2], 15)
        model = fit(X, y, OddConfig.odd_linear(seed=0))
        assert model.transform.weights.shape == (3, 3)  # (n + 1, c)
        assert model.centers.shape == (3, 3)

    def test_explicit_p_controls_width(self):
        X, y = blobs(seed=29)
        model = fit(X, y, OddConfig(p=3, seed=0))
        assert model.transform.weights.shape == (3, 3)
        assert model.centers.shape == (2, 3)

    def test_centers_match_transformed_class_means(self):
        X, y = blobs(seed=31)
        model = fit(X, y, OddConfig.odd1(seed=1))
        Y = transform(model.transform, X)
        want = np.vstack([s.center for s in class_summaries(Y, y)])
        assert model.centers == pytest.approx(want, abs=1e-10)

    def test_scores_form_a_simplex(self):
        X, y = blobs(seed=37)
        model = fit(X, y, OddConfig.odd_linear(seed=2))
        S = predict_scores(model, X)
        assert S.shape == (X.shape[0], 2)
        assert np.all(S >= -1e-12) and np.all(S <= 1.0 + 1e-12)
        assert S.sum(axis=1) == pytest.approx(np.ones(X.shape[0]), abs=1e-9)

    def test_binary_label_swap_swaps_score_columns(self):
        X, y = blobs(seed=41)
        a = fit(X, y, OddConfig.odd1(seed=7))
        b = fit(X, 1 - y, OddConfig.odd1(seed=7))
        Sa = predict_scores(a, X)
        Sb = predict_scores(b, X)
        assert np.array_equal(Sa, Sb[:, ::-1])

    def test_nonconsecutive_labels_survive_to_predictions(self):
        X, y01 = blobs(seed=43)
        y = np.where(y01 == 0, 3, 7)
        model = fit(X, y, OddConfig.odd1(seed=0))
        assert model.class_inventory == (3, 7)
        assert set(predict_labels(model, X)) <= {3, 7}

    def test_single_class_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        with pytest.raises(InvalidInputError):
            fit(X, np.zeros(10, int))

    def test_label_shape_mismatch_rejected(self):
        X = np.random.default_rng(0).normal(size=(10, 2))
        with pytest.raises(InvalidInputError):
            fit(X, np.zeros(9, int))

    def test_predict_feature_width_checked(self):
        X, y = blobs(seed=47)
        model = fit(X, y, OddConfig.odd1(seed=0))
        with pytest.raises(InvalidInputError):
            predict_scores(model, np.zeros((3, 5)))


class TestConfigValidation:
    def test_bad_p_rejected(self):
        with pytest.raises(InvalidInputError):
            OddConfig(p=0)

    def test_bad_nonlinearity_rejected(self):
        with pytest.raises(InvalidInputError):
            OddConfig(nonlinearity="relu")

    def test_bad_gamma_rejected(self):
        with pytest.raises(InvalidInputError):
            OddConfig(gamma=0.0)


class TestSelectThreshold:
    def test_clean_separation_picks_the_middle(self):
        scores = np.array([0.9, 0.8, 0.2, 0.1])
        truth = np.array([True, True, False, False])
        assert select_threshold(scores, truth) == 0.5

    def test_identical_scores_fall_back_to_half(self):
        scores = np.full(6, 0.3)
        truth = np.array([True, False] * 3)
        assert select_threshold(scores, truth) == 0.5

    def test_tied_j_resolves_toward_smaller_cut(self):
        # candidates {0, 0.25, 0.5, 0.75, 1}; J peaks at 0.5 for both
        # 0.25 and 0.75, equidistant from 0.5, so the smaller wins
        scores = np.array([0.9, 0.4, 0.6, 0.1])
        truth = np.array([True, True, False, False])
        assert select_threshold(scores, truth) == 0.25

    def test_single_class_rejected(self):
        with pytest.raises(InvalidInputError):
            select_threshold(np.array([0.1, 0.2]), np.array([True, True]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            select_threshold(np.array([0.1, 0.2]), np.array([True]))


class TestPredictLabels:
    def test_uncleared_thresholds_fall_back_to_argmax(self):
        X, y = blobs(seed=53)
        model = fit(X, y, OddConfig.odd1(seed=0))
        strict = replace(model, thresholds=np.array([2.0, 2.0]))
        assert np.array_equal(predict_labels(strict, X),
                              predict_labels(model, X))

    def test_training_center_preimage_gets_its_class(self):
        X, y = blobs(seed=59)
        model = fit(X, y, OddConfig.odd1(seed=0))
        class_means = np.vstack([X[y == k].mean(axis=0) for k in (0, 1)])
        got = predict_labels(model, class_means)
        assert got.tolist() == [0, 1]


class TestModelIO:
    def trained(self, **cfg_kw):
        X, y = blobs(seed=61)
        cfg = OddConfig(seed=0, **cfg_kw)
        return fit(X, y, cfg, class_names=("neg", "pos")), X

    def test_roundtrip_predictions_bit_exact(self):
        model, X = self.trained(p=1)
        buf = StringIO()
        save_model(model, buf)
        back = load_model(StringIO(buf.getvalue()))
        assert np.array_equal(predict_scores(back, X), predict_scores(model, X))
        assert back.class_inventory == model.class_inventory
        assert back.class_names == ("neg", "pos")
        assert np.array_equal(back.thresholds, model.thresholds)

    def test_roundtrip_keeps_wide_tanh_shape(self):
        model, _ = self.trained(p=3, nonlinearity="tanh")
        buf = StringIO()
        save_model(model, buf)
        back = load_model(StringIO(buf.getvalue()))
        assert back.transform.weights.shape == (3, 3)
        assert back.transform.nonlinearity == "tanh"

    def test_roundtrip_keeps_normalization_state(self):
        model, _ = self.trained(p=1)
        state = NormalizationState(
            feature_min=np.array([-2.5, -3.0]),
            feature_max=np.array([2.5, 3.0]),
            kept_mask=np.array([True, True]),
        )
        buf = StringIO()
        save_model(replace(model, preprocess=state), buf)
        back = load_model(StringIO(buf.getvalue()))
        assert back.preprocess is not None
        assert np.array_equal(back.preprocess.feature_min, state.feature_min)
        assert np.array_equal(back.preprocess.feature_max, state.feature_max)
        assert np.array_equal(back.preprocess.kept_mask, state.kept_mask)

    def test_file_roundtrip(self, tmp_path):
        model, X = self.trained(p=1)
        path = tmp_path / "model.txt"
        save_model(model, path)
        back = load_model(path)
        assert np.array_equal(predict_scores(back, X), predict_scores(model, X))

    def test_wrong_magic_rejected(self):
        with pytest.raises(ModelFormatError, match="line 1"):
            load_model(StringIO("NOT A MODEL\n"))

    def test_truncated_file_names_missing_section(self):
        model, _ = self.trained(p=1)
        buf = StringIO()
        save_model(model, buf)
        head = "\n".join(buf.getvalue().splitlines()[:4]) + "\n"
        with pytest.raises(ModelFormatError):
            load_model(StringIO(head))

    def test_corrupt_float_reports_line(self):
        model, _ = self.trained(p=1)
        buf = StringIO()
        save_model(model, buf)
        lines = buf.getvalue().splitlines()
        weights_at = next(i for i, l in enumerate(lines)
                          if l.startswith("weights")) + 1
        lines[weights_at] = "garbage"
        with pytest.raises(ModelFormatError, match="bad float"):
            load_model(StringIO("\n".join(lines) + "\n"))
