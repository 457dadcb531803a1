import json

import numpy as np
import pytest

from rls2.data_io import Dataset, standardize
from rls2.kernels import BasisKernelSpec, ScalingRule, default_benchmark_specs, gram, linear_specs
from rls2.model import (
    ModelFormatError,
    TrainedModel,
    accuracy,
    dumps,
    load_model,
    predict,
    predict_class,
    rmse,
    save_model,
    sign_labels,
    train,
)
from rls2.optimizer import assemble_R
from rls2.ova import OvaModel, ova_cross_validate, ova_fit, ova_predict


def const_model(value, n_features=2, task="binary"):
    sp = BasisKernelSpec.linear_feature(0)
    return TrainedModel([sp], np.ones(1), [None], np.zeros((1, n_features)), np.zeros(1),
                        np.ones(1), 1.0, value, task)


def blobs(rng, per_class=10):
    centers = np.array([[0.0, 4.0], [-4.0, -3.0], [4.0, -3.0]])
    X = np.vstack([c + 0.5 * rng.standard_normal((per_class, 2)) for c in centers])
    y = np.repeat(np.arange(3.0), per_class)
    return Dataset(X, y, ["u", "v"], "multiclass", ["a", "b", "c"])


@pytest.fixture
def fitted(small_regression):
    X, y = small_regression
    ds = Dataset(X, y, ["a", "b", "c"])
    model, f, bank = train(ds, default_benchmark_specs(3), ScalingRule("trace_inverse"), 0.05)
    return ds, model, f, bank


class TestPredict:
    def test_zero_c_gives_intercept(self, rng):
        m = const_model(2.5)
        np.testing.assert_array_equal(predict(m, rng.standard_normal((4, 2))), 2.5)

    def test_training_points(self, fitted):
        ds, model, f, bank = fitted
        expect = assemble_R(bank, f.d) @ f.c + model.intercept
        np.testing.assert_allclose(predict(model, ds.X), expect, rtol=1e-10)

    def test_training_points_centered(self, small_regression):
        X, y = small_regression
        ds = Dataset(X, y, ["a", "b", "c"])
        model, f, bank = train(ds, default_benchmark_specs(3),
                               ScalingRule("trace_inverse_centered"), 0.05)
        expect = assemble_R(bank, f.d) @ f.c + model.intercept
        np.testing.assert_allclose(predict(model, ds.X), expect, rtol=1e-10,
                                   atol=1e-10 * np.abs(expect).max())

    def test_double_loop_oracle(self, fitted, rng):
        _, model, _, _ = fitted
        Xs = rng.standard_normal((3, 3))
        out = []
        for x in Xs:
            v = model.intercept
            for k, sp in enumerate(model.specs):
                for j, xj in enumerate(model.train_X):
                    v += model.d[k] * model.s[k] * model.c[j] * gram(sp, xj[None], x[None])[0, 0]
            out.append(v)
        np.testing.assert_allclose(predict(model, Xs), out, rtol=1e-10)

    def test_dimension_mismatch(self, fitted):
        with pytest.raises(ValueError, match="features"):
            predict(fitted[1], np.zeros((2, 5)))

    def test_predict_raw_applies_standardizer(self, small_regression):
        X, y = small_regression
        ds = Dataset(3 * X + 1, y, ["a", "b", "c"])
        st, ds_std, _ = standardize(ds, center_output=False)
        model, _, _ = train(ds_std, linear_specs(3), ScalingRule(), 0.1)
        model.standardizer = st
        np.testing.assert_allclose(model.predict_raw(ds.X), predict(model, ds_std.X), rtol=1e-12)


class TestDecision:
    @pytest.mark.parametrize("f, label", [(0.3, 1), (-1e-9, -1), (0.0, 1)])
    def test_sign_rule(self, f, label):
        assert sign_labels([f])[0] == label
        assert predict_class(const_model(f), np.zeros((1, 2)))[0] == label

    def test_task_mismatch(self):
        with pytest.raises(ValueError, match="binary"):
            predict_class(const_model(0.0, task="regression"), np.zeros((1, 2)))


class TestMetrics:
    def test_perfect(self):
        assert rmse([1, 2], [1, 2]) == 0.0
        assert accuracy([1, -1], [1, -1]) == 1.0

    def test_values(self):
        assert rmse([0, 0], [3, 4]) == pytest.approx(np.sqrt(12.5))
        assert accuracy([1, 1, -1, -1], [1, 1, -1, 1]) == 0.75

    def test_errors(self):
        with pytest.raises(ValueError):
            rmse([], [])
        with pytest.raises(ValueError):
            accuracy([1], [1, 1])


class TestPersistence:
    def test_round_trip_bit_identical(self, fitted, tmp_path, rng):
        _, model, _, _ = fitted
        save_model(model, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        Xs = rng.standard_normal((20, 3))
        assert np.array_equal(predict(back, Xs), predict(model, Xs))

    def test_double_round_trip_bytes(self, fitted, tmp_path):
        save_model(fitted[1], tmp_path / "a.json")
        save_model(load_model(tmp_path / "a.json"), tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_centered_standardized_round_trip(self, small_regression, tmp_path, rng):
        X, y = small_regression
        st, ds, _ = standardize(Dataset(X, y, ["a", "b", "c"]))
        model, _, _ = train(ds, default_benchmark_specs(3), ScalingRule("trace_inverse_centered"), 0.1)
        model.standardizer = st
        save_model(model, tmp_path / "m.json")
        back = load_model(tmp_path / "m.json")
        Xs = rng.standard_normal((5, 3))
        assert np.array_equal(back.predict_raw(Xs), model.predict_raw(Xs))

    def test_truncated_file(self, fitted, tmp_path):
        text = dumps(fitted[1])
        (tmp_path / "t.json").write_text(text[: len(text) // 2])
        with pytest.raises(ModelFormatError, match="corrupt"):
            load_model(tmp_path / "t.json")

    def test_version_mismatch(self, fitted, tmp_path):
        obj = json.loads(dumps(fitted[1]))
        obj["version"] = 99
        (tmp_path / "v.json").write_text(json.dumps(obj))
        with pytest.raises(ModelFormatError, match="version"):
            load_model(tmp_path / "v.json")

    def test_inconsistent_record(self, fitted, tmp_path):
        obj = json.loads(dumps(fitted[1]))
        obj["d"] = obj["d"][:-1]
        (tmp_path / "x.json").write_text(json.dumps(obj))
        with pytest.raises(ModelFormatError):
            load_model(tmp_path / "x.json")

    def test_zero_coefficients(self, tmp_path, rng):
        ds = Dataset(rng.standard_normal((6, 2)), rng.standard_normal(6) + 3, ["a", "b"])
        model, f, _ = train(ds, linear_specs(2), ScalingRule(), 1e300)
        model.c[:] = 0.0
        save_model(model, tmp_path / "z.json")
        np.testing.assert_array_equal(load_model(tmp_path / "z.json").predict(ds.X), model.intercept)


class TestOva:
    def test_blobs_separable(self, rng):
        ds = blobs(rng)
        model = ova_fit(ds, default_benchmark_specs(2), ScalingRule(), lam=0.1)
        assert accuracy(ds.y, model.predict(ds.X)) == 1.0
        assert len(model.models) == 3

    def test_tie_goes_to_first(self):
        model = OvaModel(["a", "b", "c"], [const_model(v) for v in (0.2, 0.9, 0.9)])
        assert ova_predict(model, np.zeros((1, 2)))[0] == 1

    def test_two_class_mirrors_binary(self, rng):
        X = rng.standard_normal((20, 2))
        y = (X[:, 0] + 0.3 * rng.standard_normal(20) > 0).astype(float)
        ds = Dataset(X, y, ["u", "v"], "multiclass", ["n", "p"])
        model = ova_fit(ds, linear_specs(2), ScalingRule(), lam=0.1, delta=1e-12)
        conf = model.decision_function(X)
        np.testing.assert_allclose(conf[:, 0], -conf[:, 1], atol=1e-8)
        ok = np.abs(conf[:, 1]) > 1e-8
        binary = sign_labels(conf[:, 1]) > 0
        np.testing.assert_array_equal(model.predict(X)[ok] == 1, binary[ok])

    def test_absent_class(self, rng):
        ds = Dataset(rng.standard_normal((4, 2)), [0, 0, 2, 2], ["u", "v"], "multiclass",
                     ["a", "b", "c"])
        with pytest.raises(ValueError, match="absent"):
            ova_fit(ds, linear_specs(2), ScalingRule(), lam=1.0)

    def test_cv_selection_deterministic(self, rng):
        ds = blobs(rng, per_class=6)
        lams = np.logspace(1, -3, 4)
        a = ova_fit(ds, linear_specs(2), ScalingRule(), lambdas=lams, k=3, seed=1)
        b = ova_fit(ds, linear_specs(2), ScalingRule(), lambdas=lams, k=3, seed=1)
        assert [m.lam for m in a.models] == [m.lam for m in b.models]
        np.testing.assert_array_equal(a.predict(ds.X), b.predict(ds.X))
        assert len(a.cv) == 3

    def test_shared_lambda(self, rng):
        ds = blobs(rng, per_class=6)
        res = ova_cross_validate(ds, linear_specs(2), ScalingRule(), np.logspace(1, -3, 4),
                                 k=3, shared=True)
        assert len(res) == 1 and res[0].scores.shape == (3, 4)
        m = ova_fit(ds, linear_specs(2), ScalingRule(), lambdas=np.logspace(1, -3, 4), k=3,
                    shared=True)
        assert len({mm.lam for mm in m.models}) == 1

    def test_ova_persistence(self, rng, tmp_path):
        ds = blobs(rng, per_class=5)
        model = ova_fit(ds, linear_specs(2), ScalingRule(), lam=0.1)
        save_model(model, tmp_path / "o.json")
        back = load_model(tmp_path / "o.json")
        assert isinstance(back, OvaModel) and back.classes == ["a", "b", "c"]
        assert np.array_equal(back.decision_function(ds.X), model.decision_function(ds.X))
