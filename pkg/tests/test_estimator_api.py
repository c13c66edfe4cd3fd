"""Tests for the sklearn-style estimator front end."""

import numpy as np
import pytest
from sklearn.base import clone

from ofdmchest.channel import ChannelProfile
from ofdmchest.estimator_api import BiRnnChannelEstimator
from ofdmchest.training import generate_dataset


def tiny_profile():
    return ChannelProfile(
        delays=np.array([0, 1]),
        powers=np.array([0.7, 0.3]),
        doppler_hz=1000.0,
        k_fft=16,
        active_bins=np.array([12, 13, 14, 15, 1, 2, 3, 4]),
    )


@pytest.fixture(scope="module")
def data():
    tr = generate_dataset("very_high", 24, 300.0, "qpsk", seed=30, profile=tiny_profile(), n_symbols=16)
    va = generate_dataset("very_high", 8, 300.0, "qpsk", seed=31, profile=tiny_profile(), n_symbols=16)
    return tr, va


@pytest.fixture(scope="module")
def fitted(data):
    tr, va = data
    est = BiRnnChannelEstimator(hidden_size=8, epochs=15, batch_size=8, learning_rate=1e-2, random_state=0)
    return est.fit(tr.inputs, tr.targets, X_val=va.inputs, y_val=va.targets)


class TestSklearnProtocol:
    def test_get_params_roundtrip(self):
        est = BiRnnChannelEstimator(hidden_size=16, epochs=7)
        params = est.get_params()
        assert params["hidden_size"] == 16
        assert params["cell"] == "gru"
        est2 = clone(est)
        assert est2.get_params() == params

    def test_set_params(self):
        est = BiRnnChannelEstimator().set_params(cell="lstm", learning_rate=5e-3)
        assert est.cell == "lstm"
        assert est.learning_rate == 5e-3

    def test_unfitted_predict_raises(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            BiRnnChannelEstimator().predict(np.zeros((1, 4, 5)))


class TestFitPredict:
    def test_fit_attributes(self, fitted):
        assert fitted.model_.kind == "gru"
        assert fitted.n_features_in_ == 16
        assert len(fitted.history_) == 15
        assert 0 <= fitted.best_epoch_ < 15

    def test_predict_shape_and_determinism(self, fitted, data):
        tr, va = data
        a = fitted.predict(va.inputs)
        b = fitted.predict(va.inputs)
        assert a.shape == va.inputs.shape
        np.testing.assert_array_equal(a, b)

    def test_predict_channel_complex_view(self, fitted, data):
        _, va = data
        pred = fitted.predict(va.inputs)
        as_complex = fitted.predict_channel(va.inputs)
        assert as_complex.shape == (len(va.inputs), 8, 16)
        np.testing.assert_array_equal(as_complex.real, pred[:, :8, :])
        np.testing.assert_array_equal(as_complex.imag, pred[:, 8:, :])

    def test_training_beats_zero_predictor(self, fitted, data):
        _, va = data
        zero_score = -float(np.mean(va.targets**2))
        assert fitted.score(va.inputs, va.targets) > zero_score

    def test_refit_same_seed_identical(self, data):
        tr, va = data
        preds = []
        for _ in range(2):
            est = BiRnnChannelEstimator(hidden_size=8, epochs=3, batch_size=8, random_state=7)
            est.fit(tr.inputs, tr.targets)
            preds.append(est.predict(va.inputs))
        np.testing.assert_array_equal(preds[0], preds[1])

    def test_lstm_and_srnn_cells(self, data):
        tr, _ = data
        for cell in ("lstm", "srnn"):
            est = BiRnnChannelEstimator(cell=cell, hidden_size=4, epochs=2, batch_size=8)
            est.fit(tr.inputs, tr.targets)
            assert est.model_.kind == cell


class TestValidation:
    def test_rejects_2d_input(self, fitted):
        with pytest.raises(ValueError, match="3-D"):
            fitted.predict(np.zeros((16, 16)))

    def test_rejects_odd_feature_count(self):
        est = BiRnnChannelEstimator(epochs=1)
        with pytest.raises(ValueError, match="even"):
            est.fit(np.zeros((2, 5, 4)), np.zeros((2, 5, 4)))

    def test_rejects_nan(self):
        est = BiRnnChannelEstimator(epochs=1)
        x = np.zeros((2, 4, 6))
        x[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            est.fit(x, np.zeros((2, 4, 6)))

    def test_rejects_shape_mismatch(self):
        est = BiRnnChannelEstimator(epochs=1)
        with pytest.raises(ValueError):
            est.fit(np.zeros((2, 4, 6)), np.zeros((3, 4, 6)))

    def test_rejects_mismatched_width_at_predict(self, fitted):
        with pytest.raises(ValueError, match="features"):
            fitted.predict(np.zeros((1, 12, 16)))
