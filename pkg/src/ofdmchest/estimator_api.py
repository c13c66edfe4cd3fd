"""Scikit-learn style front end for the trainable channel interpolator.

``BiRnnChannelEstimator`` wraps model construction, training, and batched
inference behind the familiar ``fit`` / ``predict`` / ``get_params``
surface, so the interpolator drops into pipelines, grid searches, and
cross-validation like any other estimator.  Frames are passed as stacked
real arrays of shape (n_frames, 2*k_on, n_symbols); ``predict_channel``
returns the complex-valued view.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .rnn import RnnModel, forward_batch, init_model
from .training import TrainingConfig, train
from .validation import check_frame_array, check_matching_frames

__all__ = ["BiRnnChannelEstimator"]


class BiRnnChannelEstimator(BaseEstimator):
    """Bidirectional recurrent frame interpolator with an sklearn interface.

    Parameters mirror the training recipe: the production defaults are a
    single bidirectional GRU of hidden size 32 with ReLU candidate
    nonlinearity, 500 epochs of ADAM (lr 1e-3) on MSE with batch size 128.

    Attributes (after ``fit``): ``model_`` (the selected weights),
    ``history_`` (per-epoch loss records), ``best_epoch_``,
    ``n_features_in_``.
    """

    def __init__(
        self,
        cell: str = "gru",
        hidden_size: int = 32,
        activation: str = "relu",
        epochs: int = 500,
        batch_size: int = 128,
        learning_rate: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        clip_norm: float | None = None,
        recurrent_init: str = "glorot",
        update_bias: float = 0.0,
        forget_bias: float = 0.0,
        random_state: int = 0,
        verbose: int = 0,
    ):
        self.cell = cell
        self.hidden_size = hidden_size
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.recurrent_init = recurrent_init
        self.update_bias = update_bias
        self.forget_bias = forget_bias
        self.random_state = random_state
        self.verbose = verbose

    def _training_config(self, n_train: int, n_val: int) -> TrainingConfig:
        return TrainingConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            train_samples=n_train,
            test_samples=n_val,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
            clip_norm=self.clip_norm,
            seed=self.random_state,
        )

    def fit(self, X, y, X_val=None, y_val=None):
        """Train from scratch on (input, target) frame batches.

        ``X_val``/``y_val`` select the returned weights by validation MSE;
        without them the lowest training MSE wins.
        """
        X, y = check_matching_frames(X, y)
        if X_val is not None:
            X_val, y_val = check_matching_frames(X_val, y_val)
            if X_val.shape[1:] != X.shape[1:]:
                raise ValueError("validation frames have a different geometry")
        model = init_model(
            self.cell,
            self.hidden_size,
            X.shape[1],
            activation=self.activation,
            seed=self.random_state,
            recurrent_init=self.recurrent_init,
            update_bias=self.update_bias,
            forget_bias=self.forget_bias,
        )
        cfg = self._training_config(X.shape[0], 0 if X_val is None else X_val.shape[0])
        result = train(
            model,
            X,
            y,
            cfg,
            val_inputs=X_val,
            val_targets=y_val,
            verbose=self.verbose,
        )
        self.model_ = result.model
        self.history_ = result.history
        self.best_epoch_ = result.best_epoch
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self) -> RnnModel:
        model = getattr(self, "model_", None)
        if model is None:
            raise RuntimeError("this estimator is not fitted yet; call fit first")
        return model

    def predict(self, X) -> np.ndarray:
        """Interpolated frames, same stacked-real layout as the input."""
        model = self._check_fitted()
        X = check_frame_array(X, n_features=model.n_features)
        out = np.empty_like(X)
        for lo in range(0, X.shape[0], max(1, self.batch_size)):
            batch = np.ascontiguousarray(X[lo : lo + self.batch_size].transpose(0, 2, 1))
            pred, _ = forward_batch(model, batch)
            out[lo : lo + self.batch_size] = pred.transpose(0, 2, 1)
        return out

    def predict_channel(self, X) -> np.ndarray:
        """Complex channel estimates, shape (n_frames, k_on, n_symbols)."""
        pred = self.predict(X)
        k = pred.shape[1] // 2
        return pred[:, :k, :] + 1j * pred[:, k:, :]

    def score(self, X, y) -> float:
        """Negative MSE (sklearn convention: greater is better)."""
        _, y = check_matching_frames(X, y)
        return -float(np.mean((self.predict(X) - y) ** 2))
