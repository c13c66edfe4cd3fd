"""Tests for dataset generation, BPTT gradients, ADAM, and the train loop."""

import numpy as np
import pytest

from ofdmchest.channel import ChannelProfile
from ofdmchest.estimators import unstack_real
from ofdmchest.rnn import forward_batch, init_model
from ofdmchest.training import (
    AdamState,
    Dataset,
    TrainingConfig,
    TrainingDiverged,
    adam_step,
    backward,
    generate_dataset,
    grad_check,
    load_dataset,
    mse_loss,
    save_dataset,
    train,
    write_history_csv,
)


def tiny_profile(doppler_hz=1000.0):
    """Small geometry (8 active bins of a 16-FFT, 2 taps) for quick training."""
    return ChannelProfile(
        delays=np.array([0, 1]),
        powers=np.array([0.7, 0.3]),
        doppler_hz=doppler_hz,
        k_fft=16,
        active_bins=np.array([12, 13, 14, 15, 1, 2, 3, 4]),
    )


class TestConfigDefaults:
    def test_production_recipe(self):
        cfg = TrainingConfig()
        assert cfg.epochs == 500
        assert cfg.batch_size == 128
        assert cfg.train_samples == 16000
        assert cfg.test_samples == 2000
        assert cfg.train_snr_db == 40.0

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            TrainingConfig(epochs=0)


class TestGenerateDataset:
    def test_deterministic(self):
        a = generate_dataset("very_high", 4, 30.0, "qpsk", seed=5, profile=tiny_profile(), n_symbols=12)
        b = generate_dataset("very_high", 4, 30.0, "qpsk", seed=5, profile=tiny_profile(), n_symbols=12)
        np.testing.assert_array_equal(a.inputs, b.inputs)
        np.testing.assert_array_equal(a.targets, b.targets)

    def test_pilot_columns_match_targets_noiseless(self):
        """With negligible noise the projected pilot estimates equal the truth."""
        ds = generate_dataset("very_high", 3, 300.0, "qpsk", seed=6, profile=tiny_profile(), n_symbols=12)
        for i in range(3):
            h_in = unstack_real(ds.inputs[i])
            h_true = unstack_real(ds.targets[i])
            for p in ds.pilot_indices:
                np.testing.assert_allclose(h_in[:, p], h_true[:, p], atol=1e-6)

    def test_data_columns_zero(self):
        ds = generate_dataset("high", 2, 20.0, "16qam", seed=7, profile=tiny_profile(500.0), n_symbols=10)
        mask = np.ones(10, dtype=bool)
        mask[list(ds.pilot_indices)] = False
        assert np.all(ds.inputs[:, :, mask] == 0.0)
        assert ds.pilot_indices == (0, 9)

    def test_scenario_pilot_counts(self):
        for name, pilots in (("low", 1), ("high", 2), ("very_high", 3)):
            ds = generate_dataset(name, 1, 40.0, "qpsk", seed=8, profile=tiny_profile(), n_symbols=10)
            assert len(ds.pilot_indices) == pilots

    def test_container_roundtrip(self, tmp_path):
        ds = generate_dataset("very_high", 4, 25.0, "16qam", seed=9, profile=tiny_profile(), n_symbols=12)
        path = tmp_path / "toy.ds"
        save_dataset(ds, path)
        back = load_dataset(path)
        np.testing.assert_array_equal(back.inputs, ds.inputs)
        np.testing.assert_array_equal(back.targets, ds.targets)
        assert back.scenario == ds.scenario
        assert back.pilot_indices == ds.pilot_indices
        assert back.snr_db == ds.snr_db
        assert back.scheme == ds.scheme

    def test_rerun_byte_identical(self, tmp_path):
        ds = generate_dataset("low", 2, 10.0, "qpsk", seed=10, profile=tiny_profile(250.0), n_symbols=8)
        p1, p2 = tmp_path / "a.ds", tmp_path / "b.ds"
        save_dataset(ds, p1)
        save_dataset(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert (tmp_path / "a.ds.json").read_bytes() == (tmp_path / "b.ds.json").read_bytes()


class TestMseLoss:
    def test_exact_zero_and_unit_shift(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((3, 4))
        assert mse_loss(x, x) == 0.0
        assert abs(mse_loss(x + 1.0, x) - 1.0) < 1e-15

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(1)
        pred = rng.standard_normal((5, 7))
        target = rng.standard_normal((5, 7))
        acc = 0.0
        for i in range(5):
            for j in range(7):
                acc += (pred[i, j] - target[i, j]) ** 2
        assert abs(mse_loss(pred, target) - acc / 35.0) < 1e-12


class TestBackward:
    @pytest.mark.parametrize("kind", ["srnn", "lstm", "gru"])
    def test_gradcheck_tanh(self, kind):
        assert grad_check(kind, dims=(6, 4, 5), seed=0, activation="tanh") < 1e-5

    @pytest.mark.parametrize("kind", ["srnn", "lstm", "gru"])
    def test_gradcheck_relu(self, kind):
        assert grad_check(kind, dims=(6, 4, 5), seed=0, activation="relu") < 1e-5

    def test_zero_output_grad_gives_zero_weight_grads(self):
        model = init_model("gru", 3, 4, seed=1)
        x = np.random.default_rng(2).standard_normal((2, 6, 4))
        _, acts = forward_batch(model, x, keep_cache=True)
        grads = backward(model, acts, np.zeros((2, 6, 4)))
        for g in grads.values():
            np.testing.assert_array_equal(g, np.zeros_like(g))

    def test_bias_out_grad_is_summed_output_grad(self):
        model = init_model("lstm", 3, 4, seed=3)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, 5, 4))
        d_out = rng.standard_normal((2, 5, 4))
        _, acts = forward_batch(model, x, keep_cache=True)
        grads = backward(model, acts, d_out)
        np.testing.assert_allclose(grads["b_out"], d_out.sum(axis=(0, 1)), atol=1e-12)

    def test_stale_cache_rejected(self):
        model = init_model("gru", 3, 4, seed=5)
        other = init_model("gru", 3, 4, seed=6)
        x = np.random.default_rng(7).standard_normal((1, 4, 4))
        _, acts = forward_batch(model, x, keep_cache=True)
        with pytest.raises(ValueError, match="stale"):
            backward(other, acts, np.zeros((1, 4, 4)))


class TestAdam:
    def test_zero_gradient_keeps_weights(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.for_params(params)
        adam_step(params, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])

    def test_zero_gradient_decays_moments(self):
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params)
        state.m["w"][:] = 0.5
        state.v["w"][:] = 0.25
        adam_step(params, {"w": np.zeros(1)}, state)
        np.testing.assert_allclose(state.m["w"], [0.5 * 0.9], atol=1e-15)
        np.testing.assert_allclose(state.v["w"], [0.25 * 0.999], atol=1e-15)

    def test_constant_gradient_step_approaches_lr(self):
        """With a constant gradient the bias-corrected step tends to lr."""
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params)
        g = {"w": np.array([0.37])}
        lr = 1e-3
        prev = params["w"].copy()
        for _ in range(5000):
            prev = params["w"].copy()
            adam_step(params, g, state, learning_rate=lr)
        assert abs(abs(params["w"][0] - prev[0]) / lr - 1.0) < 1e-3

    def test_rejects_non_finite(self):
        params = {"w": np.zeros(2)}
        state = AdamState.for_params(params)
        with pytest.raises(ValueError, match="non-finite"):
            adam_step(params, {"w": np.array([np.nan, 0.0])}, state)


@pytest.fixture(scope="module")
def toy_data():
    tr = generate_dataset("very_high", 24, 300.0, "qpsk", seed=20, profile=tiny_profile(), n_symbols=16)
    va = generate_dataset("very_high", 8, 300.0, "qpsk", seed=21, profile=tiny_profile(), n_symbols=16)
    return tr, va


class TestTrain:
    def test_deterministic_given_seed(self, toy_data):
        tr, va = toy_data
        cfg = TrainingConfig(epochs=3, batch_size=8, train_samples=24, test_samples=8, learning_rate=1e-2, seed=3)
        runs = []
        for _ in range(2):
            model = init_model("gru", 8, 16, seed=9)
            runs.append(train(model, tr.inputs, tr.targets, cfg, va.inputs, va.targets))
        for name, arr in runs[0].model.params().items():
            np.testing.assert_array_equal(arr, runs[1].model.params()[name])
        assert runs[0].history == runs[1].history

    def test_best_on_validation_selected(self, toy_data):
        tr, va = toy_data
        cfg = TrainingConfig(epochs=4, batch_size=8, train_samples=24, test_samples=8, learning_rate=1e-2, seed=4)
        model = init_model("gru", 8, 16, seed=10)
        result = train(model, tr.inputs, tr.targets, cfg, va.inputs, va.targets)
        best = min(result.history, key=lambda h: h["val_mse"])
        assert result.best_epoch == best["epoch"]
        assert len(result.history) == 4

    def test_divergence_aborts_with_history(self, toy_data):
        tr, _ = toy_data
        cfg = TrainingConfig(epochs=5, batch_size=8, train_samples=24, seed=5)
        model = init_model("srnn", 8, 16, seed=11)
        # blow the first forward pass up so the batch loss overflows
        model.w_out[:] = 1e200
        model.fwd.w_x *= 1e10
        model.bwd.w_x *= 1e10
        with pytest.raises(TrainingDiverged) as err:
            with np.errstate(over="ignore"):
                train(model, tr.inputs, tr.targets, cfg)
        assert isinstance(err.value.history, list)

    def test_loss_decreases_on_static_toy(self):
        """Noiseless static-channel frames: loss decays and stays monotone
        (within jitter) after the warmup epochs."""
        tr = generate_dataset("low", 32, 300.0, "qpsk", seed=22, profile=tiny_profile(0.0), n_symbols=12)
        cfg = TrainingConfig(epochs=30, batch_size=16, train_samples=32, learning_rate=1e-2, seed=6)
        model = init_model("gru", 8, 16, seed=12)
        result = train(model, tr.inputs, tr.targets, cfg)
        losses = [h["train_mse"] for h in result.history]
        assert losses[-1] < losses[9]
        for a, b in zip(losses[10:], losses[11:]):
            assert b <= a * 1.05
        assert losses[-1] < 0.5 * losses[0]

    def test_overfits_eight_frames(self):
        """Capacity sanity: 8 frames memorized to MSE < 1e-3 in 500 epochs."""
        tr = generate_dataset("very_high", 8, 300.0, "qpsk", seed=23, profile=tiny_profile(), n_symbols=16)
        cfg = TrainingConfig(epochs=500, batch_size=8, train_samples=8, learning_rate=1e-2, seed=7)
        model = init_model("gru", 16, 16, seed=13)
        result = train(model, tr.inputs, tr.targets, cfg)
        assert result.history[-1]["train_mse"] < 1e-3

    def test_history_csv(self, toy_data, tmp_path):
        tr, va = toy_data
        cfg = TrainingConfig(epochs=2, batch_size=8, train_samples=24, test_samples=8, seed=8)
        model = init_model("srnn", 4, 16, seed=14)
        result = train(model, tr.inputs, tr.targets, cfg, va.inputs, va.targets)
        path = tmp_path / "history.csv"
        write_history_csv(result.history, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epoch,train_mse,val_mse"
        assert len(lines) == 3

    def test_clip_norm_rescales_gradients(self, toy_data):
        """An inactive clip leaves the run untouched; an active one changes it."""
        tr, _ = toy_data
        cfg_kwargs = dict(epochs=2, batch_size=8, train_samples=24, learning_rate=1e-2, seed=9)
        results = {}
        for label, clip in (("none", None), ("huge", 1e12), ("tight", 1e-3)):
            model = init_model("gru", 8, 16, seed=15)
            cfg = TrainingConfig(clip_norm=clip, **cfg_kwargs)
            results[label] = train(model, tr.inputs, tr.targets, cfg)
        for name, arr in results["none"].final_model.params().items():
            np.testing.assert_array_equal(arr, results["huge"].final_model.params()[name])
        assert any(
            not np.array_equal(results["none"].final_model.params()[n], g)
            for n, g in results["tight"].final_model.params().items()
        )
