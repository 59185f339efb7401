"""Encoders, the assembled model, ablations, baselines and the registry."""
import numpy as np
import pytest

from conftest import make_dataset
from datamodel.binning import BinningScheme
from datamodel.records import SECONDS_PER_DAY
from datamodel.tensors import to_tensors
from diffcore import ops
from diffcore.gradcheck import gradient_check
from diffcore.module import Identity
from diffcore.optim import Adam
from diffcore.tensor import DiffArray, backward
from embed.layers import Time2VecLayer
from exceptions import BinningError, ConfigurationError, ShapeMismatchError, UnknownVariantError
from experiment.losses import cross_entropy_loss, mse_loss
from nets.encoders import ActionEncoder, SequenceEncoder, TimeEncoder
from nets.model import ModelConfig, TimingMattersModel, predict_bins, predict_scores, predict_seconds
from nets.registry import (
    MODEL_NAMES, build_ablation, build_baseline, build_model, build_regression_head, load_model, save_model,
)
from nets.tcn import TemporalConvNet
from nets.transformer import MultiHeadAttention, TransformerEncoder


def _config(**changes):
    base = ModelConfig(embed_dim=8, num_heads=2, num_layers=1, ff_dim=16, hidden_dim=10, num_bins=96,
                       context_length=9, num_devices=4, num_controls=6, seed=1)
    return base.with_updates(**changes)


def _batch(count=6, bins=96):
    # skip session 0: its day 0 sits exactly on an RBF center
    return to_tensors(make_dataset(count=count + 1).sessions[1:], BinningScheme(bins))


def _task_loss(model, batch):
    output = model(batch)
    if model.config.task == 'regression':
        return mse_loss(output, batch.target_seconds / SECONDS_PER_DAY)
    return cross_entropy_loss(output, batch.labels)


def _every_model(seed=1):
    config = _config(seed=seed)
    models = [(name, build_model(name, config)) for name in MODEL_NAMES]
    models += [(f"{name}+regression", build_regression_head(build_model(name, config)))
               for name in ('timing-matters', 'mlp')]
    return models


class TestShapes:
    def test_default_width_ledger(self):
        model = TimingMattersModel(ModelConfig(num_devices=4, num_controls=6))
        batch = _batch(count=2)
        parts = model.embedder(batch)
        action_parts = [parts.device, parts.control, parts.date_periodic, parts.date_radial]
        tokens = ops.stack(action_parts, axis=2)
        assert tokens.shape == (2, 9, 4, 50)
        encoded = model.action_encoder.transformer(ops.reshape(tokens, (18, 4, 50)))
        assert ops.reshape(encoded, (2, 9, 200)).shape == (2, 9, 200)
        assert model.action_encoder.projection.weight.shape == (200, 50)
        assert model.action_encoder(action_parts).shape == (2, 9, 50)
        assert model.time_encoder(parts.diff, parts.time_periodic, parts.time_radial).shape == (2, 9, 150)
        fused = model.encode(batch)
        assert fused.shape == (2, 9, 200)
        assert model.sequence_encoder.positional.shape == (9, 200)
        assert model.sequence_encoder.features(fused).shape == (2, 200)
        assert model.sequence_encoder.hidden.weight.shape == (200, 100)
        assert model.sequence_encoder.head.weight.shape == (100, 96)
        assert model(batch).shape == (2, 96)


class TestGradientFlow:
    @pytest.mark.parametrize('name', MODEL_NAMES)
    def test_every_parameter_receives_nonzero_gradient(self, name):
        model = build_model(name, _config())
        backward(_task_loss(model, _batch()))
        for path, p in model.named_parameters():
            if not p.trainable:
                continue
            assert p.grad is not None, path
            assert np.any(p.grad != 0.0), path

    @pytest.mark.parametrize('seed', [0, pytest.param(1, marks=pytest.mark.slow),
                                      pytest.param(2, marks=pytest.mark.slow)])
    def test_every_parameter_matches_finite_differences(self, seed):
        batch = _batch(count=3)
        for label, model in _every_model(seed):
            model.train()
            loss = lambda: _task_loss(model, batch)
            errors = {}
            for path, p in model.named_parameters():
                if not p.trainable:
                    continue
                # the scale multiplies raw seconds, so it needs a much smaller step
                eps = 1e-8 if path == 'embedder/diff_scale/scale' else 1e-6
                checked = gradient_check(loss, [p], eps=eps, max_entries=3, seed=seed, min_scale=1e-3)
                errors[path] = max(checked.values())
            worst = max(errors, key=errors.get)
            assert errors[worst] < 1e-4, (label, worst, errors[worst])


class TestAblationInternals:
    def test_without_time_encoder_the_differences_pass_unchanged(self):
        model = build_model('minus-time-encoder', _config())
        model.train()
        parts = model.embedder(_batch())
        np.testing.assert_array_equal(model.time_encoder.tcn(parts.diff).values, parts.diff.values)
        fused = model.time_encoder(parts.diff, parts.time_periodic, parts.time_radial)
        direct = model.time_encoder.norm(ops.concat([parts.time_periodic, parts.time_radial, parts.diff], axis=-1))
        np.testing.assert_array_equal(fused.values, direct.values)

    def test_batch_normalized_embeddings_have_no_linear_shift(self):
        full = build_model('timing-matters', _config())
        assert not full.embedder.time_periodic.shift_linear
        assert full.embedder.diff_periodic.shift_linear
        assert full.time_encoder.tcn.units[-1].bias is None
        assert not build_model('minus-time-encoder', _config()).embedder.diff_periodic.shift_linear
        assert build_model('mlp', _config()).embedder.time_periodic.shift_linear


class TestTransformer:
    def test_heads_must_divide_width(self):
        with pytest.raises(ConfigurationError):
            MultiHeadAttention(10, 3, np.random.default_rng(0))

    def test_shape_preserved(self):
        encoder = TransformerEncoder(8, 2, 2, 16, np.random.default_rng(0))
        assert encoder(DiffArray(np.ones((3, 5, 8)))).shape == (3, 5, 8)

    def test_permutation_equivariant_without_positions(self):
        encoder = TransformerEncoder(8, 2, 1, 16, np.random.default_rng(0))
        x = np.random.default_rng(1).normal(size=(1, 4, 8))
        order = [2, 0, 3, 1]
        out = encoder(DiffArray(x)).values
        permuted = encoder(DiffArray(x[:, order])).values
        np.testing.assert_allclose(permuted, out[:, order], atol=1e-10)


class TestTemporalConvNet:
    def test_future_inputs_do_not_leak(self):
        tcn = TemporalConvNet(3, np.random.default_rng(0))
        x = np.random.default_rng(1).normal(size=(1, 9, 3))
        changed = x.copy()
        changed[0, 6:] += 10.0
        a, b = tcn(DiffArray(x)).values, tcn(DiffArray(changed)).values
        np.testing.assert_allclose(a[0, :6], b[0, :6])
        assert not np.allclose(a[0, 6:], b[0, 6:])

    def test_four_units(self):
        assert len(TemporalConvNet(3, np.random.default_rng(0)).units) == 4

    def test_without_output_bias_last_unit_has_no_bias(self):
        tcn = TemporalConvNet(3, np.random.default_rng(0), output_bias=False)
        assert [unit.bias is None for unit in tcn.units] == [False, False, False, True]
        names = [name for name, _ in tcn.named_parameters()]
        assert 'units/3/bias' not in names and 'units/2/bias' in names
        for unit in list(tcn.units)[:3]:
            unit.bias.values[...] = 0.0
        np.testing.assert_array_equal(tcn(DiffArray(np.zeros((2, 5, 3)))).values, 0.0)

    def test_rejects_wrong_width(self):
        with pytest.raises(ShapeMismatchError):
            TemporalConvNet(3, np.random.default_rng(0))(DiffArray(np.ones((1, 4, 2))))


class TestEncoders:
    def test_action_encoder_fuses_four_parts(self):
        encoder = ActionEncoder(8, 2, 1, 16, np.random.default_rng(0))
        parts = [DiffArray(np.random.default_rng(i).normal(size=(2, 9, 8))) for i in range(4)]
        assert encoder(parts).shape == (2, 9, 8)
        assert encoder.projection.weight.shape == (32, 8)
        assert encoder.projection.bias is None

    def test_action_encoder_needs_four_parts(self):
        encoder = ActionEncoder(8, 2, 1, 16, np.random.default_rng(0))
        with pytest.raises(ShapeMismatchError):
            encoder([DiffArray(np.ones((2, 9, 8)))] * 3)

    def test_time_encoder_width(self):
        encoder = TimeEncoder(8, np.random.default_rng(0))
        parts = [DiffArray(np.random.default_rng(i).normal(size=(2, 9, 8))) for i in range(3)]
        assert encoder(*parts).shape == (2, 9, 24)

    def test_sequence_encoder_checks_context(self):
        encoder = SequenceEncoder(16, 9, 10, 96, 2, 1, 16, np.random.default_rng(0))
        assert encoder(DiffArray(np.ones((2, 9, 16)))).shape == (2, 96)
        with pytest.raises(ShapeMismatchError):
            encoder(DiffArray(np.ones((2, 8, 16))))

    def test_positional_placement_matters(self):
        x = DiffArray(np.random.default_rng(2).normal(size=(2, 9, 16)))
        after = SequenceEncoder(16, 9, 10, 96, 2, 1, 16, np.random.default_rng(0))
        before = SequenceEncoder(16, 9, 10, 96, 2, 1, 16, np.random.default_rng(0), positional_before=True)
        assert not np.allclose(after(x).values, before(x).values)


class TestTimingMattersModel:
    def test_logits_shape(self):
        model = TimingMattersModel(_config())
        assert model(_batch()).shape == (6, 96)
        assert model.encode(_batch()).shape == (6, 9, 32)

    def test_bin_mismatch(self):
        model = TimingMattersModel(_config())
        with pytest.raises(BinningError):
            model(_batch(bins=8))

    def test_same_seed_same_weights(self):
        a, b = TimingMattersModel(_config()), TimingMattersModel(_config())
        for (name, p), (_, q) in zip(a.named_parameters(), b.named_parameters()):
            np.testing.assert_array_equal(p.values, q.values, err_msg=name)

    def test_gradients_match_finite_differences(self):
        model = TimingMattersModel(_config(embed_dim=4, ff_dim=8, hidden_dim=4))
        batch = _batch(count=3)
        params = dict(model.named_parameters())
        chosen = [params[name] for name in (
            'embedder/time_radial/mu', 'embedder/date_radial/raw_sigma',
            'embedder/device/table', 'action_encoder/projection/weight', 'time_encoder/norm/gamma',
            'sequence_encoder/positional', 'sequence_encoder/head/weight',
        )]
        errors = gradient_check(lambda: cross_entropy_loss(model(batch), batch.labels), chosen,
                                eps=1e-5, max_entries=4)
        assert max(errors.values()) < 1e-3

    def test_argmax_ties_pick_lowest_bin(self):
        model = TimingMattersModel(_config())
        head = model.output_layer()
        head.weight.values[...] = 0.0
        head.bias.values[...] = 0.0
        batch = _batch()
        np.testing.assert_array_equal(predict_bins(model, batch), np.zeros(len(batch), dtype=np.int64))
        np.testing.assert_allclose(predict_seconds(model, batch), 450.0)

    def test_prediction_leaves_mode_and_graph_alone(self):
        model = TimingMattersModel(_config())
        model.train()
        scores = predict_scores(model, _batch())
        assert model.training
        assert scores.shape == (6, 96)


class TestVariants:
    def test_registry_lists_every_model(self):
        assert MODEL_NAMES[:4] == ('timing-matters', 'minus-rbf', 'minus-time-encoder', 'minus-sequence-encoder')
        assert set(MODEL_NAMES[4:]) == {'mlp', 'mlp-2step', 'lstm', 'mlp-lstm', 'lstm-2step', 'transformer'}

    def test_unknown_name_lists_valid_ones(self):
        with pytest.raises(UnknownVariantError) as info:
            build_model('gru', _config())
        assert 'timing-matters' in info.value.valid
        with pytest.raises(UnknownVariantError):
            build_ablation('minus-everything', _config())
        with pytest.raises(UnknownVariantError):
            build_baseline('timing-matters', _config())

    def test_ablation_components(self):
        assert isinstance(build_model('minus-rbf', _config()).embedder.time_radial, Time2VecLayer)
        assert isinstance(build_model('minus-time-encoder', _config()).time_encoder.tcn, Identity)
        assert isinstance(build_model('minus-sequence-encoder', _config()).sequence_encoder.transformer, Identity)
        full = build_model('timing-matters', _config())
        assert isinstance(full.sequence_encoder.transformer, TransformerEncoder)

    @pytest.mark.parametrize('name', MODEL_NAMES)
    def test_every_model_trains_one_step(self, name):
        model = build_model(name, _config())
        batch = _batch()
        logits = model(batch)
        assert logits.shape == (6, 96)
        before = {n: p.values.copy() for n, p in model.named_parameters()}
        backward(cross_entropy_loss(logits, batch.labels))
        Adam(learning_rate=1e-2).step(model.parameters(trainable_only=True))
        changed = [n for n, p in model.named_parameters() if not np.array_equal(before[n], p.values)]
        assert changed

    @pytest.mark.parametrize('name', ['timing-matters', 'mlp', 'lstm'])
    def test_regression_head(self, name):
        model = build_model(name, _config())
        regression = build_regression_head(model)
        assert regression.config.task == 'regression'
        assert model.config.task == 'classification'
        out = regression(_batch())
        assert out.shape == (6,)
        seconds = predict_seconds(regression, _batch())
        assert np.all((seconds >= 0) & (seconds < 86400))
        bins = predict_bins(regression, _batch())
        assert np.all((bins >= 0) & (bins < 96))

    def test_regression_task_from_config(self):
        model = build_model('timing-matters', _config(task='regression'))
        assert model(_batch()).shape == (6,)


class TestCheckpoints:
    @pytest.mark.parametrize('name', ['timing-matters', 'transformer'])
    def test_save_load_gives_identical_predictions(self, tmp_path, name):
        model = build_model(name, _config())
        batch = _batch()
        # move batch-norm statistics away from their defaults
        model.train()
        model(batch)
        save_model(tmp_path / 'model.npz', model, {'note': 'test'})
        loaded, meta = load_model(tmp_path / 'model.npz')
        assert meta['note'] == 'test' and meta['model']['name'] == name
        np.testing.assert_array_equal(predict_scores(model, batch), predict_scores(loaded, batch))

    def test_regression_checkpoint(self, tmp_path):
        model = build_regression_head(build_model('timing-matters', _config()))
        save_model(tmp_path / 'model.npz', model)
        loaded, _ = load_model(tmp_path / 'model.npz')
        assert loaded.config.task == 'regression'
        np.testing.assert_array_equal(predict_scores(model, _batch()), predict_scores(loaded, _batch()))
