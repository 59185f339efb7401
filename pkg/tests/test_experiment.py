"""Losses, metrics, the training loop, sweeps and report tables."""
import json
import math

import numpy as np
import pandas as pd
import pytest

from conftest import make_dataset, make_session, single_routine_bank
from datamodel.binning import BinningScheme, bin_to_representative_time, coarsen_bin, time_to_bin
from datamodel.io import to_smartsense
from datamodel.records import Schema
from datamodel.splits import DatasetSplit, split
from datamodel.tensors import to_tensors
from diffcore.optim import Adam
from diffcore.tensor import DiffArray
from exceptions import BinningError, ConfigurationError, SchemaError, ShapeMismatchError, TrainingError
from experiment.losses import cross_entropy_loss, mse_loss
from experiment.metrics import (
    MetricReport, coarsening_report, default_ks, evaluate, precision_at_k, rmse, rmse_from_bins,
)
from experiment.reports import metric_frame, read_table, render, write_json, write_table
from experiment.sweeps import (
    Trial, compare_regression_classification, run_ablations, run_trials, sweep_bins, sweep_context,
)
from experiment.trainer import TrainConfig, train, train_epoch, validation_precision
from nets.model import ModelConfig, predict_bins, predict_seconds
from nets.registry import build_model, build_regression_head
from syngen.generator import GeneratorConfig, generate


def _subset(dataset, count=120):
    return dataset.with_sessions(dataset.sessions[:count])


class TestLosses:
    def test_uniform_logits_give_log_k(self):
        loss = cross_entropy_loss(DiffArray(np.zeros((4, 96))), np.array([0, 5, 50, 95]))
        assert loss.item() == pytest.approx(math.log(96))

    def test_confident_correct_logits_near_zero(self):
        logits = np.full((2, 8), -20.0)
        logits[0, 3] = logits[1, 7] = 20.0
        assert cross_entropy_loss(DiffArray(logits), np.array([3, 7])).item() < 1e-12

    def test_label_range_checked(self):
        with pytest.raises(BinningError):
            cross_entropy_loss(DiffArray(np.zeros((1, 8))), np.array([8]))

    def test_shapes_checked(self):
        with pytest.raises(ShapeMismatchError):
            cross_entropy_loss(DiffArray(np.zeros((2, 8))), np.array([1]))
        with pytest.raises(ShapeMismatchError):
            mse_loss(DiffArray(np.zeros(3)), np.zeros(2))

    def test_mse(self):
        assert mse_loss(DiffArray(np.array([0.5, 0.0])), np.array([0.0, 0.0])).item() == pytest.approx(0.125)


class TestMetrics:
    def test_precision_exact_matches(self):
        assert precision_at_k([1, 2, 3], [1, 2, 4]) == pytest.approx(2 / 3)

    def test_precision_coarsens_both_sides(self):
        predicted, true = np.array([0, 11, 12]), np.array([1, 12, 12])
        assert precision_at_k(predicted, true, k=96, from_bins=96) == pytest.approx(1 / 3)
        assert precision_at_k(predicted, true, k=8, from_bins=96) == pytest.approx(2 / 3)

    def test_coarsening_never_lowers_precision_along_nested_counts(self):
        rng = np.random.default_rng(0)
        true = rng.integers(0, 96, size=500)
        predicted = np.clip(true + rng.integers(-6, 7, size=500), 0, 95)
        report = coarsening_report(predicted, true, from_bins=96)
        assert set(report) == {8, 12, 24, 48, 96}
        for chain in ([96, 48, 24, 12], [96, 48, 24, 8]):
            values = [report[k] for k in chain]
            assert values == sorted(values)

    def test_rmse_linear_and_circular(self):
        assert rmse([86000.0], [400.0]) == pytest.approx(85600.0)
        assert rmse([86000.0], [400.0], circular=True) == pytest.approx(800.0)
        assert rmse([10.0, 20.0], [10.0, 20.0]) == 0.0

    def test_precision_matches_elementwise_count(self):
        rng = np.random.default_rng(11)
        predicted, true = rng.integers(0, 96, size=1000), rng.integers(0, 96, size=1000)
        true[::7] = predicted[::7]
        for k in (96, 48, 24, 12, 8):
            hits = 0
            for p, t in zip(predicted.tolist(), true.tolist()):
                # coarse bin of the fine bin's start time
                hits += (p * 900) // (86400 // k) == (t * 900) // (86400 // k)
            assert precision_at_k(predicted, true, k=k, from_bins=96) == hits / 1000

    def test_rmse_matches_elementwise_sum(self):
        rng = np.random.default_rng(12)
        predicted, true = rng.uniform(0, 86400, size=1000), rng.uniform(0, 86400, size=1000)
        linear = circular = 0.0
        for p, t in zip(predicted.tolist(), true.tolist()):
            gap = abs(p - t)
            linear += gap * gap
            circular += min(gap, 86400 - gap) ** 2
        assert rmse(predicted, true) == pytest.approx(math.sqrt(linear / 1000), abs=1e-9)
        assert rmse(predicted, true, circular=True) == pytest.approx(math.sqrt(circular / 1000), abs=1e-9)

    def test_rmse_from_bins_uses_midpoints(self):
        assert rmse_from_bins([0], [0.0], BinningScheme(8)) == pytest.approx(5400.0)

    def test_default_ks(self):
        assert default_ks(96) == (96, 8)
        assert default_ks(12) == (12,)
        assert default_ks(8, Schema.SMARTSENSE) == (8,)

    def test_metric_report_bounds(self):
        with pytest.raises(ValueError):
            MetricReport(precision={96: 1.5}, rmse=0.0, num_examples=1)
        with pytest.raises(ValueError):
            MetricReport(precision={96: 0.5}, rmse=-1.0, num_examples=1)

    def test_metric_report_dict(self):
        report = MetricReport(precision={96: 0.25, 8: 0.5}, rmse=1200.0, num_examples=40, model_id='m')
        data = report.to_dict()
        assert list(data['precision']) == ['96', '8']
        assert MetricReport.from_dict(data) == report

    def test_evaluate_rejects_incompatible_k(self, small_model_config):
        model = build_model('mlp', small_model_config.with_updates(num_devices=4, num_controls=6))
        data = make_dataset(count=10)
        with pytest.raises(BinningError):
            evaluate(model, data, ks=[7])
        with pytest.raises(BinningError):
            evaluate(model, data, ks=[192])

    def test_evaluate_report(self, small_model_config):
        model = build_model('mlp', small_model_config.with_updates(num_devices=4, num_controls=6))
        data = make_dataset(count=30)
        report = evaluate(model, data, ks=[96, 12, 8], batch_size=7, dataset_id='d')
        assert report.num_examples == 30
        assert set(report.precision) == {96, 12, 8}
        assert report.precision[8] >= report.precision[96]
        assert report.model_id == 'mlp' and report.dataset_id == 'd'
        tensors = to_tensors(data, BinningScheme(96))
        assert evaluate(model, tensors, batch_size=512).precision == evaluate(model, data).precision


class TestTrainConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigurationError):
            TrainConfig.from_dict({'epochs': 3})

    def test_betas_become_tuple(self):
        assert TrainConfig.from_dict({'betas': [0.8, 0.9]}).betas == (0.8, 0.9)

    def test_invalid_values(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(batch_size=0).validate()
        with pytest.raises(ConfigurationError):
            TrainConfig(betas=(0.9, 1.0)).validate()


class TestTrain:
    def test_training_run(self, small_dataset, small_model_config, fast_train_config):
        parts = split(_subset(small_dataset), seed=0, strict=True)
        model = build_model('timing-matters', small_model_config)
        result = train(model, parts, fast_train_config, run_id='unit', dataset_id='small')
        assert 1 <= len(result.history) <= fast_train_config.max_epochs
        assert 1 <= result.best_epoch <= len(result.history)
        assert result.best_val_precision == max(r.val_precision for r in result.history)
        assert result.test_report.num_examples == len(parts.test)
        assert result.test_report.model_id == 'unit'
        assert set(result.test_report.precision) == {96, 8}
        assert parts.access_log[-1] == 'test'
        assert parts.access_log.count('test') == 1
        assert parts.first_access('train') < parts.first_access('test')
        assert not model.training

    def test_patience_stops_on_flat_validation(self, small_model_config):
        parts = split(make_dataset(count=40), seed=1)
        model = build_model('mlp', small_model_config.with_updates(num_devices=4, num_controls=6))
        config = TrainConfig(batch_size=16, learning_rate=1e-12, weight_decay=0.0, max_epochs=6, patience=1)
        result = train(model, parts, config)
        assert result.stopped_early
        assert len(result.history) == 2
        assert result.best_epoch == 1

    def test_regression_training(self, small_model_config, fast_train_config):
        from nets.registry import build_regression_head

        parts = split(make_dataset(count=40), seed=0)
        model = build_regression_head(build_model('mlp', small_model_config.with_updates(num_devices=4,
                                                                                           num_controls=6)))
        result = train(model, parts, fast_train_config)
        assert result.test_report.rmse >= 0
        assert all(np.isfinite(r.train_loss) for r in result.history)

    def test_same_seed_same_history(self, small_dataset, small_model_config, fast_train_config):
        runs = []
        for _ in range(2):
            parts = split(_subset(small_dataset, 80), seed=0)
            result = train(build_model('timing-matters', small_model_config), parts, fast_train_config)
            runs.append(result.history)
        assert runs[0] == runs[1]

    def test_loss_falls_over_first_epochs(self, small_dataset, small_model_config):
        parts = split(_subset(small_dataset), seed=0)
        config = TrainConfig(batch_size=32, learning_rate=1e-3, max_epochs=5, patience=5, seed=0)
        result = train(build_model('timing-matters', small_model_config), parts, config)
        assert len(result.history) == 5
        assert result.history[-1].train_loss < result.history[0].train_loss

    def test_trained_model_coarsens_consistently(self, small_dataset, small_model_config, fast_train_config):
        parts = split(_subset(small_dataset), seed=0)
        model = build_model('timing-matters', small_model_config)
        train(model, parts, fast_train_config)
        report = evaluate(model, parts.train, ks=[96, 48, 24, 12, 8])
        for chain in ([96, 48, 24, 12], [96, 48, 24, 8]):
            values = [report.precision[k] for k in chain]
            assert values == sorted(values)
        tensors = to_tensors(parts.train, BinningScheme(96))
        predicted = predict_bins(model, tensors)
        direct = float(np.mean(coarsen_bin(predicted, 96, 8) == coarsen_bin(tensors.labels, 96, 8)))
        assert report.precision[8] == pytest.approx(direct)
        midpoints = bin_to_representative_time(np.arange(96), BinningScheme(96))
        np.testing.assert_array_equal(coarsen_bin(np.arange(96), 96, 8), time_to_bin(midpoints, BinningScheme(8)))

    @pytest.mark.slow
    def test_regression_head_learns_constant_time(self):
        target = 8 * 3600
        rng = np.random.default_rng(5)
        sessions = [make_session(sorted(rng.integers(0, target, size=9).tolist()) + [target], day=20 + i,
                                 devices=rng.integers(0, 4, size=10).tolist(),
                                 controls=rng.integers(0, 6, size=10).tolist())
                    for i in range(8)]
        tensors = to_tensors(sessions, BinningScheme(96))
        config = ModelConfig(embed_dim=8, num_heads=2, num_layers=1, ff_dim=16, hidden_dim=8,
                             num_devices=4, num_controls=6, seed=0)
        model = build_regression_head(build_model('mlp', config))
        optimizer = Adam(learning_rate=1e-2, weight_decay=0.0)
        batch_rng = np.random.default_rng(0)
        for epoch in range(800):
            optimizer.learning_rate = 10.0 ** -(2 + epoch // 200)
            train_epoch(model, optimizer, tensors, 8, batch_rng)
            if np.all(np.abs(predict_seconds(model, tensors) - target) <= 60):
                break
        np.testing.assert_allclose(predict_seconds(model, tensors), target, atol=60)

    def test_missing_gradient_names_full_path(self, small_model_config):
        from diffcore.module import Linear
        from exceptions import MissingGradientError

        model = build_model('mlp', small_model_config.with_updates(num_devices=4, num_controls=6))
        model.unused = Linear(2, 2, np.random.default_rng(0))
        tensors = to_tensors(make_dataset(count=8), BinningScheme(96))
        with pytest.raises(MissingGradientError) as info:
            train_epoch(model, Adam(), tensors, 8, np.random.default_rng(0))
        assert info.value.names == ['unused/weight', 'unused/bias']

    def test_empty_validation_partition(self, small_model_config):
        data = make_dataset(count=10)
        parts = DatasetSplit(train=data, val=data.with_sessions([]), test=data)
        with pytest.raises(TrainingError):
            train(build_model('mlp', small_model_config.with_updates(num_devices=4, num_controls=6)), parts)


class TestSweeps:
    def _configs(self):
        model = ModelConfig(embed_dim=4, num_heads=2, num_layers=1, ff_dim=8, hidden_dim=4)
        return model, TrainConfig(batch_size=64, learning_rate=1e-3, max_epochs=1, patience=1)

    def test_bins_and_regcls_need_second_level_times(self, small_dataset):
        coarse = to_smartsense(_subset(small_dataset, 30))
        model, training = self._configs()
        with pytest.raises(SchemaError):
            sweep_bins(coarse, model, training)
        with pytest.raises(SchemaError):
            compare_regression_classification(coarse, model, training)

    def test_rows_follow_trial_keys(self, monkeypatch):
        import experiment.sweeps as sweeps

        monkeypatch.setattr(sweeps, 'run_trial', lambda trial: {'key': trial.key})
        trials = [Trial(sweep='t', key=key, dataset=None, model={}, train={}) for key in [(2, 0), (1, 1), (1, 0)]]
        frame = run_trials(trials)
        assert list(frame['key']) == [(1, 0), (1, 1), (2, 0)]

    @pytest.mark.slow
    def test_bins_sweep(self, small_dataset):
        model, training = self._configs()
        frame = sweep_bins(_subset(small_dataset), model, training, bins=(24, 8))
        assert list(frame.columns) == ['bins', 'seed', 'precision', 'rmse', 'best_epoch', 'test_sessions']
        assert list(frame['bins']) == [8, 24]
        assert frame['precision'].between(0, 1).all()

    @pytest.mark.slow
    def test_rerun_is_bit_identical(self, small_dataset):
        model, training = self._configs()
        first = sweep_bins(_subset(small_dataset), model, training, bins=(24, 8))
        second = sweep_bins(_subset(small_dataset), model, training, bins=(24, 8))
        pd.testing.assert_frame_equal(first, second, check_exact=True)

    @pytest.mark.slow
    def test_worker_pool_matches_sequential_and_logs_in_parent(self, small_dataset):
        from config import get_config

        model, training = self._configs()
        log_path = get_config().RUN_LOG_PATH
        offset = log_path.stat().st_size if log_path.exists() else 0
        pooled = sweep_bins(_subset(small_dataset), model, training, bins=(24, 8), workers=2)
        sequential = sweep_bins(_subset(small_dataset), model, training, bins=(24, 8))
        pd.testing.assert_frame_equal(pooled, sequential, check_exact=True)
        with open(log_path, encoding='utf-8') as handle:
            handle.seek(offset)
            events = [json.loads(line) for line in handle if line.strip()]
        started = [e['key'] for e in events if e.get('event') == 'trial_start' and e.get('sweep') == 'bins']
        assert sorted(started) == [[8, 0], [8, 0], [24, 0], [24, 0]]

    @pytest.mark.slow
    def test_context_sweep(self, small_dataset):
        model, training = self._configs()
        frame = sweep_context(_subset(small_dataset, 200), model, training, windows=(3, 5), layers=(1,))
        assert list(frame['window']) == [3, 5]
        assert {'precision_96', 'precision_8', 'rmse', 'best_epoch', 'test_sessions'} <= set(frame.columns)

    @pytest.mark.slow
    def test_regression_vs_classification(self, small_dataset):
        model, training = self._configs()
        frame = compare_regression_classification(_subset(small_dataset), model, training)
        assert list(frame['head']) == ['C', 'R']
        assert frame['precision_96'].between(0, 1).all()
        assert (frame['rmse'] >= 0).all()

    @pytest.mark.slow
    def test_ablations(self, small_dataset):
        model, training = self._configs()
        frame = run_ablations(_subset(small_dataset), model, training)
        assert list(frame['model']) == ['timing-matters', 'minus-rbf', 'minus-time-encoder',
                                        'minus-sequence-encoder']


class TestLearning:
    @pytest.mark.slow
    def test_single_routine_overfits(self):
        bank = single_routine_bank(mean=8 * 3600.0, jitter=0.0)
        dataset = generate(GeneratorConfig(num_users=1, target_instances=64, end_date='2019-04-30'), bank)
        assert len(dataset) == 64
        tensors = to_tensors(dataset, BinningScheme(96))
        model = build_model('timing-matters', ModelConfig(num_devices=bank.num_devices,
                                                          num_controls=bank.num_controls))
        optimizer = Adam(learning_rate=1e-4)
        rng = np.random.default_rng(0)
        precision = 0.0
        for _ in range(200):
            train_epoch(model, optimizer, tensors, 64, rng)
            precision = validation_precision(model, tensors)
            if precision >= 0.95:
                break
        assert precision >= 0.95

    @pytest.mark.slow
    def test_default_data_beats_chance(self, routine_bank):
        parts = split(generate(GeneratorConfig(), routine_bank), seed=0)
        config = TrainConfig(batch_size=64, learning_rate=1e-3, max_epochs=30, patience=5, seed=0)
        result = train(build_model('timing-matters', ModelConfig()), parts, config)
        assert result.test_report.precision[96] >= 0.15

    @pytest.mark.slow
    def test_directional_orderings_hold_for_most_seeds(self, routine_bank):
        dataset = generate(GeneratorConfig(num_users=8, target_instances=3000), routine_bank)
        model = ModelConfig(embed_dim=16, num_heads=2, num_layers=2, ff_dim=64, hidden_dim=32)
        training = TrainConfig(batch_size=64, learning_rate=1e-3, max_epochs=15, patience=4)
        seeds = (0, 1, 2)

        ablations = run_ablations(dataset, model, training, seeds=seeds).set_index(['model', 'seed'])
        full_wins = sum(
            ablations.loc[('timing-matters', s), 'precision_96'] >= ablations.loc[('minus-sequence-encoder', s),
                                                                                  'precision_96']
            for s in seeds
        )
        assert full_wins >= 2

        heads = compare_regression_classification(dataset, model, training, seeds=seeds).set_index(['head', 'seed'])
        classification_wins = sum(
            heads.loc[('C', s), 'precision_96'] >= heads.loc[('R', s), 'precision_96'] for s in seeds
        )
        assert classification_wins >= 2


class TestReports:
    def test_metric_frame_columns(self):
        frame = metric_frame([MetricReport(precision={8: 0.5, 96: 0.25}, rmse=10.0, num_examples=4,
                                           model_id='m', dataset_id='d')])
        assert list(frame.columns) == ['model_id', 'dataset_id', 'num_examples', 'precision_96', 'precision_8', 'rmse']

    def test_table_written_with_six_decimals(self, tmp_path):
        path = write_table(pd.DataFrame({'bins': [8], 'precision': [1 / 3]}), tmp_path / 'out' / 't.tsv')
        assert path.read_text().splitlines() == ['bins\tprecision', '8\t0.333333']
        assert read_table(path)['precision'][0] == pytest.approx(0.333333)

    def test_json_sorted(self, tmp_path):
        path = write_json({'b': 1, 'a': 2}, tmp_path / 'doc.json')
        assert path.read_text().index('"a"') < path.read_text().index('"b"')

    def test_render(self):
        assert render(pd.DataFrame()) == '(empty)'
        assert '0.5000' in render(pd.DataFrame({'p': [0.5]}))
