"""Losses, metrics, training and sweeps."""
from experiment.losses import cross_entropy_loss, mse_loss
from experiment.metrics import MetricReport, coarsening_report, evaluate, precision_at_k, rmse
from experiment.trainer import TrainConfig, TrainingResult, train
from experiment.sweeps import compare_regression_classification, run_ablations, sweep_bins, sweep_context

__all__ = [
    'cross_entropy_loss', 'mse_loss', 'MetricReport', 'coarsening_report', 'evaluate', 'precision_at_k',
    'rmse', 'TrainConfig', 'TrainingResult', 'train', 'compare_regression_classification',
    'run_ablations', 'sweep_bins', 'sweep_context',
]
