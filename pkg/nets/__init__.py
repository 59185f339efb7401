"""Encoders, the assembled model, ablations and baselines."""
from nets.model import ModelConfig, TimePredictor, TimingMattersModel, predict_bins, predict_seconds
from nets.registry import (
    MODEL_NAMES, build_ablation, build_baseline, build_model, build_regression_head, load_model, save_model,
)

__all__ = [
    'ModelConfig', 'TimePredictor', 'TimingMattersModel', 'predict_bins', 'predict_seconds',
    'MODEL_NAMES', 'build_ablation', 'build_baseline', 'build_model', 'build_regression_head',
    'load_model', 'save_model',
]
