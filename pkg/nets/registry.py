"""Stable model names, construction and checkpoint round trips."""
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from diffcore.checkpoint import load_checkpoint, save_checkpoint
from diffcore.module import Linear
from exceptions import CheckpointIntegrityError, UnknownVariantError
from nets.baselines import BASELINES
from nets.model import ABLATIONS, ModelConfig, TimePredictor, TimingMattersModel

FULL_MODEL = 'timing-matters'
MODEL_NAMES = (FULL_MODEL,) + ABLATIONS + tuple(BASELINES)


def build_model(name: str, config: Optional[ModelConfig] = None) -> TimePredictor:
    """
    Construct any registered model; ``config.task`` selects classification or regression.

    Raises:
        UnknownVariantError: ``name`` is not in MODEL_NAMES
    """
    if name not in MODEL_NAMES:
        raise UnknownVariantError('model', name, MODEL_NAMES)
    config = (config or ModelConfig()).with_updates(name=name)
    if name in BASELINES:
        return BASELINES[name](config)
    return TimingMattersModel(config)


def build_ablation(variant: str, config: Optional[ModelConfig] = None) -> TimingMattersModel:
    if variant not in ABLATIONS:
        raise UnknownVariantError('ablation', variant, ABLATIONS)
    return build_model(variant, config)


def build_baseline(name: str, config: Optional[ModelConfig] = None) -> TimePredictor:
    if name not in BASELINES:
        raise UnknownVariantError('baseline', name, tuple(BASELINES))
    return build_model(name, config)


def build_regression_head(model: TimePredictor) -> TimePredictor:
    """Copy of ``model`` whose final layer emits one scalar (time of day / 86400)."""
    regression = model.clone()
    config = model.config.with_updates(task='regression')
    object.__setattr__(regression, 'config', config)
    previous = regression.output_layer()
    rng = np.random.default_rng(config.seed + 1)
    regression.set_output_layer(Linear(previous.in_features, 1, rng))
    return regression


def save_model(path: Union[str, Path], model: TimePredictor, meta: Optional[dict] = None) -> str:
    """Checkpoint parameters, buffers and the model config; returns the digest."""
    document = dict(meta or {})
    document['model'] = model.config.to_dict()
    return save_checkpoint(path, model.state_dict(), document)


def load_model(path: Union[str, Path]) -> Tuple[TimePredictor, dict]:
    """Rebuild the model named in the checkpoint and load its state."""
    state, meta = load_checkpoint(path)
    if 'model' not in meta:
        raise CheckpointIntegrityError(path, f"Checkpoint {path} carries no model config")
    config = ModelConfig.from_dict(meta['model'])
    model = build_model(config.name, config)
    model.load_state_dict(state)
    model.eval()
    return model, meta
