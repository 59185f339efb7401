"""Context-window, bin-count, regression-vs-classification and ablation sweeps.

Each sweep expands into independent trials. Trials run sequentially or on a
``multiprocessing.Pool``; every trial is single-worker and seeded, and rows are
sorted by trial key so the table does not depend on completion order.
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool, Queue
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from datamodel.binning import SUPPORTED_BIN_COUNTS
from datamodel.records import Schema, SessionDataset
from datamodel.splits import split
from datamodel.streams import rebuild_streams, rewindow
from exceptions import SchemaError
from experiment.trainer import TrainConfig, train
from nets.model import ABLATIONS, ModelConfig
from utils.run_logging import attach_queue, forwarded_events, get_run_logger, jlog

logger = logging.getLogger(__name__)

DEFAULT_WINDOWS = (5, 10, 20, 50, 100, 200)
DEFAULT_LAYERS = (2, 4)


@dataclass
class Trial:
    """One training run of a sweep; ``key`` orders the result table."""
    sweep: str
    key: Tuple
    dataset: SessionDataset
    model: Dict[str, Any]
    train: Dict[str, Any]
    split_seed: int = 0
    labels: Dict[str, Any] = field(default_factory=dict)
    regression: bool = False


def run_trial(trial: Trial) -> Dict[str, Any]:
    """Train one model and return its result row (top-level so Pool can pickle it)."""
    from nets.registry import build_model, build_regression_head

    events = get_run_logger()
    jlog(events, {'event': 'trial_start', 'sweep': trial.sweep, 'key': list(trial.key)})
    config = ModelConfig.from_dict(trial.model)
    model = build_model(config.name, config)
    if trial.regression:
        model = build_regression_head(model)
    parts = split(trial.dataset, seed=trial.split_seed)
    result = train(model, parts, TrainConfig.from_dict(trial.train), run_id=f"{trial.sweep}:{trial.key}")
    report = result.test_report
    row = dict(trial.labels)
    for k, value in sorted(report.precision.items(), reverse=True):
        row[f"precision_{k}"] = value
    row['rmse'] = report.rmse
    row['best_epoch'] = result.best_epoch
    row['test_sessions'] = report.num_examples
    jlog(events, {'event': 'trial_end', 'sweep': trial.sweep, 'key': list(trial.key), 'row': row})
    return row


def run_trials(trials: Sequence[Trial], workers: int = 1) -> pd.DataFrame:
    order = sorted(range(len(trials)), key=lambda i: trials[i].key)
    trials = [trials[i] for i in order]
    logger.info("Running %d trials on %d worker(s)", len(trials), max(1, workers))
    if workers > 1 and len(trials) > 1:
        # workers log through the queue; the listener starts after the fork
        queue = Queue()
        pool = Pool(processes=min(workers, len(trials)), initializer=attach_queue, initargs=(queue,))
        with forwarded_events(queue):
            try:
                rows = pool.map(run_trial, trials)
                pool.close()
            except BaseException:
                pool.terminate()
                raise
            finally:
                pool.join()
    else:
        rows = [run_trial(t) for t in trials]
    return pd.DataFrame(rows)


def _require_an(dataset: SessionDataset, sweep: str) -> None:
    if dataset.schema is not Schema.AN:
        raise SchemaError(
            'AN', dataset.schema.value,
            f"The {sweep} sweep needs second-level timestamps; SmartSense-style data only "
            f"records 3-hour time ranges",
        )


def context_trials(dataset: SessionDataset, model_config: ModelConfig, train_config: TrainConfig,
                   windows: Sequence[int] = DEFAULT_WINDOWS, layers: Sequence[int] = DEFAULT_LAYERS,
                   seeds: Sequence[int] = (0,)) -> List[Trial]:
    """Rewindow streams to w inputs + 1 target for every w; raises InsufficientDataError for too-long w."""
    streams = rebuild_streams(dataset)
    trials = []
    for w in windows:
        windowed = rewindow(streams, w + 1, dataset)
        for n_layers in layers:
            for seed in seeds:
                config = model_config.with_updates(context_length=w, num_layers=n_layers, seed=seed)
                trials.append(Trial(
                    sweep='context', key=(w, n_layers, seed), dataset=windowed, model=config.to_dict(),
                    train=train_config.to_dict(), split_seed=seed,
                    labels={'window': w, 'layers': n_layers, 'seed': seed},
                ))
    return trials


def sweep_context(dataset: SessionDataset, model_config: Optional[ModelConfig] = None,
                  train_config: Optional[TrainConfig] = None, windows: Sequence[int] = DEFAULT_WINDOWS,
                  layers: Sequence[int] = DEFAULT_LAYERS, seeds: Sequence[int] = (0,),
                  workers: int = 1) -> pd.DataFrame:
    trials = context_trials(dataset, model_config or ModelConfig(), train_config or TrainConfig(),
                            windows, layers, seeds)
    return run_trials(trials, workers)


def sweep_bins(dataset: SessionDataset, model_config: Optional[ModelConfig] = None,
               train_config: Optional[TrainConfig] = None, bins: Sequence[int] = SUPPORTED_BIN_COUNTS,
               seeds: Sequence[int] = (0,), workers: int = 1) -> pd.DataFrame:
    """Retrain per bin count; rows report Precision(k) at the trained k and RMSE of bin midpoints."""
    _require_an(dataset, 'bins')
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    trials = []
    for k in bins:
        for seed in seeds:
            config = model_config.with_updates(num_bins=k, seed=seed)
            trials.append(Trial(
                sweep='bins', key=(k, seed), dataset=dataset, model=config.to_dict(),
                train=train_config.to_dict(), split_seed=seed, labels={'bins': k, 'seed': seed},
            ))
    frame = run_trials(trials, workers)
    frame['precision'] = [row[f"precision_{int(row['bins'])}"] for _, row in frame.iterrows()]
    return frame[['bins', 'seed', 'precision', 'rmse', 'best_epoch', 'test_sessions']]


def compare_regression_classification(dataset: SessionDataset, model_config: Optional[ModelConfig] = None,
                                      train_config: Optional[TrainConfig] = None,
                                      seeds: Sequence[int] = (0,), workers: int = 1) -> pd.DataFrame:
    """R and C rows with Precision(96), Precision(8) and RMSE under identical budgets."""
    _require_an(dataset, 'regcls')
    model_config = (model_config or ModelConfig()).with_updates(task='classification')
    train_config = train_config or TrainConfig()
    trials = []
    for head, regression in (('C', False), ('R', True)):
        for seed in seeds:
            trials.append(Trial(
                sweep='regcls', key=(head, seed), dataset=dataset,
                model=model_config.with_updates(seed=seed).to_dict(), train=train_config.to_dict(),
                split_seed=seed, labels={'head': head, 'seed': seed}, regression=regression,
            ))
    return run_trials(trials, workers)


def run_ablations(dataset: SessionDataset, model_config: Optional[ModelConfig] = None,
                  train_config: Optional[TrainConfig] = None, seeds: Sequence[int] = (0,),
                  workers: int = 1) -> pd.DataFrame:
    """Full model plus the three ablations."""
    model_config = model_config or ModelConfig()
    train_config = train_config or TrainConfig()
    names = ('timing-matters',) + ABLATIONS
    trials = []
    for position, name in enumerate(names):
        for seed in seeds:
            trials.append(Trial(
                sweep='ablation', key=(position, seed), dataset=dataset,
                model=model_config.with_updates(name=name, seed=seed).to_dict(), train=train_config.to_dict(),
                split_seed=seed, labels={'model': name, 'seed': seed},
            ))
    return run_trials(trials, workers)


SWEEPS = {
    'context': sweep_context,
    'bins': sweep_bins,
    'regcls': compare_regression_classification,
    'ablation': run_ablations,
}
