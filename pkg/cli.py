#!/usr/bin/env python3
"""
Command-line entry point: generate, train, eval, sweep, ablate and runs.

Every subcommand that produces artifacts writes them into one output
directory together with a manifest.json, and records the run in the registry
database. Exit code 0 means every requested artifact was written; 2 signals a
configuration or usage error and 1 any other failure.
"""
import argparse
import sys
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from config import get_config, load_run_config
from exceptions import BinningError, ConfigurationError, SchemaError, TimingError
from utils.hashing import file_content_hash
from utils.logging_utils import get_app_logger
from utils.run_logging import get_run_logger, jlog

USAGE_ERRORS = (ConfigurationError, SchemaError, BinningError)
DATASET_FILE = 'sessions.an'


@dataclass
class RunManifest:
    """Everything needed to rerun a CLI invocation."""
    run_id: str
    subcommand: str
    config_path: Optional[str]
    seed: Optional[int]
    output_dir: str
    dataset_hash: Optional[str] = None
    dataset_path: Optional[str] = None
    settings: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)
    started_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    finished_at: Optional[str] = None
    status: str = 'running'

    def write(self) -> Path:
        from experiment.reports import write_json

        return write_json(asdict(self), Path(self.output_dir) / 'manifest.json')


# -- helpers -----------------------------------------------------------------------

def _output_dir(args: argparse.Namespace, run_id: str) -> Path:
    if args.out:
        path = Path(args.out)
    else:
        path = get_config().OUTPUT_ROOT / f"{args.command}-{run_id}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _start(args: argparse.Namespace, settings: Dict[str, Any], seed: Optional[int],
           dataset_path: Optional[str] = None) -> RunManifest:
    from db.database import get_session
    from db.queries import record_run

    run_id = datetime.now(timezone.utc).strftime('%Y%m%dT%H%M%S') + '-' + uuid.uuid4().hex[:8]
    out = _output_dir(args, run_id)
    manifest = RunManifest(
        run_id=run_id, subcommand=args.command, config_path=str(args.config) if args.config else None,
        seed=seed, output_dir=str(out), settings=settings, dataset_path=dataset_path,
        dataset_hash=file_content_hash(dataset_path) if dataset_path else None,
    )
    with get_session() as session:
        record_run(session, {
            'run_id': run_id, 'subcommand': args.command, 'config_path': manifest.config_path, 'seed': seed,
            'dataset_hash': manifest.dataset_hash, 'output_dir': str(out),
            'model_name': getattr(args, 'model', None), 'settings': settings,
        })
    jlog(get_run_logger(), {'event': 'run_start', 'run_id': run_id, 'subcommand': args.command})
    return manifest


def _finish(manifest: RunManifest, success: bool, error: Optional[str] = None, reports=()) -> None:
    from db.database import get_session
    from db.queries import finish_run, insert_metric_report

    manifest.finished_at = datetime.now(timezone.utc).isoformat()
    manifest.status = 'completed' if success else 'failed'
    manifest.write()
    with get_session() as session:
        for report in reports:
            insert_metric_report(session, manifest.run_id, report)
        finish_run(session, manifest.run_id, success, error, manifest.dataset_hash)
    jlog(get_run_logger(), {'event': 'run_end', 'run_id': manifest.run_id, 'status': manifest.status,
                            'error': error})


def _load_dataset(path: str):
    from datamodel.io import load_dataset

    return load_dataset(path)


def _model_config(settings: Dict[str, Any], dataset, name: Optional[str] = None,
                  bins: Optional[int] = None, window: Optional[int] = None):
    """
    ModelConfig from the 'model' section, sized to the dataset.

    Vocabulary sizes come from the dataset header. The context length is the
    dataset's input length unless ``window`` asks for a different one.
    SmartSense-style data always uses its 8 time ranges.

    Raises:
        BinningError: an explicit bin count other than 8 for SmartSense data
    """
    from datamodel.records import Schema
    from nets.model import ModelConfig

    values = dict(settings)
    if name:
        values['name'] = name
    values['num_devices'] = dataset.num_devices
    values['num_controls'] = dataset.num_controls
    values['context_length'] = window or dataset.session_length - 1
    if bins:
        values['num_bins'] = bins
    if dataset.schema is Schema.SMARTSENSE:
        if bins and bins != 8:
            raise BinningError(f"bins={bins}", "SmartSense data records 8 time ranges; use --bins 8")
        values['num_bins'] = 8
    return ModelConfig.from_dict(values)


def _fit_window(dataset, context_length: int):
    """Rewindow the dataset when the requested context differs from its session length."""
    from datamodel.streams import rebuild_streams, rewindow

    if dataset.session_length - 1 == context_length:
        return dataset
    return rewindow(rebuild_streams(dataset), context_length + 1, dataset)


def _banner(title: str) -> None:
    print("=" * 80)
    print(title)
    print("=" * 80)


# -- subcommands ---------------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> int:
    from datamodel.io import save_an, write_vocabulary
    from experiment.reports import write_table
    from syngen.analysis import analyze_device_frequency, analyze_time_diffs, summary
    from syngen.generator import GeneratorConfig, generate
    from syngen.routines import degenerate_bank, load_routine_bank

    overrides = {'generator': {'seed': args.seed, 'num_users': args.users}}
    if args.routines and args.routines != 'none':
        overrides['generator']['routine_bank'] = args.routines
    settings = load_run_config(args.config, overrides)
    config = GeneratorConfig.from_dict(settings['generator'])
    manifest = _start(args, settings, config.seed)
    try:
        bank = load_routine_bank(config.routine_bank)
        if args.routines == 'none':
            bank = degenerate_bank(bank, config.num_users)
        dataset = generate(config, bank)
        out = Path(manifest.output_dir)
        data_path = save_an(out / DATASET_FILE, dataset)
        vocab_path = write_vocabulary(data_path, bank.vocabulary())
        tables = {
            'summary.tsv': summary(dataset.sessions),
            'time_diffs.tsv': analyze_time_diffs(dataset.sessions),
            'device_frequency.tsv': analyze_device_frequency(dataset.sessions, top=None).reset_index(),
        }
        manifest.artifacts = [str(data_path), str(vocab_path)]
        manifest.artifacts += [str(write_table(frame, out / name)) for name, frame in tables.items()]
        manifest.dataset_path = str(data_path)
        manifest.dataset_hash = file_content_hash(data_path)
    except Exception as e:
        _finish(manifest, False, str(e))
        raise
    _finish(manifest, True)

    _banner("Generated dataset")
    print(tables['summary.tsv'].to_string(index=False))
    print(f"\n✓ Wrote {data_path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from datamodel.splits import split
    from experiment.reports import metric_frame, render, write_json, write_table
    from experiment.trainer import TrainConfig, train
    from nets.registry import build_model, save_model

    overrides = {
        'model': {'num_layers': args.layers, 'seed': args.seed},
        'train': {'max_epochs': args.epochs, 'seed': args.seed},
    }
    settings = load_run_config(args.config, overrides)
    dataset = _load_dataset(args.data)
    model_config = _model_config(settings['model'], dataset, args.model, bins=args.bins, window=args.window)
    if args.task:
        model_config = model_config.with_updates(task=args.task)
    settings['model'] = model_config.to_dict()
    train_config = TrainConfig.from_dict(settings['train'])
    dataset = _fit_window(dataset, model_config.context_length)
    model = build_model(model_config.name, model_config)

    manifest = _start(args, settings, train_config.seed, args.data)
    try:
        parts = split(dataset, seed=train_config.seed, strict=True)
        result = train(model, parts, train_config, run_id=manifest.run_id, dataset_id=manifest.dataset_hash or '')
        out = Path(manifest.output_dir)
        checkpoint = out / 'model.npz'
        save_model(checkpoint, model, {
            'dataset_hash': manifest.dataset_hash, 'split_seed': train_config.seed,
            'best_epoch': result.best_epoch, 'train': train_config.to_dict(),
        })
        frame = metric_frame([result.test_report])
        history = [asdict(record) for record in result.history]
        manifest.artifacts = [
            str(checkpoint),
            str(write_table(frame, out / 'metrics.tsv')),
            str(write_json({'test': result.test_report.to_dict(), 'history': history}, out / 'metrics.json')),
        ]
    except Exception as e:
        _finish(manifest, False, str(e))
        raise
    _finish(manifest, True, reports=[result.test_report])

    _banner(f"Trained {model_config.name} (best epoch {result.best_epoch})")
    print(render(frame))
    print(f"\n✓ Checkpoint: {checkpoint}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    from datamodel.splits import split
    from experiment.metrics import evaluate
    from experiment.reports import metric_frame, render, write_json, write_table
    from nets.registry import load_model

    model, meta = load_model(args.checkpoint)
    dataset = _load_dataset(args.data)
    if dataset.session_length - 1 != model.config.context_length:
        raise ConfigurationError(
            'window', f"Checkpoint expects {model.config.context_length} input actions, "
                      f"dataset sessions have {dataset.session_length - 1}")
    settings = {'checkpoint': str(args.checkpoint), 'model': model.config.to_dict(), 'bins': args.bins}
    manifest = _start(args, settings, meta.get('split_seed'), args.data)
    try:
        data = dataset
        if meta.get('dataset_hash') and meta['dataset_hash'] == manifest.dataset_hash and not args.full:
            # same dataset as training: score the held-out partition of the same split
            data = split(dataset, seed=int(meta.get('split_seed', 0))).release_test()
        report = evaluate(model, data, ks=args.bins, model_id=model.config.name,
                          dataset_id=manifest.dataset_hash or '', circular=args.circular)
        frame = metric_frame([report])
        out = Path(manifest.output_dir)
        manifest.artifacts = [str(write_table(frame, out / 'metrics.tsv')),
                              str(write_json(report.to_dict(), out / 'metrics.json'))]
    except Exception as e:
        _finish(manifest, False, str(e))
        raise
    _finish(manifest, True, reports=[report])

    _banner(f"Evaluated {model.config.name}")
    print(render(frame))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    from experiment.reports import render, write_table
    from experiment.sweeps import SWEEPS
    from experiment.trainer import TrainConfig

    kind = args.kind
    overrides = {
        'model': {'seed': args.seed},
        'train': {'max_epochs': args.epochs},
        'sweep': {'workers': args.workers, 'windows': args.window, 'layers': args.layers,
                  'bins': args.bins, 'seeds': args.seeds},
    }
    settings = load_run_config(args.config, overrides)
    sweep = settings['sweep']
    dataset = _load_dataset(args.data)
    model_config = _model_config(settings['model'], dataset)
    settings['model'] = model_config.to_dict()
    train_config = TrainConfig.from_dict(settings['train'])
    workers = int(sweep.get('workers') or get_config().SWEEP_WORKERS)
    seeds = tuple(sweep.get('seeds') or (0,))

    kwargs: Dict[str, Any] = {'model_config': model_config, 'train_config': train_config,
                              'seeds': seeds, 'workers': workers}
    if kind == 'context':
        kwargs.update(windows=tuple(sweep.get('windows') or ()), layers=tuple(sweep.get('layers') or ()))
        kwargs = {k: v for k, v in kwargs.items() if v != ()}
    elif kind == 'bins':
        if sweep.get('bins'):
            kwargs['bins'] = tuple(sweep['bins'])

    manifest = _start(args, settings, seeds[0], args.data)
    try:
        table = SWEEPS[kind](dataset, **kwargs)
        path = write_table(table, Path(manifest.output_dir) / f"sweep_{kind}.tsv")
        manifest.artifacts = [str(path)]
    except Exception as e:
        _finish(manifest, False, str(e))
        raise
    _finish(manifest, True)

    _banner(f"Sweep: {kind}")
    print(render(table))
    print(f"\n✓ Wrote {path}")
    return 0


def cmd_runs(args: argparse.Namespace) -> int:
    import pandas as pd

    from db.database import get_session
    from db.queries import get_metric_reports, list_runs
    from experiment.reports import render

    with get_session() as session:
        if args.run_id:
            frame = pd.DataFrame(get_metric_reports(session, args.run_id))
        else:
            frame = pd.DataFrame(list_runs(session, args.subcommand, args.limit))
    print(render(frame))
    return 0


# -- parser ---------------------------------------------------------------------------

def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=Path, default=None,
                        help='YAML run configuration (default: config/default.yaml)')
    parser.add_argument('--seed', type=int, default=None, help='Random seed (overrides the config file)')
    parser.add_argument('--out', default=None,
                        help='Output directory (default: $TIMING_OUTPUT_ROOT/<command>-<run id>)')


def build_parser() -> argparse.ArgumentParser:
    from nets.registry import MODEL_NAMES

    parser = argparse.ArgumentParser(
        prog='timing-matters',
        description='Predict the time bin of the next smart-home action.',
    )
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('generate', help='Generate a synthetic AN-style dataset and analysis tables')
    _common(gen)
    gen.add_argument('--users', type=int, default=None, help='Number of users to generate')
    gen.add_argument('--routines', default=None,
                     help="Routine bank YAML, or 'none' for users without routines")
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser('train', help='Train a model and report test metrics')
    _common(tr)
    tr.add_argument('--data', required=True, help='Dataset file')
    tr.add_argument('--model', default='timing-matters', help=f"One of: {', '.join(MODEL_NAMES)}")
    tr.add_argument('--task', choices=('classification', 'regression'), default=None)
    tr.add_argument('--bins', type=int, default=None, help='Number of time bins')
    tr.add_argument('--window', type=int, default=None, help='Input actions per session')
    tr.add_argument('--layers', type=int, default=None, help='Transformer layers')
    tr.add_argument('--epochs', type=int, default=None, help='Maximum epochs')
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser('eval', help='Score a checkpoint without training')
    _common(ev)
    ev.add_argument('--checkpoint', required=True, help='model.npz written by train')
    ev.add_argument('--data', required=True, help='Dataset file')
    ev.add_argument('--bins', type=int, nargs='+', default=None,
                    help='Report Precision at these bin counts (must divide the model bin count)')
    ev.add_argument('--full', action='store_true', help='Score every session, not the held-out partition')
    ev.add_argument('--circular', action='store_true', help='Wrap RMSE distances around midnight')
    ev.set_defaults(func=cmd_eval)

    for name, kinds, help_text in (
        ('sweep', ('context', 'bins', 'regcls', 'ablation'), 'Run an analysis sweep'),
        ('ablate', None, 'Train the full model and its three ablations'),
    ):
        sp = sub.add_parser(name, help=help_text)
        _common(sp)
        if kinds:
            sp.add_argument('kind', choices=kinds)
        else:
            sp.set_defaults(kind='ablation')
        sp.add_argument('--data', required=True, help='Dataset file')
        sp.add_argument('--window', type=int, nargs='+', default=None, help='Context windows (context sweep)')
        sp.add_argument('--layers', type=int, nargs='+', default=None, help='Layer counts (context sweep)')
        sp.add_argument('--bins', type=int, nargs='+', default=None, help='Bin counts (bins sweep)')
        sp.add_argument('--seeds', type=int, nargs='+', default=None, help='Seeds per trial')
        sp.add_argument('--epochs', type=int, default=None, help='Maximum epochs per trial')
        sp.add_argument('--workers', type=int, default=None, help='Parallel trials')
        sp.set_defaults(func=cmd_sweep)

    runs = sub.add_parser('runs', help='List recorded runs')
    runs.add_argument('--subcommand', default=None)
    runs.add_argument('--limit', type=int, default=20)
    runs.add_argument('--run-id', default=None, help='Show the metric reports of one run')
    runs.set_defaults(func=cmd_runs, config=None, out=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logger = get_app_logger()
    try:
        return args.func(args)
    except USAGE_ERRORS as e:
        logger.log_command_failure(args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TimingError, FileNotFoundError) as e:
        logger.log_command_failure(args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
