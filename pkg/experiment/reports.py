"""Tables and manifests written next to every run."""
import json
from pathlib import Path
from typing import Iterable, Union

import pandas as pd

from experiment.metrics import MetricReport

PathLike = Union[str, Path]


def metric_frame(reports: Iterable[MetricReport]) -> pd.DataFrame:
    """One row per report: model_id, dataset_id, num_examples, precision_<k>..., rmse."""
    rows = []
    for report in reports:
        row = {'model_id': report.model_id, 'dataset_id': report.dataset_id, 'num_examples': report.num_examples}
        for k, value in sorted(report.precision.items(), reverse=True):
            row[f"precision_{k}"] = value
        row['rmse'] = report.rmse
        rows.append(row)
    return pd.DataFrame(rows)


def write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    """Tab-separated table, floats with six decimals."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, sep='\t', index=False, float_format='%.6f', lineterminator='\n')
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, sep='\t')


def write_json(document: dict, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str) + '\n', encoding='utf-8')
    return path


def render(frame: pd.DataFrame) -> str:
    """Plain-text rendering for the terminal."""
    if frame.empty:
        return '(empty)'
    return frame.to_string(index=False, float_format=lambda v: f"{v:.4f}")
