"""Dataset schemas, session windows, splits and time binning."""
from datamodel.records import ActionRecord, Schema, Session, SessionDataset, TimeDiffFeature, time_diff_feature
from datamodel.binning import BinningScheme, bin_to_representative_time, coarsen_bin, time_to_bin
from datamodel.io import (
    Vocabulary, load_an, load_dataset, load_smartsense, read_vocabulary, save_an, save_smartsense,
    to_smartsense, write_vocabulary,
)
from datamodel.splits import DatasetSplit, split
from datamodel.streams import ActionStream, rebuild_streams, rewindow
from datamodel.tensors import SessionTensors, iterate_minibatches, to_tensors

__all__ = [
    'ActionRecord', 'Schema', 'Session', 'SessionDataset', 'TimeDiffFeature', 'time_diff_feature',
    'BinningScheme', 'bin_to_representative_time', 'coarsen_bin', 'time_to_bin',
    'Vocabulary', 'load_an', 'load_dataset', 'load_smartsense', 'read_vocabulary', 'save_an',
    'save_smartsense', 'to_smartsense', 'write_vocabulary',
    'DatasetSplit', 'split', 'ActionStream', 'rebuild_streams', 'rewindow',
    'SessionTensors', 'iterate_minibatches', 'to_tensors',
]
