"""Routine-driven synthetic data generation and dataset analysis."""
from syngen.routines import RoutineBank, RoutineSpec, RoutineTemplate, degenerate_bank, load_routine_bank
from syngen.generator import GeneratorConfig, allocate_instances, generate, generate_streams
from syngen.analysis import analyze_device_frequency, analyze_time_diffs, top_device_share

__all__ = [
    'RoutineBank', 'RoutineSpec', 'RoutineTemplate', 'degenerate_bank', 'load_routine_bank',
    'GeneratorConfig', 'allocate_instances', 'generate', 'generate_streams',
    'analyze_device_frequency', 'analyze_time_diffs', 'top_device_share',
]
