"""Shared fixtures: testing config, in-memory registry and small synthetic datasets."""
import os
import tempfile
from pathlib import Path

_SCRATCH = Path(tempfile.mkdtemp(prefix='timing-tests-'))
os.environ['TIMING_ENV'] = 'testing'
os.environ['TIMING_DB_URL'] = 'sqlite://'
os.environ['TIMING_LOG_PATH'] = str(_SCRATCH / 'events.log')
os.environ['TIMING_OUTPUT_ROOT'] = str(_SCRATCH / 'runs')

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from datamodel.records import ActionRecord, Schema, Session, SessionDataset  # noqa: E402


@pytest.fixture(autouse=True)
def fresh_registry():
    """Every test starts from an empty in-memory run registry."""
    from db.database import configure

    configure('sqlite://')
    yield


@pytest.fixture(scope='session')
def routine_bank():
    from syngen.routines import load_routine_bank

    return load_routine_bank()


@pytest.fixture(scope='session')
def small_dataset(routine_bank):
    """Three users over two weeks; a few hundred stride-1 sessions."""
    from syngen.generator import GeneratorConfig, generate

    config = GeneratorConfig(num_users=3, target_instances=None, start_date='2019-03-04',
                             end_date='2019-03-17', seed=7)
    return generate(config, routine_bank)


@pytest.fixture
def small_model_config():
    from nets.model import ModelConfig

    return ModelConfig(embed_dim=8, num_heads=2, num_layers=1, ff_dim=16, hidden_dim=8,
                       num_bins=96, context_length=9, seed=3)


@pytest.fixture
def fast_train_config():
    from experiment.trainer import TrainConfig

    return TrainConfig(batch_size=32, learning_rate=1e-3, max_epochs=2, patience=2, seed=0)


def make_session(times, user=0, day=10, devices=None, controls=None, schema=Schema.AN):
    """Session of len(times) actions on one day; devices/controls default to 0."""
    n = len(times)
    devices = devices if devices is not None else [0] * n
    controls = controls if controls is not None else [0] * n
    actions = tuple(
        ActionRecord(device=d, control=c, day=day, time=int(t), user=user if schema is Schema.AN else None)
        for t, d, c in zip(times, devices, controls)
    )
    return Session(user=user if schema is Schema.AN else None, actions=actions, schema=schema)


def make_dataset(count=20, length=10, num_devices=4, num_controls=6, seed=0):
    """Random AN sessions with non-decreasing times within a day."""
    rng = np.random.default_rng(seed)
    sessions = []
    for i in range(count):
        times = np.sort(rng.integers(0, 86400, size=length))
        devices = rng.integers(0, num_devices, size=length).tolist()
        controls = rng.integers(0, num_controls, size=length).tolist()
        sessions.append(make_session(times, user=i % 3, day=int(i % 300), devices=devices, controls=controls))
    return SessionDataset(sessions=tuple(sessions), schema=Schema.AN, num_devices=num_devices,
                          num_controls=num_controls, num_users=3, session_length=length,
                          metadata={'year': 2019})


def single_routine_bank(mean, jitter=60.0):
    """Default vocabulary with one user whose only routine is ``light.switch_on`` around ``mean``."""
    from syngen.routines import RoutineBank, RoutineSpec, RoutineTemplate, load_routine_bank

    bank = load_routine_bank()
    control = bank.controls.index('light.switch_on')
    spec = RoutineSpec(user=0, routines=(RoutineTemplate(device=bank.control_device[control], control=control,
                                                         mean=mean, jitter=jitter),))
    return RoutineBank(devices=bank.devices, controls=bank.controls, control_device=bank.control_device,
                       specs=[spec])
