"""Routine bank, synthetic generator and analysis tables."""
import numpy as np
import pytest

from conftest import make_session, single_routine_bank
from datamodel.streams import rebuild_streams
from exceptions import ConfigurationError, GeneratorError
from syngen.analysis import (
    analyze_device_frequency, analyze_time_diffs, consecutive_diffs, summary, top_device_share,
)
from syngen.generator import GeneratorConfig, allocate_instances, generate, generate_streams
from syngen.routines import (
    RoutineTemplate, degenerate_bank, load_routine_bank, parse_clock,
)


@pytest.fixture(scope='module')
def default_dataset(routine_bank):
    return generate(GeneratorConfig(), routine_bank)


class TestRoutineBank:
    def test_default_bank_vocabulary(self, routine_bank):
        assert routine_bank.num_devices == 16
        assert routine_bank.num_controls == 121
        assert len(routine_bank.specs) == 39
        assert sorted(set(routine_bank.control_device)) == list(range(16))

    def test_vocabulary_sidecar_matches_bank(self, routine_bank):
        vocab = routine_bank.vocabulary()
        assert vocab.devices['light'] == 0
        assert len(vocab.controls) == 121
        assert all(vocab.control_device[c] == d for c, d in enumerate(routine_bank.control_device))

    @pytest.mark.parametrize('value,expected', [('06:30', 23400.0), ('00:00:10', 10.0), (3600, 3600.0)])
    def test_parse_clock(self, value, expected):
        assert parse_clock(value) == expected

    def test_parse_clock_rejects_garbage(self):
        with pytest.raises(ConfigurationError):
            parse_clock('noon')

    def test_unknown_control_rejected(self, tmp_path):
        path = tmp_path / 'bank.yaml'
        path.write_text(
            "devices:\n  - name: light\n    controls: [on]\n"
            "users:\n  - user: 0\n    routines:\n      - {device: light, control: dim, mean: '08:00'}\n"
        )
        with pytest.raises(ConfigurationError):
            load_routine_bank(path)

    def test_missing_bank_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_routine_bank(tmp_path / 'absent.yaml')

    def test_invalid_probability(self):
        with pytest.raises(ConfigurationError):
            RoutineTemplate(device=0, control=0, mean=100.0, jitter=10.0, probability=1.5).validate()


class TestGeneratorConfig:
    def test_defaults_validate(self):
        config = GeneratorConfig().validate()
        assert config.num_users == 39 and config.target_instances == 11665

    def test_range_must_stay_in_one_year(self):
        with pytest.raises(ConfigurationError):
            GeneratorConfig(start_date='2019-12-01', end_date='2020-01-31').validate()

    def test_unknown_setting(self):
        with pytest.raises(ConfigurationError):
            GeneratorConfig.from_dict({'num_user': 3})

    def test_unparseable_date(self):
        with pytest.raises(ConfigurationError):
            GeneratorConfig(start_date='yesterday').validate()


class TestGenerator:
    def test_default_config_produces_target_sessions(self, default_dataset):
        assert len(default_dataset) == 11665
        assert default_dataset.num_users == 39
        assert (default_dataset.num_devices, default_dataset.num_controls) == (16, 121)
        assert {a.device for s in default_dataset.sessions for a in s.actions} <= set(range(16))
        assert max(a.control for s in default_dataset.sessions for a in s.actions) < 121
        assert {s.user for s in default_dataset.sessions} == set(range(39))
        default_dataset.validate()

    def test_same_seed_same_data(self, routine_bank):
        config = GeneratorConfig(num_users=2, target_instances=None, end_date='2019-01-20', seed=4)
        assert generate(config, routine_bank).sessions == generate(config, routine_bank).sessions

    def test_different_seed_different_data(self, routine_bank):
        a = GeneratorConfig(num_users=2, target_instances=None, end_date='2019-01-20', seed=4)
        b = GeneratorConfig(num_users=2, target_instances=None, end_date='2019-01-20', seed=5)
        assert generate(a, routine_bank).sessions != generate(b, routine_bank).sessions

    def test_streams_are_time_ordered(self, routine_bank):
        config = GeneratorConfig(num_users=3, end_date='2019-01-31')
        for stream in generate_streams(config, routine_bank):
            keys = [(a.day, a.time) for a in stream.actions]
            assert keys == sorted(keys)

    def test_trimmed_sessions_rebuild_into_one_stream_per_user(self, small_dataset):
        streams = rebuild_streams(small_dataset)
        assert sorted(s.user for s in streams) == [0, 1, 2]
        assert sum(len(s) - 9 for s in streams) == len(small_dataset)

    def test_routine_times_cluster_around_anchor(self):
        bank = single_routine_bank(mean=8 * 3600.0, jitter=60.0)
        config = GeneratorConfig(num_users=1, target_instances=None, end_date='2019-02-28')
        stream = generate_streams(config, bank)[0]
        times = np.array([a.time for a in stream.actions])
        assert len(times) == 59
        assert np.all(np.abs(times - 8 * 3600) < 600)

    def test_zero_jitter_routine_fires_at_its_anchor(self):
        RoutineTemplate(device=0, control=0, mean=100.0, jitter=0.0).validate()
        bank = single_routine_bank(mean=8 * 3600.0, jitter=0.0)
        config = GeneratorConfig(num_users=1, target_instances=None, end_date='2019-01-31')
        stream = generate_streams(config, bank)[0]
        assert len(stream.actions) == 31
        assert {a.time for a in stream.actions} == {8 * 3600}

    def test_users_without_routines_fail_cleanly(self, routine_bank):
        bank = degenerate_bank(routine_bank, num_users=1)
        with pytest.raises(GeneratorError) as info:
            generate(GeneratorConfig(num_users=1), bank)
        assert info.value.operation == 'windowing'

    def test_unreachable_target(self, routine_bank):
        config = GeneratorConfig(num_users=1, end_date='2019-01-10', target_instances=5000)
        with pytest.raises(GeneratorError):
            generate(config, routine_bank)

    def test_vocabulary_mismatch(self, routine_bank):
        with pytest.raises(ConfigurationError):
            generate(GeneratorConfig(num_users=1, num_devices=12), routine_bank)

    def test_too_many_users(self, routine_bank):
        with pytest.raises(GeneratorError):
            generate(GeneratorConfig(num_users=40), routine_bank)

    def test_allocation_hits_target(self):
        quotas = allocate_instances([100, 50, 50], 101)
        assert sum(quotas) == 101
        assert quotas == [51, 25, 25] or quotas == [50, 26, 25]
        assert allocate_instances([10, 30], 20) == [5, 15]


class TestAnalysis:
    def test_time_diff_histogram_counts_every_gap(self, small_dataset):
        table = analyze_time_diffs(small_dataset.sessions)
        assert list(table.columns) == ['bucket', 'lower', 'upper', 'count', 'share']
        assert table['count'].sum() == len(small_dataset) * 9
        assert table['share'].sum() == pytest.approx(1.0)
        assert np.isinf(table['upper'].iloc[-1])

    def test_bucket_edges(self):
        session = make_session([0, 0, 30, 400, 4000, 100000 - 86400, 86000, 86000, 86001, 86002])
        diffs = consecutive_diffs([session])
        assert len(diffs) == 9
        table = analyze_time_diffs([session], edges=(0, 1, 60, 3600))
        assert table['count'].tolist() == [2, 3, 1, 3]

    def test_empty_input(self):
        table = analyze_time_diffs([])
        assert table['count'].sum() == 0

    def test_device_frequency_sorted_by_total(self, small_dataset):
        table = analyze_device_frequency(small_dataset.sessions, top=None)
        totals = table['total'].tolist()
        assert totals == sorted(totals, reverse=True)
        assert [f"pos_{i}" for i in range(10)] == list(table.columns[:10])
        assert len(analyze_device_frequency(small_dataset.sessions)) == 2

    def test_top_two_devices_dominate(self, default_dataset):
        assert 0.2 <= top_device_share(default_dataset.sessions, top=2) <= 0.8

    def test_time_differences_spread_over_buckets(self, default_dataset):
        table = analyze_time_diffs(default_dataset.sessions)
        assert table['share'].max() <= 0.40
        assert (table['count'] > 0).sum() >= 4

    def test_summary(self, small_dataset):
        row = summary(small_dataset.sessions).iloc[0]
        assert row['sessions'] == len(small_dataset)
        assert row['users'] == 3
