import math

import pytest

from poc_platform import reader_sim
from poc_platform.reader_sim import (
    Activity,
    Channel,
    ChannelProgram,
    Interface,
    ScenarioError,
    ScenarioSegment,
    SessionScenario,
    TagConfig,
)
from poc_platform.textcfg import ConfigSyntaxError


def make_scenario(segments=None, tags=None, seed=1):
    if segments is None:
        segments = (
            ScenarioSegment(
                start_s=0.0, end_s=60.0, activity=Activity.BIKE,
                channel_programs={Channel.TEMPERATURE_C: ChannelProgram(baseline=33.0)},
            ),
        )
    if tags is None:
        tags = (TagConfig(tag_id="t1", interface=Interface.UHF, channels=(Channel.TEMPERATURE_C,)),)
    return SessionScenario(scenario_id="s", seed=seed, segments=tuple(segments), tag_configs=tuple(tags))


class TestLoadScenario:
    def test_bundled_scenario_has_two_900s_segments(self, data_dir):
        sc = reader_sim.load_scenario(data_dir / "bike_walk.scenario")
        assert len(sc.segments) == 2
        assert (sc.segments[0].start_s, sc.segments[0].end_s) == (0.0, 900.0)
        assert (sc.segments[1].start_s, sc.segments[1].end_s) == (900.0, 1800.0)
        assert sc.segments[0].activity is Activity.BIKE
        assert sc.segments[1].activity is Activity.WALK

    def test_uhf_defaults(self, data_dir):
        sc = reader_sim.load_scenario(data_dir / "bike_walk.scenario")
        uhf = [t for t in sc.tag_configs if t.interface is Interface.UHF][0]
        assert uhf.chip_sensitivity_dBm == -15.0
        assert uhf.max_read_distance_cm == 15.0

    def test_empty_segments_rejected(self, tmp_path):
        p = tmp_path / "x.scenario"
        p.write_text("format: 1\nscenario: x\n[tag t]\ninterface: UHF\nchannels: temperature_C\n")
        with pytest.raises(ScenarioError):
            reader_sim.load_scenario(p)

    def test_end_before_start_rejected(self, tmp_path):
        p = tmp_path / "x.scenario"
        p.write_text(
            "format: 1\nscenario: x\n[tag t]\ninterface: UHF\nchannels: temperature_C\n"
            "[segment s]\nstart_s: 10\nend_s: 5\nactivity: bike\nprogram: temperature_C baseline=33\n"
        )
        with pytest.raises(ScenarioError):
            reader_sim.load_scenario(p)

    def test_syntax_error_reports_line(self, tmp_path):
        p = tmp_path / "x.scenario"
        p.write_text("format: 1\nscenario: x\nbogus line without separator\n")
        with pytest.raises(ConfigSyntaxError) as exc:
            reader_sim.load_scenario(p)
        assert "line 3" in str(exc.value)

    def test_unsupported_format_version(self, tmp_path):
        p = tmp_path / "x.scenario"
        p.write_text("format: 99\nscenario: x\n")
        with pytest.raises(ScenarioError):
            reader_sim.load_scenario(p)


class TestValidation:
    def test_overlapping_segments(self):
        segs = (
            ScenarioSegment(0.0, 60.0, Activity.BIKE, {}),
            ScenarioSegment(50.0, 120.0, Activity.WALK, {}),
        )
        with pytest.raises(ScenarioError):
            reader_sim.generate_readings(make_scenario(segments=segs))

    def test_negative_noise(self):
        segs = (
            ScenarioSegment(0.0, 60.0, Activity.BIKE,
                            {Channel.TEMPERATURE_C: ChannelProgram(baseline=33.0, noise_std=-1.0)}),
        )
        with pytest.raises(ScenarioError):
            reader_sim.generate_readings(make_scenario(segments=segs))

    def test_duplicate_tag_ids(self):
        tags = (
            TagConfig("t1", Interface.UHF, (Channel.TEMPERATURE_C,)),
            TagConfig("t1", Interface.NFC, (Channel.CURRENT_UA,)),
        )
        with pytest.raises(ScenarioError):
            reader_sim.generate_readings(make_scenario(tags=tags))

    def test_nfc_sensitivity_rejected(self):
        tags = (TagConfig("t1", Interface.NFC, (Channel.CURRENT_UA,), chip_sensitivity_dBm=-15.0),)
        with pytest.raises(ScenarioError):
            reader_sim.generate_readings(make_scenario(tags=tags))


class TestGenerate:
    def test_zero_duration_scenario_gives_empty_list(self):
        sc = SessionScenario(scenario_id="s", seed=1, segments=(), tag_configs=())
        assert reader_sim.generate_readings(sc) == []

    def test_deterministic_byte_identical_logs(self, data_dir, tmp_path):
        sc = reader_sim.load_scenario(data_dir / "bike_walk_noisy.scenario")
        a, b = tmp_path / "a.log", tmp_path / "b.log"
        reader_sim.emit_log(reader_sim.generate_readings(sc), a)
        reader_sim.emit_log(reader_sim.generate_readings(sc), b)
        assert a.read_bytes() == b.read_bytes()

    def test_seed_changes_output(self, data_dir):
        sc = reader_sim.load_scenario(data_dir / "bike_walk_noisy.scenario")
        sc2 = SessionScenario(sc.scenario_id, sc.seed + 1, sc.segments, sc.tag_configs)
        va = [r.value for r in reader_sim.generate_readings(sc)]
        vb = [r.value for r in reader_sim.generate_readings(sc2)]
        assert va != vb

    def test_noiseless_values_match_analytic_curve(self):
        prog = ChannelProgram(baseline=33.0, settle_target=33.5, settle_tau_s=150.0)
        segs = (ScenarioSegment(0.0, 900.0, Activity.BIKE, {Channel.TEMPERATURE_C: prog}),)
        out = reader_sim.generate_readings(make_scenario(segments=segs))
        assert len(out) == 900
        for r in out:
            expect = 33.0 + 0.5 * (1.0 - math.exp(-r.timestamp_s / 150.0))
            assert r.value == pytest.approx(expect, abs=1e-12)
        assert out[-1].value == pytest.approx(33.5, abs=0.01)

    def test_onset_gating(self):
        prog = ChannelProgram(baseline=27.04, onset_s=100.0, settle_target=74.4, settle_tau_s=60.0)
        segs = (ScenarioSegment(0.0, 300.0, Activity.BIKE, {Channel.POTENTIAL_MV: prog}),)
        tags = (TagConfig("t1", Interface.UHF, (Channel.POTENTIAL_MV,)),)
        out = reader_sim.generate_readings(make_scenario(segments=segs, tags=tags))
        assert out and min(r.timestamp_s for r in out) >= 100.0

    def test_monotone_timestamps_and_spacing(self, data_dir):
        sc = reader_sim.load_scenario(data_dir / "bike_walk.scenario")
        out = reader_sim.generate_readings(sc)
        times = [r.timestamp_s for r in out]
        assert times == sorted(times)
        per_stream = {}
        for r in out:
            per_stream.setdefault((r.tag_id, r.channel), []).append(r.timestamp_s)
        for (tag_id, _), ts in per_stream.items():
            period = [t for t in sc.tag_configs if t.tag_id == tag_id][0].read_period_s
            for t0, t1 in zip(ts, ts[1:]):
                gap = t1 - t0
                assert gap > 0
                # onset gating may skip slots, but spacing stays on the grid
                assert abs(gap / period - round(gap / period)) < 1e-9

    def test_dropout_removes_reads_deterministically(self):
        tags = (TagConfig("t1", Interface.UHF, (Channel.TEMPERATURE_C,), dropout_prob=0.5),)
        sc = make_scenario(tags=tags)
        n1 = len(reader_sim.generate_readings(sc))
        n2 = len(reader_sim.generate_readings(sc))
        assert n1 == n2
        assert 0 < n1 < 60

    def test_rssi_only_on_uhf(self, data_dir):
        sc = reader_sim.load_scenario(data_dir / "bike_walk.scenario")
        for r in reader_sim.generate_readings(sc):
            if r.interface is Interface.UHF:
                assert r.rssi_dBm is not None
            else:
                assert r.rssi_dBm is None


class TestLogFiles:
    def test_empty_list_header_only(self, tmp_path):
        p = tmp_path / "x.log"
        reader_sim.emit_log([], p)
        assert p.read_text() == reader_sim.LOG_HEADER + "\n"
        assert reader_sim.read_log(p) == []

    def test_three_records_order_preserved(self, tmp_path):
        readings = [
            reader_sim.TagReading("t1", Interface.UHF, float(i), Channel.TEMPERATURE_C, 33.0 + i, -50.0)
            for i in range(3)
        ]
        p = tmp_path / "x.log"
        reader_sim.emit_log(readings, p)
        assert reader_sim.read_log(p) == readings

    def test_roundtrip_full_scenario(self, data_dir, tmp_path):
        sc = reader_sim.load_scenario(data_dir / "bike_walk_noisy.scenario")
        readings = reader_sim.generate_readings(sc)
        p = tmp_path / "x.log"
        reader_sim.emit_log(readings, p)
        assert reader_sim.read_log(p) == readings

    def test_bad_header_rejected(self, tmp_path):
        p = tmp_path / "x.log"
        p.write_text("nope\n")
        with pytest.raises(ValueError):
            reader_sim.read_log(p)
