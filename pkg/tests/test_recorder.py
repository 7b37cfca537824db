from __future__ import annotations

import io
import random

import pytest
from hypothesis import given, settings, strategies as st

from trolleysim.model import Side, WrongPhaseError
from trolleysim.recorder import (
    ActionTrace,
    DecisionRecord,
    Outcome,
    RecordSink,
    TraceBundle,
    UnknownTestNumError,
    aggregate_stats,
    load_traces,
    make_decision_record,
    read_records,
    save_traces,
    write_records,
)
from trolleysim.sim import Control, EpisodePhase, SimParams, init_values

from conftest import basic_scenario, ped


def sample_record(**overrides):
    fields = dict(
        session_id="sess-1",
        test_num=0,
        outcome=Outcome.group(1),
        group_member_names="p1:30:female:pregnant",
        impact_speed=12.5,
        tick=240,
        subject_role="human",
        scenario_name="two vs one",
    )
    fields.update(overrides)
    return DecisionRecord(**fields)


names_st = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Nd"), max_codepoint=0x7F),
    min_size=1,
    max_size=12,
)

records_st = st.builds(
    DecisionRecord,
    session_id=names_st,
    test_num=st.integers(0, 999),
    outcome=st.one_of(
        st.builds(Outcome.group, st.integers(0, 9)), st.just(Outcome.timeout())
    ),
    group_member_names=st.just("a:1:male:"),
    impact_speed=st.floats(0, 1000).map(lambda x: round(x, 6)),
    tick=st.integers(0, 1800),
    subject_role=st.sampled_from(("human", "agent")),
    scenario_name=names_st,
).map(
    lambda r: r
    if r.outcome.kind == "group"
    else DecisionRecord(
        r.session_id,
        r.test_num,
        r.outcome,
        "",
        r.impact_speed,
        r.tick,
        r.subject_role,
        r.scenario_name,
    )
)


class TestLineFormat:
    def test_six_decimal_rendering(self):
        assert sample_record(impact_speed=10.05).to_line().split("\t")[4] == "10.050000"

    def test_golden_line(self):
        assert sample_record().to_line() == (
            "sess-1\t0\tgroup:1\tp1:30:female:pregnant\t12.500000\t240\thuman\ttwo vs one"
        )

    def test_timeout_has_empty_names_field(self):
        line = sample_record(outcome=Outcome.timeout(), group_member_names="").to_line()
        assert "\ttimeout\t\t" in line

    def test_identical_lists_serialize_identically(self):
        records = [sample_record(test_num=i) for i in range(5)]
        a, b = io.StringIO(), io.StringIO()
        write_records(records, a)
        write_records(records, b)
        assert a.getvalue() == b.getvalue()


class TestWriteRead:
    def test_three_records_three_lines(self, tmp_path):
        path = tmp_path / "log.tsv"
        records = [sample_record(test_num=i) for i in range(3)]
        assert write_records(records, path) == 3
        assert path.read_text().count("\n") == 3
        back, errors = read_records(path)
        assert errors == [] and back == records

    def test_append_semantics(self, tmp_path):
        path = tmp_path / "log.tsv"
        write_records([sample_record(test_num=0)], path)
        write_records([sample_record(test_num=1)], path)
        back, _ = read_records(path)
        assert [r.test_num for r in back] == [0, 1]

    def test_unwritable_path_raises_io_error(self, tmp_path):
        from trolleysim.recorder import RecordWriteError

        with pytest.raises(RecordWriteError):
            write_records([sample_record()], tmp_path)  # a directory, not a file

    def test_malformed_line_reported_others_kept(self):
        good = sample_record()
        text = good.to_line() + "\n" + "only\tfive\tfields\there\tnow\n" + good.to_line() + "\n"
        back, errors = read_records(io.StringIO(text))
        assert len(back) == 2
        assert [e.line for e in errors] == [2]

    def test_empty_source(self):
        assert read_records(io.StringIO("")) == ([], [])

    @given(st.lists(records_st, max_size=20))
    @settings(max_examples=100, deadline=None)
    def test_round_trip_identity(self, records):
        buf = io.StringIO()
        write_records(records, buf)
        back, errors = read_records(io.StringIO(buf.getvalue()))
        assert errors == []
        assert back == records


class TestMakeDecisionRecord:
    def run_to_collision(self):
        s = basic_scenario(
            actors=(ped("p1", 1, 0.0, 3.0, traits=("pregnant",)),), groups={1: Side.LEFT}
        )
        ep = init_values(s, SimParams())
        while ep.phase is EpisodePhase.RUNNING:
            ep.run_tick(Control.NONE)
        return ep

    def test_group_outcome_fields(self):
        ep = self.run_to_collision()
        record = make_decision_record(ep, session_id="s", subject_role="agent")
        assert record.outcome == Outcome.group(1)
        assert record.group_member_names == "p1:30:female:pregnant"
        assert record.impact_speed == round(ep.vehicle.speed, 6)
        assert record.tick == ep.tick

    def test_timeout_outcome_empty_names(self):
        from conftest import open_scenario

        ep = init_values(open_scenario(), SimParams(t_max_ticks=10))
        while ep.phase is EpisodePhase.RUNNING:
            ep.run_tick(Control.NONE)
        record = make_decision_record(ep, session_id="s", subject_role="agent")
        assert record.outcome == Outcome.timeout()
        assert record.group_member_names == ""

    def test_running_phase_rejected(self):
        ep = init_values(basic_scenario(), SimParams())
        with pytest.raises(WrongPhaseError):
            make_decision_record(ep, session_id="s", subject_role="agent")


class TestAggregateStats:
    def scenario_two_vs_one(self):
        # group 1 has two members, group 2 has one
        return basic_scenario(
            actors=(
                ped("a", 1, -2.0, 40.0, traits=("pregnant",)),
                ped("b", 1, -3.0, 40.0),
                ped("c", 2, 2.0, 40.0, traits=("disabled",)),
            ),
        )

    def test_hand_counted_rate(self):
        s = self.scenario_two_vs_one()
        records = [
            sample_record(outcome=Outcome.group(2), group_member_names="c:30:female:disabled"),
            sample_record(outcome=Outcome.group(2), group_member_names="c:30:female:disabled"),
            sample_record(outcome=Outcome.group(1), group_member_names="a:...|b:..."),
        ]
        stats = aggregate_stats(records, [s])
        assert stats.total == 3
        assert stats.by_outcome == {"group:2": 2, "group:1": 1}
        assert stats.spared_larger_group_rate == pytest.approx(2 / 3)
        assert stats.by_trait == {"disabled": 2, "pregnant": 1}

    def test_empty_records(self):
        stats = aggregate_stats([], [self.scenario_two_vs_one()])
        assert stats.total == 0
        assert stats.spared_larger_group_rate is None

    def test_unknown_test_num(self):
        with pytest.raises(UnknownTestNumError):
            aggregate_stats([sample_record(test_num=99)], [self.scenario_two_vs_one()])

    def test_equal_sizes_do_not_enter_denominator(self):
        stats = aggregate_stats([sample_record(outcome=Outcome.group(1))], [basic_scenario()])
        assert stats.spared_larger_group_rate is None

    def test_permutation_invariant(self):
        s = self.scenario_two_vs_one()
        records = [
            sample_record(outcome=Outcome.group(2)),
            sample_record(outcome=Outcome.timeout(), group_member_names=""),
            sample_record(outcome=Outcome.group(1)),
        ]
        rng = random.Random(4)
        base = aggregate_stats(records, [s])
        for _ in range(5):
            rng.shuffle(records)
            assert aggregate_stats(records, [s]) == base


class TestTraces:
    def test_run_length_encoding(self):
        trace = ActionTrace.from_controls("s", 0, ["NONE", "NONE", "RIGHT", "NONE"])
        assert trace.controls == (("NONE", 2), ("RIGHT", 1), ("NONE", 1))
        assert trace.expand() == ["NONE", "NONE", "RIGHT", "NONE"]
        assert trace.tick_count == 4

    def test_bundle_round_trip(self, tmp_path):
        bundle = TraceBundle(
            session_id="s1",
            file_sha256="ab" * 32,
            mode={"kind": "all", "test_num": None},
            params={"dt": 1 / 60},
            subject_role="agent",
            traces=(
                ActionTrace("s1", 0, (("NONE", 3), ("LEFT", 2))),
                ActionTrace("s1", 1, (("RIGHT", 5),)),
            ),
        )
        path = tmp_path / "trace.ndjson"
        save_traces(path, bundle)
        assert load_traces(path) == bundle


class TestRecordSink:
    def test_sink_appends_lines(self, tmp_path):
        path = tmp_path / "log.tsv"
        with RecordSink(path) as sink:
            sink.write(sample_record(test_num=0))
            sink.write(sample_record(test_num=1))
        back, _ = read_records(path)
        assert [r.test_num for r in back] == [0, 1]

    def test_sink_over_stream(self):
        buf = io.StringIO()
        sink = RecordSink(buf)
        sink.write(sample_record())
        assert buf.getvalue() == sample_record().to_line() + "\n"
