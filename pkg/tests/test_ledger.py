import json

import pytest
from hypothesis import given, settings, HealthCheck, strategies as st

from adaptive_dp.core import CompositionState, FilterConfig, PrivacySpend, compose
from adaptive_dp.filters import filter_admits, y_star
from adaptive_dp.ledger import (
    LedgerError,
    append_record,
    check,
    fold,
    ingest,
    read_records,
    spend_if_admitted,
    status,
    write_records,
)
from adaptive_dp.odometers import OdometerSpec

CFG = FilterConfig(1.0, 1e-6, 0.0)


def write(path, *lines):
    path.write_text("".join(line + "\n" for line in lines))
    return path


def test_ingest_two_records(tmp_path):
    p = write(tmp_path / "l.jsonl",
              '{"index":1,"kind":"dp","epsilon":0.1,"delta":0.0}',
              '{"index":2,"kind":"zcdp","epsilon":0.2,"delta":0.0}')
    s = ingest(p)
    assert s.v == pytest.approx(0.05) and s.delta_sum == 0 and s.n == 2


def test_empty_and_missing_files(tmp_path):
    assert ingest(write(tmp_path / "e.jsonl")) == CompositionState()
    assert ingest(tmp_path / "absent.jsonl") == CompositionState()


def test_blank_lines_and_unknown_fields(tmp_path):
    p = write(tmp_path / "l.jsonl", "", '{"index":1,"kind":"dp","epsilon":0.1,"note":"x"}', "   ")
    assert ingest(p).n == 1


@pytest.mark.parametrize("lines,needle", [
    (['{"index":1,"kind":"zcdp","epsilon":0.1,"delta":0.1}'], "record 1"),
    (['{"index":1,"kind":"dp","epsilon":0.1}', "{not json"], "line 2"),
    (['{"index":1,"kind":"dp","epsilon":0.1}', '{"index":1,"kind":"dp","epsilon":0.1}'], "does not increase"),
    (['{"index":2,"kind":"dp","epsilon":0.1}'], "index 1"),
    (['{"index":1,"kind":"DP","epsilon":0.1}'], "record 1"),
    (['{"index":1,"kind":"dp"}'], "epsilon"),
    (['{"index":1,"kind":"dp","epsilon":"0.1"}'], "number"),
    (['[1,2]'], "object"),
])
def test_parse_errors(tmp_path, lines, needle):
    p = write(tmp_path / "l.jsonl", *lines)
    with pytest.raises(LedgerError, match=needle):
        ingest(p)


def test_gaps_in_indices_allowed(tmp_path):
    p = write(tmp_path / "l.jsonl",
              '{"index":1,"kind":"dp","epsilon":0.1}', '{"index":5,"kind":"dp","epsilon":0.1}')
    assert ingest(p).n == 2


spends = st.lists(
    st.one_of(
        st.builds(PrivacySpend.dp, st.floats(0, 3), st.floats(0, 1e-2)),
        st.builds(PrivacySpend.zcdp, st.floats(0, 3)),
    ),
    max_size=25,
)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(spends)
def test_round_trip_is_bit_exact(tmp_path, history):
    p = tmp_path / "rt.jsonl"
    write_records(p, history)
    assert ingest(p) == compose(history)


def test_append_assigns_next_index(tmp_path):
    p = tmp_path / "l.jsonl"
    r1 = append_record(p, PrivacySpend.dp(0.1), "2026-01-01T00:00:00Z")
    r2 = append_record(p, PrivacySpend.zcdp(0.2))
    assert (r1.index, r2.index) == (1, 2)
    rows = [json.loads(x) for x in p.read_text().splitlines()]
    assert rows[0]["timestamp"] == "2026-01-01T00:00:00Z" and "timestamp" not in rows[1]


def test_spend_if_admitted(tmp_path):
    p = tmp_path / "l.jsonl"
    write_records(p, [PrivacySpend.dp(0.1), PrivacySpend.dp(0.1)])
    d, rec = spend_if_admitted(p, PrivacySpend.dp(0.1), CFG)
    assert d.admitted and rec.index == 3
    d, rec = spend_if_admitted(p, PrivacySpend.dp(0.1), CFG)
    assert not d.admitted and rec is None
    assert len(read_records(p)) == 3


def test_status_fresh_ledger():
    st_ = status([], CFG)
    assert st_.filter_remaining_v == pytest.approx(0.0349378095382, rel=1e-10)
    assert st_.n == 0


def test_status_at_y_star(tmp_path):
    p = tmp_path / "l.jsonl"
    write_records(p, [PrivacySpend.dp(y_star(1.0, 1e-6) ** 0.5)])
    assert status(read_records(p), CFG).filter_remaining_v == 0.0


def test_status_trivializes_after_delta_stop(tmp_path):
    p = tmp_path / "l.jsonl"
    cfg = FilterConfig(1.0, 1e-6, 0.002)
    write_records(p, [PrivacySpend.dp(0.1, 0.001)] * 3)
    specs = [OdometerSpec.mixture(0.01, 1e-6, 0.002), OdometerSpec.filter(8.0, 1e-6, 0.002)]
    out = status(read_records(p), cfg, specs)
    assert all(o.trivialized for o in out.odometer_values.values())
    assert out.filter_remaining_v == 0.0
    short = status(read_records(p)[:2], cfg, specs)
    assert not any(o.trivialized for o in short.odometer_values.values())


@given(st.floats(0, 0.04), st.floats(0, 0.3))
def test_check_agrees_with_status(v, eps):
    state = CompositionState(v, 0.0, 1)
    remaining = max(0.0, y_star(1.0, 1e-6) - v)
    admitted = check(state, PrivacySpend.dp(eps), CFG).admitted
    if abs(eps * eps - remaining) > 1e-9:
        assert admitted == (eps * eps <= remaining)


def test_fold_matches_filter_admits(tmp_path):
    p = tmp_path / "l.jsonl"
    write_records(p, [PrivacySpend.dp(0.1)] * 3)
    assert not filter_admits(fold(read_records(p)), PrivacySpend.dp(0.1), CFG).admitted
