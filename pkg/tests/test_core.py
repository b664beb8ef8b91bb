import math

import pytest
from hypothesis import given, strategies as st

from adaptive_dp.core import (
    CompositionState,
    EpsDelta,
    FilterConfig,
    PrivacyError,
    PrivacySpend,
    SpendKind,
    append_spend,
    compose,
    validate_spend,
)


def test_append_single_dp_spend():
    s = append_spend(CompositionState(), PrivacySpend.dp(0.1))
    assert s.v == pytest.approx(0.01, abs=1e-15)
    assert s.delta_sum == 0.0 and s.n == 1


def test_append_zcdp_onto_existing_state():
    s = append_spend(CompositionState(0.01, 0.001, 1), PrivacySpend.zcdp(0.2))
    assert s.v == pytest.approx(0.05)
    assert s.delta_sum == 0.001 and s.n == 2


def test_zcdp_with_delta_rejected():
    with pytest.raises(PrivacyError):
        append_spend(CompositionState(), PrivacySpend(SpendKind.ZCDP, 0.1, 0.5))


@pytest.mark.parametrize("eps,delta,ok", [(0.0, 0.0, True), (-1.0, 0.0, False), (0.5, 1.5, False),
                                          (math.inf, 0.0, False), (math.nan, 0.0, False), (1.0, 1.0, True)])
def test_validate_spend(eps, delta, ok):
    spend = PrivacySpend.dp(eps, delta)
    if ok:
        assert validate_spend(spend) is spend
    else:
        with pytest.raises(PrivacyError):
            validate_spend(spend)


def test_unknown_kind_rejected():
    with pytest.raises(PrivacyError):
        validate_spend(PrivacySpend("renyi", 0.1, 0.0))


def test_zero_spend_is_noop_except_count():
    base = CompositionState(0.3, 1e-4, 7)
    out = append_spend(base, PrivacySpend.dp(0.0, 0.0))
    assert (out.v, out.delta_sum, out.n) == (0.3, 1e-4, 8)


def test_mixed_sequence():
    s = compose([PrivacySpend.dp(0.1, 1e-8), PrivacySpend.zcdp(0.1)])
    assert s.v == pytest.approx(0.02)
    assert s.delta_sum == 1e-8


spend_st = st.builds(
    PrivacySpend.dp,
    st.floats(0, 2, allow_nan=False),
    st.floats(0, 1e-3, allow_nan=False),
)


@given(st.lists(spend_st, max_size=30), st.integers(0, 30))
def test_fold_any_grouping(spends, cut):
    cut = min(cut, len(spends))
    whole = compose(spends)
    split = compose(spends[cut:], compose(spends[:cut]))
    assert whole == split
    assert whole.n == len(spends)
    assert whole.v == pytest.approx(math.fsum(s.epsilon**2 for s in spends), rel=1e-12, abs=1e-15)
    assert whole.delta_sum == pytest.approx(math.fsum(s.delta for s in spends), rel=1e-12, abs=1e-18)


def test_filter_config_validation():
    FilterConfig(1.0, 1e-6)
    for bad in [(0.0, 1e-6), (1.0, 0.0), (1.0, 1.0), (1.0, 1e-6, -0.1), (1.0, 1e-6, 1.5)]:
        with pytest.raises(PrivacyError):
            FilterConfig(*bad)
    assert FilterConfig(1.0, 1e-6, 1e-5).total_delta == pytest.approx(1.1e-5)


def test_epsdelta_validation():
    assert EpsDelta(0.0, 0.0).epsilon == 0.0
    with pytest.raises(PrivacyError):
        EpsDelta(-0.1, 0.0)
