import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from acoustext.arbiter import ArbitrationResult
from acoustext.errors import UndefinedMetricError
from acoustext.metrics import (
    evaluate, error_rate, mean_early_margin_ms, percent_saved, percent_utt_early, rerr)


def res(uid, lang, t, early, dur):
    return ArbitrationResult(uid, lang, t, early, dur, [], {})


def test_rerr_examples():
    assert rerr(0.10, 0.05) == pytest.approx(50.0)
    assert rerr(0.10, 0.12) == pytest.approx(-20.0)
    with pytest.raises(UndefinedMetricError):
        rerr(0.0, 0.1)


def test_error_rate():
    results = [res("a", "en", 1, True, 2), res("b", "es", 1, True, 2), res("c", "en", 1, True, 2)]
    gold = {"a": "en", "b": "en", "c": "es"}
    assert error_rate(results, gold, "en") == 0.5
    assert error_rate(results, gold, "es") == 1.0
    with pytest.raises(UndefinedMetricError):
        error_rate(results, gold, "fr")


def test_percent_saved_examples():
    one = [res("a", "en", 2000, True, 5000)]
    assert percent_saved(one) == 60.0
    two = one + [res("b", "en", 5000, False, 5000)]
    assert percent_saved(two) == 30.0
    assert percent_saved(two, denominator_mode="early_audio") == 60.0
    with pytest.raises(UndefinedMetricError):
        percent_saved([res("b", "en", 5000, False, 5000)], denominator_mode="early_audio")
    with pytest.raises(ValueError):
        percent_saved(one, denominator_mode="bogus")


def test_percent_utt_and_margin():
    rs = [res("a", "en", 2000, True, 5000), res("b", "en", 5000, False, 5000),
          res("c", "en", 3000, True, 4000)]
    assert percent_utt_early(rs) == pytest.approx(200 / 3)
    assert mean_early_margin_ms(rs) == 2000
    with pytest.raises(UndefinedMetricError):
        mean_early_margin_ms(rs[1:2])


@given(st.lists(st.tuples(st.integers(1, 20000), st.floats(0, 1), st.booleans()),
                min_size=1, max_size=30))
def test_saved_bounds_and_denominators(items):
    rs = [res(str(i), "en", int(d * f) if e else d, e, d) for i, (d, f, e) in enumerate(items)]
    all_pct = percent_saved(rs)
    assert 0.0 <= all_pct <= 100.0
    if any(r.early for r in rs):
        assert percent_saved(rs, denominator_mode="early_audio") >= all_pct - 1e-12
    else:
        assert all_pct == 0.0


def test_evaluate_report_and_never_serialization():
    rs = [res("a", "en", 2000, True, 5000), res("b", "es", 5000, False, 5000)]
    rep = evaluate(rs, {"a": "en", "b": "en"}, ["en", "es"], mode="acoustext",
                   threshold=math.inf, interval_ms=600, baseline_error={"en": 1.0, "es": 0.5})
    assert rep.error_rate == {"en": 0.5, "es": None}
    assert rep.rerr == {"en": 50.0, "es": None}
    assert rep.to_json()["threshold"] == "never"
    assert rep.percent_saved == 30.0 and rep.n_early == 1 and rep.accuracy == 0.5
    assert "theta=never" in rep.to_text()
