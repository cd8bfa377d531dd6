import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import mann_whitney_auc
from rulebayes.bayes import Trace
from rulebayes.errors import EmptyTrace, LengthMismatch, NoPositives, SingleClass, SingleDraw
from rulebayes.metrics import (
    MetricsReport,
    classification_metrics,
    mae,
    mse,
    posterior_summary,
    roc_auc,
    waic,
)


def test_point_errors():
    assert mse([1.0, 2.0], [4.0, 5.0]) == 9.0
    assert mae([1.0, 2.0], [4.0, 5.0]) == 3.0
    with pytest.raises(LengthMismatch):
        mse([1.0], [1.0, 2.0])
    with pytest.raises(LengthMismatch):
        mae([], [])


def test_waic_hand_case():
    ll = np.log([[0.5], [0.25]])
    expected = -2.0 * (math.log(0.375) - math.log(2.0) ** 2 / 2.0)
    assert waic(ll) == pytest.approx(expected, abs=1e-12)


def test_waic_constant_draws():
    ll = np.tile([-1.0, -2.5, -0.3], (7, 1))
    assert waic(ll) == pytest.approx(2.0 * 3.8, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 8),
    st.integers(1, 6),
    st.floats(-50, 50),
    st.integers(0, 2**31),
)
def test_waic_translation(s, n, c, seed):
    ll = np.random.default_rng(seed).normal(-3, 1, (s, n))
    assert waic(ll + c) == pytest.approx(waic(ll) - 2.0 * n * c, abs=1e-12 * max(1.0, abs(waic(ll))))


def test_waic_needs_two_draws():
    with pytest.raises(SingleDraw):
        waic(np.zeros((1, 3)))


def test_classification_metrics():
    acc, sens = classification_metrics([0.9, 0.1, 0.8], [1, 1, 0])
    assert acc == pytest.approx(1 / 3) and sens == 0.5
    with pytest.raises(NoPositives):
        classification_metrics([0.2], [0])


def test_threshold_is_inclusive():
    assert classification_metrics([0.5], [1]) == (1.0, 1.0)


@pytest.mark.parametrize(
    "scores,labels,auc",
    [
        ([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], 1.0),
        ([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1], 0.5),
        ([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], 0.75),
    ],
)
def test_auc_examples(scores, labels, auc):
    assert roc_auc(scores, labels)[0] == auc


def test_auc_matches_rank_statistic():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 60))
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        scores = np.round(rng.random(n), int(rng.integers(1, 4)))  # coarse rounding forces ties
        assert roc_auc(scores, labels)[0] == pytest.approx(mann_whitney_auc(scores, labels), abs=1e-12)


def test_roc_curve_endpoints():
    _, pts = roc_auc([0.3, 0.7, 0.7, 0.1], [0, 1, 0, 1])
    np.testing.assert_array_equal(pts[0], [0.0, 0.0])
    np.testing.assert_array_equal(pts[-1], [1.0, 1.0])
    assert np.all(np.diff(pts, axis=0) >= 0)


def test_auc_single_class():
    with pytest.raises(SingleClass):
        roc_auc([0.1, 0.2], [1, 1])


def _trace(samples, lp):
    samples = np.asarray(samples, dtype=float)
    return Trace(("a", "b"), samples, np.asarray(lp, dtype=float), np.array([0.3] * samples.shape[0]))


def test_posterior_summary():
    s = _trace([[[1.0, 5.0], [3.0, 5.0]], [[2.0, 5.0], [6.0, 5.0]]], [[-1.0, -4.0], [0.5, -2.0]])
    out = posterior_summary(s)
    assert out["a"]["mean"] == 3.0
    assert out["a"]["sd"] == pytest.approx(np.std([1, 3, 2, 6], ddof=1))
    assert out["b"]["sd"] == 0.0
    assert out["a"]["map"] == 2.0


def test_posterior_summary_empty():
    with pytest.raises(EmptyTrace):
        posterior_summary(_trace(np.zeros((1, 0, 2)), np.zeros((1, 0))))


def test_report_round_trip():
    rep = MetricsReport(against="truth", meta={"seed": "0"})
    rep.add("none", {"mse": 0.1 + 0.2, "waic": -12.5})
    rep.add("prop,beta", {"mse": 1e-7})
    back = MetricsReport.loads(rep.dumps())
    assert back.values == rep.values and back.against == "truth" and back.meta == {"seed": "0"}
    assert "truth" in rep.table()


def test_report_rejects_nonfinite():
    with pytest.raises(ValueError):
        MetricsReport().add("m", {"mse": float("nan")})
