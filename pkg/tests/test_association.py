import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import (
    REPORTED_SCORES,
    compatibility_costs,
    exhaustive_assignment,
    f1_percent,
    nearest_pairs_separated,
    random_association_instance,
)
from stopline.association import (
    BANDS,
    REPORT_COLUMNS,
    associate,
    band_of,
    banded_evaluation,
    compute_metrics,
    f1_score,
    metrics_from_counts,
    report_to_csv,
    report_to_json,
    segments_overlap,
)
from stopline.sparse_lines import StopLine


def _line(x0, y0, x1, y1):
    return StopLine.from_points((x0, y0), (x1, y1))


def _bar(y, x=0.0, half=1.75):
    return _line(x - half, y, x + half, y)


# --- overlap ------------------------------------------------------------------


def test_overlap_examples():
    a = _line(0, 0, 2, 0)
    assert segments_overlap(a, a)
    assert not segments_overlap(a, _line(3, 0, 5, 0))
    assert segments_overlap(a, _line(1, 0.2, 3, 0.2))
    assert not segments_overlap(a, _line(2, 0, 4, 0))  # touching at one point only


def test_overlap_is_measured_along_gt_direction():
    gt = _line(0, 0, 4, 0)
    assert not segments_overlap(gt, _line(2, -1, 2, 1))  # perpendicular: zero-length projection
    assert segments_overlap(gt, _line(1, -1, 3, 1))


# --- associate ----------------------------------------------------------------


def test_empty_prediction_pool():
    m = associate([], [_bar(5), _bar(10)])
    assert (m.n_pos, m.n_neg, m.e_total) == (0, 0, 0)


def test_identical_lists_match_exactly():
    gt = [_bar(5), _bar(15), _line(3, 20, 3, 23)]
    m = associate(list(gt), gt)
    assert (m.n_pos, m.n_neg, m.e_total) == (3, 0, 0)


def test_shift_plus_spurious():
    gt = [_bar(10)]
    preds = [_bar(10.1), _line(0, 8, 0, 12)]
    m = associate(preds, gt)
    assert (m.n_pos, m.n_neg) == (1, 1)
    assert m.e_total == pytest.approx(0.1)
    assert m.unmatched_pred == [1]


def test_greedy_follows_gt_order():
    # both GT lines prefer prediction 0; the first GT in input order gets it
    gt = [_bar(10.0), _bar(10.3)]
    preds = [_bar(10.2)]
    assert associate(preds, gt).matches[0][0] == 0
    assert associate(preds, gt[::-1]).matches[0][0] == 0


def test_angle_threshold_is_strict():
    gt = [_line(0, 0, 10, 0)]
    a = math.radians(8.0)
    pred = [_line(0, 0, 10 * math.cos(a), 10 * math.sin(a))]
    assert associate(pred, gt, a_thresh=8.0).n_pos == 0
    assert associate(pred, gt, a_thresh=8.01).n_pos == 1


def test_conservation_and_oracle_agreement_random():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(200):
        preds, gt = random_association_instance(rng)
        m = associate(preds, gt)
        assert m.n_pos + m.n_neg == len(preds)
        assert m.n_pos <= len(gt)
        assert sorted(m.unmatched_pred + [p for _, p, _ in m.matches]) == list(range(len(preds)))
        cost = compatibility_costs(preds, gt)
        if nearest_pairs_separated(cost):
            checked += 1
            assert {g: p for g, p, _ in m.matches} == exhaustive_assignment(cost)
    assert checked >= 50


def test_associate_is_deterministic():
    rng = np.random.default_rng(5)
    preds, gt = random_association_instance(rng)
    a, b = associate(preds, gt), associate(preds, gt)
    assert a.matches == b.matches and a.unmatched_pred == b.unmatched_pred


def test_bad_threshold():
    with pytest.raises(ValueError):
        associate([], [], a_thresh=0)


# --- metrics ------------------------------------------------------------------


def test_metrics_examples():
    assert f1_score(0.941, 0.794) == pytest.approx(0.861, abs=5e-4)
    m = metrics_from_counts(3, 1, 4)
    assert (m.precision, m.recall, m.f1) == (0.75, 0.75, 0.75)
    m = metrics_from_counts(0, 0, 0)
    assert (m.precision, m.recall, m.f1, m.mae) == (1.0, 1.0, 1.0, None)
    assert metrics_from_counts(2, 0, 2, 0.5).mae == 0.25
    with pytest.raises(ValueError):
        metrics_from_counts(3, 0, 2)


def test_compute_metrics_from_match():
    m = associate([_bar(10.1)], [_bar(10), _bar(20)])
    met = compute_metrics(m, 2)
    assert (met.precision, met.recall) == (1.0, 0.5)
    assert met.mae == pytest.approx(0.1)


@settings(max_examples=200)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f1_is_harmonic_mean(n_pos, n_neg, extra_gt):
    m = metrics_from_counts(n_pos, n_neg, n_pos + extra_gt)
    assert 0 <= m.f1 <= 1
    assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


def test_reported_scores_f1_arithmetic():
    """26 of the 30 printed triples are harmonic means; four printed F1 values are not."""
    off = {}
    for row, cells in REPORTED_SCORES.items():
        for band, (pr, rec, f1) in enumerate(cells):
            got = 100 * f1_score(pr / 100, rec / 100)
            assert got == pytest.approx(f1_percent(pr, rec))
            if abs(got - f1) > 0.25:
                off[(row, band)] = round(got - f1, 2)
    assert off == {("S+D", 4): -0.8, ("S+E+D", 4): -0.98, ("LI-only", 1): 0.44, ("LI-only", 2): 2.12}


# --- bands ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "mid,band",
    [((0, 5), 0), ((0, 10), 1), ((0, 49.99), 4), ((30, 40), None), ((-6, 8), 1)],
)
def test_band_of(mid, band):
    x, y = mid
    b = band_of(_line(x - 1, y, x + 1, y))
    assert (b.index if b else None) == band


def test_perfect_frame_bands():
    gt = [_bar(5), _bar(25)]
    rep = banded_evaluation([(list(gt), gt)])
    rows = rep.rows()
    for i, row in enumerate(rows[:5]):
        assert row["precision"] == row["recall"] == 1.0
        assert row["n_gt"] == (1 if i in (0, 2) else 0)
    assert rows[-1]["n_gt"] == 2


def test_recall_counting():
    frames = [([_bar(15.05)] if k < 7 else [], [_bar(15)]) for k in range(10)]
    row = banded_evaluation(frames).rows()[1]
    assert row["recall"] == pytest.approx(0.7) and row["precision"] == 1.0


def test_banded_matches_recount_oracle():
    rng = np.random.default_rng(99)
    frames = []
    for _ in range(40):
        preds, gt = random_association_instance(rng)
        shift = rng.uniform(0, 25)
        mv = lambda l: _line(l.p_start.x, l.p_start.y + shift, l.p_end.x, l.p_end.y + shift)  # noqa: E731
        frames.append(([mv(p) for p in preds], [mv(g) for g in gt]))
    rep = banded_evaluation(frames)

    def idx(line):
        d = math.dist((0, 0), line.midpoint)
        return int(d // 10) if d < 50 else None

    n_gt, n_pos, n_neg, err = (np.zeros(5) for _ in range(4))
    for preds, gt in frames:
        m = associate(preds, gt)
        for g in gt:
            if idx(g) is not None:
                n_gt[idx(g)] += 1
        for gi, _, d in m.matches:
            if idx(gt[gi]) is not None:
                n_pos[idx(gt[gi])] += 1
                err[idx(gt[gi])] += d
        for pj in m.unmatched_pred:
            if idx(preds[pj]) is not None:
                n_neg[idx(preds[pj])] += 1
    for b, t in zip(range(5), rep.bands):
        assert (t.n_gt, t.n_pos, t.n_neg) == (n_gt[b], n_pos[b], n_neg[b])
        assert t.e_total == pytest.approx(err[b])
    assert rep.overall.n_gt == sum(len(g) for _, g in frames)


def test_aggregation_is_order_independent():
    rng = np.random.default_rng(3)
    frames = [random_association_instance(rng) for _ in range(15)]
    a = banded_evaluation(frames).rows()
    b = banded_evaluation(frames[::-1]).rows()
    for ra, rb in zip(a, b):
        for k in REPORT_COLUMNS:
            assert ra[k] == pytest.approx(rb[k]) if ra[k] is not None else rb[k] is None


def test_report_serialization():
    rep = banded_evaluation([([_bar(5.1)], [_bar(5)])])
    lines = report_to_csv(rep).splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS)
    assert len(lines) == len(BANDS) + 2
    assert lines[2].split(",")[5] == ""  # empty band has no MAE
    assert lines[-1].startswith("all,all,1.0,1.0,1.0,0.1,")
    doc = json.loads(report_to_json(rep))
    assert [r["band_lower"] for r in doc["rows"]] == [0.0, 10.0, 20.0, 30.0, 40.0, "all"]
    assert doc["rows"][1]["mae_m"] is None
