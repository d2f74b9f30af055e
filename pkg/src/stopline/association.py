"""Greedy ground-truth/prediction association and banded detection metrics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from stopline.sparse_lines import StopLine, line_pair_angle, line_pair_distance

DEFAULT_A_THRESH = 8.0
DEFAULT_N_INTERP = 10
BAND_EDGES = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)
_OVERLAP_EPS = 1e-12


@dataclass
class MatchResult:
    n_pos: int = 0
    n_neg: int = 0
    e_total: float = 0.0
    matches: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_pred: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    mae: float | None  # None when nothing matched


@dataclass(frozen=True)
class DistanceBand:
    index: int
    lower: float
    upper: float

    def contains(self, d: float) -> bool:
        return self.lower <= d < self.upper


BANDS = tuple(DistanceBand(i, lo, hi) for i, (lo, hi) in enumerate(zip(BAND_EDGES[:-1], BAND_EDGES[1:])))


def segments_overlap(l_a: StopLine, l_b: StopLine) -> bool:
    """True when ``l_b`` projected onto the direction of ``l_a`` overlaps ``l_a`` over a positive length."""
    u = l_a.direction
    a0 = np.array(l_a.p_start)
    tb = [float((np.array(p) - a0) @ u) for p in (l_b.p_start, l_b.p_end)]
    lo = max(0.0, min(tb))
    hi = min(l_a.length, max(tb))
    return hi - lo > _OVERLAP_EPS


def associate(L_p, L_g, a_thresh: float = DEFAULT_A_THRESH, n_interp: int = DEFAULT_N_INTERP) -> MatchResult:
    """Match each ground-truth line, in input order, to the closest compatible remaining prediction.

    A prediction is compatible when it overlaps the ground-truth line and
    their acute angle is below ``a_thresh`` degrees. Distances are the mean
    perpendicular distance of the ground-truth line's interpolation points to
    the prediction. Matched predictions leave the pool; leftovers are false alarms.
    """
    if not a_thresh > 0:
        raise ValueError("a_thresh must be positive")
    pool = list(range(len(L_p)))
    res = MatchResult()
    for gi, g in enumerate(L_g):
        d_min = math.inf
        idx = -1
        for pj in pool:
            p = L_p[pj]
            if not segments_overlap(g, p):
                continue
            if line_pair_angle(g, p) >= a_thresh:
                continue
            d = line_pair_distance(g, p, n_interp)
            if d < d_min:
                d_min, idx = d, pj
        if idx != -1:
            pool.remove(idx)
            res.n_pos += 1
            res.e_total += d_min
            res.matches.append((gi, idx, d_min))
    res.n_neg = len(pool)
    res.unmatched_pred = pool
    return res


def metrics_from_counts(n_pos: int, n_neg: int, n_gt: int, e_total: float = 0.0) -> Metrics:
    if n_gt < n_pos:
        raise ValueError(f"n_gt ({n_gt}) < n_pos ({n_pos})")
    precision = n_pos / (n_pos + n_neg) if n_pos + n_neg else 1.0
    recall = n_pos / n_gt if n_gt else 1.0
    f1 = f1_score(precision, recall)
    mae = e_total / n_pos if n_pos else None
    return Metrics(precision, recall, f1, mae)


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 2 * precision * recall / s if s else 0.0


def compute_metrics(m: MatchResult, n_gt: int) -> Metrics:
    return metrics_from_counts(m.n_pos, m.n_neg, n_gt, m.e_total)


def band_of(line: StopLine) -> DistanceBand | None:
    """Band of the line midpoint's distance to the ego origin; None at 50 m and beyond."""
    mid = line.midpoint
    d = math.hypot(mid.x, mid.y)
    for b in BANDS:
        if b.contains(d):
            return b
    return None


@dataclass
class BandTally:
    n_gt: int = 0
    n_pos: int = 0
    n_neg: int = 0
    e_total: float = 0.0

    def add(self, other: "BandTally") -> None:
        self.n_gt += other.n_gt
        self.n_pos += other.n_pos
        self.n_neg += other.n_neg
        self.e_total += other.e_total

    def metrics(self) -> Metrics:
        return metrics_from_counts(self.n_pos, self.n_neg, self.n_gt, self.e_total)


@dataclass
class BandedReport:
    bands: list[BandTally]
    overall: BandTally

    def rows(self) -> list[dict]:
        out = []
        for b, t in zip(BANDS, self.bands):
            out.append(_row(b.lower, b.upper, t))
        out.append(_row("all", "all", self.overall))
        return out


REPORT_COLUMNS = ("band_lower", "band_upper", "precision", "recall", "f1", "mae_m", "n_gt", "n_pos", "n_neg")


def _row(lower, upper, t: BandTally) -> dict:
    m = t.metrics()
    return {
        "band_lower": lower,
        "band_upper": upper,
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "mae_m": m.mae,
        "n_gt": t.n_gt,
        "n_pos": t.n_pos,
        "n_neg": t.n_neg,
    }


def frame_tallies(L_p, L_g, a_thresh=DEFAULT_A_THRESH, n_interp=DEFAULT_N_INTERP):
    """Per-band and overall tallies for one frame."""
    bands = [BandTally() for _ in BANDS]
    overall = BandTally(n_gt=len(L_g))
    m = associate(L_p, L_g, a_thresh, n_interp)
    for g in L_g:
        b = band_of(g)
        if b is not None:
            bands[b.index].n_gt += 1
    for gi, _, d in m.matches:
        b = band_of(L_g[gi])
        if b is not None:
            bands[b.index].n_pos += 1
            bands[b.index].e_total += d
    for pj in m.unmatched_pred:
        b = band_of(L_p[pj])
        if b is not None:
            bands[b.index].n_neg += 1
    overall.n_pos, overall.n_neg, overall.e_total = m.n_pos, m.n_neg, m.e_total
    return bands, overall


def banded_evaluation(frames, a_thresh: float = DEFAULT_A_THRESH, n_interp: int = DEFAULT_N_INTERP) -> BandedReport:
    """Aggregate association over ``(L_p, L_g)`` frames into per-band tallies.

    Ground truth and matches are bucketed by the ground-truth line's band,
    false alarms by the prediction's band.
    """
    total = [BandTally() for _ in BANDS]
    overall = BandTally()
    for L_p, L_g in frames:
        bands, ov = frame_tallies(L_p, L_g, a_thresh, n_interp)
        for acc, t in zip(total, bands):
            acc.add(t)
        overall.add(ov)
    return BandedReport(total, overall)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(round(v, 6) + 0.0)
    return str(v)


def report_to_csv(report: BandedReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for row in report.rows():
        w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def report_to_json(report: BandedReport) -> str:
    rows = []
    for row in report.rows():
        rows.append({k: (round(v, 6) + 0.0 if isinstance(v, float) else v) for k, v in row.items()})
    return json.dumps({"rows": rows}, indent=1) + "\n"
