"""Diarization error rate scoring and aggregation.

Scoring follows the md-eval protocol: no-score collars around every
reference segment boundary, optional exclusion of regions where two or
more reference speakers overlap, and an optimal hypothesis-to-reference
speaker mapping that maximizes correctly attributed time. All interval
arithmetic is integer milliseconds, so the decomposition identity
der = missed + false_alarm + confusion holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import TimeInterval, to_ms
from .diarize import DiarizationHypothesis, PipelineConfig
from .errors import ParameterError, ScoringError

Records = list[tuple[TimeInterval, str]]


@dataclass(frozen=True)
class DerReport:
    """Error decomposition in milliseconds plus derived percentages."""

    scored_ms: int
    missed_ms: int
    false_alarm_ms: int
    confusion_ms: int
    mapping: dict[str, str] = field(default_factory=dict)

    def _pct(self, ms: int) -> float:
        if self.scored_ms == 0:
            return 0.0
        return 100.0 * ms / self.scored_ms

    @property
    def scored_time(self) -> float:
        return self.scored_ms / 1000.0

    @property
    def missed(self) -> float:
        return self._pct(self.missed_ms)

    @property
    def false_alarm(self) -> float:
        return self._pct(self.false_alarm_ms)

    @property
    def confusion(self) -> float:
        return self._pct(self.confusion_ms)

    @property
    def der(self) -> float:
        return self._pct(self.missed_ms + self.false_alarm_ms + self.confusion_ms)

    def summary(self) -> str:
        return (
            f"DER {self.der:.2f}% (miss {self.missed:.2f}%, fa {self.false_alarm:.2f}%, "
            f"conf {self.confusion:.2f}%, scored {self.scored_time:.2f}s)"
        )


def _as_records(hyp) -> Records:
    if isinstance(hyp, DiarizationHypothesis):
        return list(hyp.records)
    return list(hyp)


def _merge_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[tuple[int, int]] = []
    for s, e in sorted(spans):
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def _excluded_spans(reference: Records, collar_ms: int, ignore_overlap: bool):
    spans: list[tuple[int, int]] = []
    if collar_ms > 0:
        for interval, _ in reference:
            spans.append((interval.start_ms - collar_ms, interval.start_ms + collar_ms))
            spans.append((interval.end_ms - collar_ms, interval.end_ms + collar_ms))
    if ignore_overlap:
        events = []
        for interval, _ in reference:
            events.append((interval.start_ms, 1))
            events.append((interval.end_ms, -1))
        events.sort()
        depth = 0
        overlap_start = None
        for t, delta in events:
            depth += delta
            if depth >= 2 and overlap_start is None:
                overlap_start = t
            elif depth < 2 and overlap_start is not None:
                spans.append((overlap_start, t))
                overlap_start = None
    return _merge_spans(spans)


def score_der(
    reference,
    hypothesis,
    collar: float = 0.25,
    ignore_overlap: bool = True,
) -> DerReport:
    """Score one hypothesis against one reference.

    Both arguments are DiarizationHypothesis objects or plain
    (TimeInterval, label) record lists for the same session. Scored
    regions exclude +/-collar around every reference boundary and,
    when requested, regions where two or more reference speakers talk
    at once. The speaker mapping maximizes correctly attributed time
    over scored regions (assignment problem on the overlap matrix).
    """
    ref = _as_records(reference)
    hyp = _as_records(hypothesis)
    if not ref:
        raise ScoringError("empty reference")
    if collar < 0:
        raise ParameterError("collar must be non-negative")
    collar_ms = to_ms(collar)
    excluded = _excluded_spans(ref, collar_ms, ignore_overlap)

    ref_speakers = sorted({spk for _, spk in ref})
    hyp_labels = sorted({lab for _, lab in hyp})
    spans = list(_scored_spans(ref, hyp, ref_speakers, hyp_labels, excluded))

    overlap = np.zeros((len(ref_speakers), max(len(hyp_labels), 1)), dtype=np.int64)
    for span, ractive, hactive in spans:
        for r in ractive:
            for h in hactive:
                overlap[r, h] += span
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    mapping_pairs = {(int(r), int(c)) for r, c in zip(rows, cols) if c < len(hyp_labels)}
    mapping = {
        hyp_labels[c]: ref_speakers[r]
        for r, c in sorted(mapping_pairs, key=lambda rc: rc[1])
        if overlap[r, c] > 0
    }

    scored = missed = false_alarm = confusion = 0
    for span, ractive, hactive in spans:
        n_ref = len(ractive)
        n_hyp = len(hactive)
        correct = sum(1 for r in ractive for h in hactive if (r, h) in mapping_pairs)
        scored += n_ref * span
        missed += max(n_ref - n_hyp, 0) * span
        false_alarm += max(n_hyp - n_ref, 0) * span
        confusion += (min(n_ref, n_hyp) - correct) * span
    return DerReport(
        scored_ms=scored,
        missed_ms=missed,
        false_alarm_ms=false_alarm,
        confusion_ms=confusion,
        mapping=mapping,
    )


def _scored_spans(ref, hyp, ref_speakers, hyp_labels, excluded):
    """Event sweep yielding (span_ms, active ref ids, active hyp ids)."""
    ref_index = {s: i for i, s in enumerate(ref_speakers)}
    hyp_index = {s: i for i, s in enumerate(hyp_labels)}
    events: dict[int, list[tuple[int, int, int]]] = {}

    def add(t, stream, idx, delta):
        events.setdefault(t, []).append((stream, idx, delta))

    for interval, spk in ref:
        add(interval.start_ms, 0, ref_index[spk], 1)
        add(interval.end_ms, 0, ref_index[spk], -1)
    for interval, lab in hyp:
        add(interval.start_ms, 1, hyp_index[lab], 1)
        add(interval.end_ms, 1, hyp_index[lab], -1)
    points = set(events)
    for s, e in excluded:
        points.update((s, e))
    timeline = sorted(points)

    ref_counts = [0] * len(ref_speakers)
    hyp_counts = [0] * len(hyp_labels)
    exc_idx = 0
    out = []
    for a, b in zip(timeline, timeline[1:]):
        for stream, idx, delta in events.get(a, ()):
            if stream == 0:
                ref_counts[idx] += delta
            else:
                hyp_counts[idx] += delta
        while exc_idx < len(excluded) and excluded[exc_idx][1] <= a:
            exc_idx += 1
        if exc_idx < len(excluded) and excluded[exc_idx][0] <= a and b <= excluded[exc_idx][1]:
            continue
        ractive = tuple(i for i, c in enumerate(ref_counts) if c > 0)
        hactive = tuple(i for i, c in enumerate(hyp_counts) if c > 0)
        if ractive or hactive:
            out.append((b - a, ractive, hactive))
    return out


def pooled_report(reports: list[DerReport]) -> DerReport:
    """Aggregate sessions by pooling times, not by averaging rates."""
    if not reports:
        raise ParameterError("nothing to aggregate")
    return DerReport(
        scored_ms=sum(r.scored_ms for r in reports),
        missed_ms=sum(r.missed_ms for r in reports),
        false_alarm_ms=sum(r.false_alarm_ms for r in reports),
        confusion_ms=sum(r.confusion_ms for r in reports),
    )


def der_curve(sessions, percents, config: PipelineConfig | None = None):
    """Pooled DER of the profile pipeline at each selection percentage.

    ``sessions`` are SessionData objects carrying their reference
    records. Role scoring is computed once per session and reused across
    the sweep; only profile estimation and window classification are
    rerun per operating point.
    """
    from .diarize import (
        classify_windows,
        estimate_profiles,
        linguistic_state,
        top_confidence_threshold,
    )

    config = config or PipelineConfig()
    for p in percents:
        if not 0.0 < p <= 100.0:
            raise ParameterError(f"percentage {p} outside (0, 100]")

    from .core import make_role_labels

    prepared = []
    for session in sessions:
        if session.reference is None:
            raise ParameterError(f"session {session.session_id!r} carries no reference")
        segments, assignments, pooled = linguistic_state(session, config)
        eligible = [
            (a, vec)
            for seg, a, vec in zip(segments, assignments, pooled)
            if len(seg.words) >= config.min_segment_words
        ]
        labels = session.role_labels or make_role_labels(
            [f"role{i + 1}" for i in range(len(session.role_models))]
        )
        prepared.append((session, eligible, labels))

    curve = []
    for p in percents:
        reports = []
        for session, eligible, labels in prepared:
            threshold = top_confidence_threshold([a for a, _ in eligible], p)
            profiles = estimate_profiles(eligible, threshold, labels)
            hyp = classify_windows(session.windows, profiles, session.plda, session.session_id)
            reports.append(
                score_der(list(session.reference), hyp, config.collar)
            )
        curve.append((p, pooled_report(reports).der))
    return curve


def write_der_report(path, rows: list[tuple[str, DerReport]]) -> None:
    """Tab-separated per-session report with a pooled TOTAL line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("session\tder\tmissed\tfalse_alarm\tconfusion\tscored_s\n")
        for name, rep in rows:
            fh.write(
                f"{name}\t{rep.der:.4f}\t{rep.missed:.4f}\t{rep.false_alarm:.4f}"
                f"\t{rep.confusion:.4f}\t{rep.scored_time:.3f}\n"
            )
        total = pooled_report([rep for _, rep in rows])
        fh.write(
            f"TOTAL\t{total.der:.4f}\t{total.missed:.4f}\t{total.false_alarm:.4f}"
            f"\t{total.confusion:.4f}\t{total.scored_time:.3f}\n"
        )


def write_curve_csv(path, curve) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("top_percent,der\n")
        for p, value in curve:
            fh.write(f"{p:g},{value:.6f}\n")
