"""End-to-end diarization pipelines.

Three modes over one pre-segmentation: agglomerative clustering of the
window embeddings (audio-only baseline), labeling text segments with
their recognized role (language-only baseline), and the profile route:
recognize roles, keep the most confident segments, average their
embeddings into per-role speaker profiles, then classify every audio
window against the profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import embed, roles, segmenter
from .core import RoleLabel, TextSegment, TimeInterval, TimedWord
from .errors import (
    ConfigurationError,
    FormatError,
    ParameterError,
    ProfileEstimationError,
)
from .lm import NGramModel
from .plda import PairScorer, PldaModel
from .roles import RoleAssignment

MODES = ("audio-only", "language-only", "linguistically-aided")


@dataclass(frozen=True)
class SpeakerProfile:
    """One speaker's acoustic identity: the gated mean of segment embeddings."""

    role: RoleLabel
    vector: np.ndarray
    support_count: int

    def __post_init__(self):
        if self.support_count < 1:
            raise ParameterError("a profile needs at least one supporting segment")


@dataclass(frozen=True)
class DiarizationHypothesis:
    """Non-overlapping labeled time intervals for one session."""

    session_id: str
    records: tuple[tuple[TimeInterval, str], ...]
    note: str | None = None

    def __post_init__(self):
        ordered = sorted(self.records, key=lambda r: (r[0].start_ms, r[0].end_ms))
        for (a, _), (b, _) in zip(ordered, ordered[1:]):
            if b.start_ms < a.end_ms:
                raise ParameterError(
                    f"hypothesis records overlap at {b.start:.3f}s in {self.session_id!r}"
                )
        object.__setattr__(self, "records", tuple(ordered))

    @property
    def labels(self) -> list[str]:
        return sorted({lab for _, lab in self.records})

    def total_time(self) -> float:
        return sum(iv.duration for iv, _ in self.records)


def merge_contiguous(records):
    """Fuse touching records that carry the same label."""
    out: list[tuple[TimeInterval, str]] = []
    for interval, label in records:
        if out and out[-1][1] == label and out[-1][0].end_ms == interval.start_ms:
            out[-1] = (TimeInterval(out[-1][0].start_ms, interval.end_ms), label)
        else:
            out.append((interval, label))
    return out


def windows_to_records(windows, labels):
    """Resolve overlapped windows into disjoint records at midpoints.

    Where two consecutive windows overlap, the boundary between their
    labels is the midpoint of the overlap region.
    """
    if len(windows) != len(labels):
        raise ParameterError("one label per window required")
    if not windows:
        return []
    order = sorted(range(len(windows)), key=lambda i: (windows[i].interval.start_ms, i))
    records = []
    for pos, i in enumerate(order):
        start = windows[i].interval.start_ms
        end = windows[i].interval.end_ms
        if pos > 0:
            prev = windows[order[pos - 1]].interval
            if prev.end_ms > start:
                start = (start + prev.end_ms) // 2
        if pos + 1 < len(order):
            nxt = windows[order[pos + 1]].interval
            if end > nxt.start_ms:
                end = (nxt.start_ms + end) // 2
        records.append((TimeInterval(start, end), labels[i]))
    return merge_contiguous(records)


# ---------------------------------------------------------------------------
# Audio-only baseline: average-link agglomerative clustering.


def hac_merge_sequence(similarity: np.ndarray, num_clusters: int):
    """Greedy average-link merges on a similarity matrix.

    Returns (cluster member lists, merge log). At each step the pair of
    clusters with the highest average pairwise similarity is merged; ties
    go to the lexicographically smallest index pair (cluster ids are the
    smallest original member index). The merge log records the member
    tuples of the two merged clusters.
    """
    similarity = np.asarray(similarity, dtype=float)
    n = similarity.shape[0]
    if similarity.shape != (n, n):
        raise ParameterError("similarity matrix must be square")
    if not 1 <= num_clusters <= n:
        raise ParameterError(f"cannot form {num_clusters} clusters from {n} items")
    clusters: list[list[int] | None] = [[i] for i in range(n)]
    # pair_sums[i, j] = total similarity between members of clusters i and j
    pair_sums = similarity.copy()
    sizes = np.ones(n)
    alive = np.ones(n, dtype=bool)
    merges: list[tuple[tuple[int, ...], tuple[int, ...]]] = []
    for _ in range(n - num_clusters):
        avg = pair_sums / np.outer(sizes, sizes)
        avg[~alive, :] = -np.inf
        avg[:, ~alive] = -np.inf
        avg[np.tril_indices(n)] = -np.inf
        # np.argmax takes the first maximum in row-major order, i.e. the
        # lexicographically smallest (i, j) among ties.
        i, j = np.unravel_index(int(np.argmax(avg)), avg.shape)
        merges.append((tuple(clusters[i]), tuple(clusters[j])))
        pair_sums[i, :] += pair_sums[j, :]
        pair_sums[:, i] += pair_sums[:, j]
        sizes[i] += sizes[j]
        clusters[i] = clusters[i] + clusters[j]
        clusters[j] = None
        alive[j] = False
    return [c for c in clusters if c is not None], merges


def hac_cluster(
    windows: list[embed.AudioWindow], model: PldaModel, num_clusters: int, session_id: str = ""
) -> DiarizationHypothesis:
    """Cluster windows by PLDA similarity down to ``num_clusters`` groups."""
    if num_clusters < 1:
        raise ParameterError("need at least one cluster")
    if len(windows) < num_clusters:
        raise ParameterError(
            f"cannot form {num_clusters} clusters from {len(windows)} windows"
        )
    vectors = np.stack([w.embedding for w in windows])
    scorer = PairScorer(model)
    sims = scorer.score_matrix(vectors, vectors)
    sims = 0.5 * (sims + sims.T)  # exact symmetry for deterministic ties
    clusters, _ = hac_merge_sequence(sims, num_clusters)
    clusters = sorted(clusters, key=min)
    labels = [""] * len(windows)
    for c_idx, members in enumerate(clusters):
        for m in members:
            labels[m] = f"C{c_idx + 1}"
    return DiarizationHypothesis(
        session_id=session_id, records=tuple(windows_to_records(windows, labels))
    )


# ---------------------------------------------------------------------------
# Profile estimation and window classification.


def top_confidence_threshold(assignments: list[RoleAssignment], top_percent: float) -> float:
    """Threshold selecting the given percentage of most confident segments.

    Returns a value t such that confidence > t holds for exactly
    ceil(top_percent/100 * n) segments, plus any segments tied with the
    cut-off confidence. Applied per session.
    """
    if not assignments:
        raise ParameterError("no assignments to select from")
    if not 0.0 < top_percent <= 100.0:
        raise ParameterError("top_percent must lie in (0, 100]")
    confidences = sorted((a.confidence for a in assignments), reverse=True)
    keep = math.ceil(top_percent / 100.0 * len(confidences))
    cut = confidences[keep - 1]
    below = [c for c in confidences if c < cut]
    return below[0] if below else cut - 1.0


def estimate_profiles(
    assignment_embeddings: list[tuple[RoleAssignment, np.ndarray]],
    min_confidence: float,
    role_labels: list[RoleLabel],
) -> list[SpeakerProfile]:
    """Per-role mean of segment embeddings with confidence > min_confidence.

    A role whose segments all fall at or below the threshold falls back
    to the unweighted mean of all its segments; a role with no segments
    at all raises ProfileEstimationError (callers fall back to
    clustering).
    """
    profiles = []
    for role in role_labels:
        rows = [
            np.asarray(vec, dtype=float)
            for a, vec in assignment_embeddings
            if a.role.index == role.index
        ]
        if not rows:
            raise ProfileEstimationError(f"role {role.name!r} has no assigned segments")
        gated = [
            np.asarray(vec, dtype=float)
            for a, vec in assignment_embeddings
            if a.role.index == role.index and a.confidence > min_confidence
        ]
        chosen = gated if gated else rows
        profiles.append(
            SpeakerProfile(
                role=role,
                vector=np.stack(chosen).mean(axis=0),
                support_count=len(chosen),
            )
        )
    return profiles


def classify_windows(
    windows: list[embed.AudioWindow],
    profiles: list[SpeakerProfile],
    model: PldaModel,
    session_id: str = "",
) -> DiarizationHypothesis:
    """Label each window with the highest-scoring profile's role.

    Ties go to the lowest role index; overlapped window regions are split
    at midpoints.
    """
    if not profiles:
        raise ParameterError("need at least one profile")
    ordered = sorted(profiles, key=lambda p: p.role.index)
    vectors = np.stack([w.embedding for w in windows])
    ref = np.stack([p.vector for p in ordered])
    scores = PairScorer(model).score_matrix(vectors, ref)
    labels = []
    for row in scores:
        best = int(np.argmax(row))  # argmax returns the first (lowest) index on ties
        labels.append(ordered[best].role.name)
    return DiarizationHypothesis(
        session_id=session_id, records=tuple(windows_to_records(windows, labels))
    )


# ---------------------------------------------------------------------------
# Pipeline orchestration.


@dataclass(frozen=True)
class PipelineConfig:
    """Knobs shared by the pipelines; defaults follow the evaluation protocol."""

    mode: str = "linguistically-aided"
    window: float = 1.5
    overlap: float = 0.5
    gap_threshold: float = 1.0
    merge_gap: float = 0.2
    collar: float = 0.25
    top_percent: float = 100.0
    min_confidence: float | None = None
    plda_alpha: float = 0.5
    text_segmentation: str = "silence-gap"
    min_segment_words: int = 1
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.text_segmentation not in segmenter.STRATEGY_KINDS:
            raise ConfigurationError(
                f"unknown segmentation {self.text_segmentation!r}"
            )
        if not 0.0 < self.top_percent <= 100.0:
            raise ConfigurationError("top_percent must lie in (0, 100]")


@dataclass
class SessionData:
    """Everything the pipelines may need for one session."""

    session_id: str
    words: list[TimedWord] = field(default_factory=list)
    sentence_marks: list[int] | None = None
    windows: list[embed.AudioWindow] = field(default_factory=list)
    role_models: list[NGramModel] | None = None
    role_labels: list[RoleLabel] | None = None
    plda: PldaModel | None = None
    reference: tuple[tuple[TimeInterval, str], ...] | None = None


def text_segments(session: SessionData, config: PipelineConfig) -> list[TextSegment]:
    strategy = segmenter.SegmentationStrategy(
        kind=config.text_segmentation, gap_threshold=config.gap_threshold
    )
    return segmenter.apply_strategy(session.words, strategy, session.sentence_marks)


def linguistic_state(session: SessionData, config: PipelineConfig, pool_embeddings: bool = True):
    """Segments, role assignments and pooled segment embeddings.

    Shared by the language-only and profile pipelines; computing it once
    lets threshold sweeps reuse the expensive perplexity scoring. With
    ``pool_embeddings`` False the third element is None (language-only
    sessions need no audio windows).
    """
    if not session.words:
        raise ConfigurationError(f"session {session.session_id!r} has no transcript")
    if session.role_models is None:
        raise ConfigurationError(f"session {session.session_id!r} has no role models")
    segments = text_segments(session, config)
    assignments = roles.assign_roles(segments, session.role_models, session.role_labels)
    pooled = None
    if pool_embeddings:
        pooled = [embed.pooled_embedding(seg.interval, session.windows) for seg in segments]
    return segments, assignments, pooled


def run_pipeline(
    session: SessionData, config: PipelineConfig | None = None
) -> DiarizationHypothesis:
    """Dispatch one session through the configured pipeline mode."""
    config = config or PipelineConfig()
    n_roles = len(session.role_labels) if session.role_labels else 2

    if config.mode == "audio-only":
        if not session.windows or session.plda is None:
            raise ConfigurationError("audio-only mode needs windows and a PLDA model")
        return hac_cluster(session.windows, session.plda, n_roles, session.session_id)

    if config.mode == "language-only":
        segments, assignments, _ = linguistic_state(session, config, pool_embeddings=False)
        records = [(seg.interval, a.role.name) for seg, a in zip(segments, assignments)]
        return DiarizationHypothesis(session.session_id, tuple(records))

    # linguistically-aided
    if not session.windows or session.plda is None:
        raise ConfigurationError("linguistically-aided mode needs windows and a PLDA model")
    segments, assignments, pooled = linguistic_state(session, config)
    eligible = [
        (a, vec)
        for seg, a, vec in zip(segments, assignments, pooled)
        if len(seg.words) >= config.min_segment_words
    ]
    if config.min_confidence is not None:
        threshold = config.min_confidence
    else:
        threshold = top_confidence_threshold(
            [a for a, _ in eligible], config.top_percent
        ) if eligible else 0.0
    labels = session.role_labels or [
        RoleLabel(i + 1, f"role{i + 1}") for i in range(n_roles)
    ]
    try:
        profiles = estimate_profiles(eligible, threshold, labels)
    except ProfileEstimationError as exc:
        fallback = hac_cluster(session.windows, session.plda, n_roles, session.session_id)
        return replace(fallback, note=f"fallback=audio-only reason={exc}")
    return classify_windows(session.windows, profiles, session.plda, session.session_id)


# ---------------------------------------------------------------------------
# RTTM, bit-exact per line:
#   SPEAKER <session-id> 1 <tbeg> <tdur> <NA> <NA> <label> <NA> <NA>


def format_rttm(hypothesis: DiarizationHypothesis) -> str:
    lines = []
    for interval, label in hypothesis.records:
        lines.append(
            f"SPEAKER {hypothesis.session_id} 1 {interval.start:.3f} "
            f"{interval.duration:.3f} <NA> <NA> {label} <NA> <NA>"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def write_rttm(path, hypotheses) -> None:
    if isinstance(hypotheses, DiarizationHypothesis):
        hypotheses = [hypotheses]
    with open(path, "w", encoding="utf-8") as fh:
        for hyp in hypotheses:
            fh.write(format_rttm(hyp))


def parse_rttm(lines) -> dict[str, list[tuple[TimeInterval, str]]]:
    sessions: dict[str, list[tuple[TimeInterval, str]]] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith(("#", ";;")):
            continue
        fields = line.split()
        if len(fields) < 8 or fields[0] != "SPEAKER":
            raise FormatError(f"RTTM line {lineno}: expected a SPEAKER record")
        try:
            start = float(fields[3])
            dur = float(fields[4])
        except ValueError as exc:
            raise FormatError(f"RTTM line {lineno}: bad time fields") from exc
        sessions.setdefault(fields[1], []).append(
            (TimeInterval.from_seconds(start, start + dur), fields[7])
        )
    for records in sessions.values():
        records.sort(key=lambda r: (r[0].start_ms, r[0].end_ms))
    return sessions


def read_rttm(path) -> dict[str, list[tuple[TimeInterval, str]]]:
    with open(path, encoding="utf-8") as fh:
        return parse_rttm(fh)
