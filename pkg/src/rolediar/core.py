"""Shared domain types, time arithmetic and word-alignment I/O.

Time is kept as integer milliseconds internally so that threshold
comparisons (silence gaps, merge gaps, scoring collars) are exact and
reproducible; seconds only appear at the file-format boundary.
All types here are immutable and safe to share across workers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import FormatError, OrderingError, ParameterError


def to_ms(seconds: float) -> int:
    """Convert seconds to the internal integer-millisecond representation."""
    return int(round(seconds * 1000.0))


def to_seconds(ms: int) -> float:
    return ms / 1000.0


@dataclass(frozen=True, order=True)
class TimeInterval:
    """Half-open time span [start_ms, end_ms) in integer milliseconds."""

    start_ms: int
    end_ms: int

    def __post_init__(self):
        if self.start_ms < 0:
            raise ParameterError(f"negative start time: {self.start_ms}")
        if self.end_ms < self.start_ms:
            raise ParameterError(
                f"interval ends before it starts: [{self.start_ms}, {self.end_ms}]"
            )

    @classmethod
    def from_seconds(cls, start: float, end: float) -> "TimeInterval":
        return cls(to_ms(start), to_ms(end))

    @property
    def start(self) -> float:
        return to_seconds(self.start_ms)

    @property
    def end(self) -> float:
        return to_seconds(self.end_ms)

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    @property
    def duration(self) -> float:
        return to_seconds(self.duration_ms)

    def overlap_ms(self, other: "TimeInterval") -> int:
        """Length of the intersection with ``other`` (0 if disjoint)."""
        return max(0, min(self.end_ms, other.end_ms) - max(self.start_ms, other.start_ms))

    def midpoint_ms(self) -> int:
        return (self.start_ms + self.end_ms) // 2


@dataclass(frozen=True)
class TimedWord:
    """One transcript token with its time alignment.

    ``speaker`` is the reference speaker id when known (oracle
    segmentation, synthetic data); ``confidence`` is an optional
    recognizer confidence. The token is expected to be normalized
    (lowercase, no punctuation) -- see :func:`normalize_token`.
    """

    token: str
    interval: TimeInterval
    speaker: str | None = None
    confidence: float | None = None


@dataclass(frozen=True)
class TextSegment:
    """A run of words treated as speaker-homogeneous by the pipeline."""

    words: tuple[TimedWord, ...]
    segment_id: int

    def __post_init__(self):
        if not self.words:
            raise ParameterError("a text segment needs at least one word")
        starts = [w.interval.start_ms for w in self.words]
        if any(b < a for a, b in zip(starts, starts[1:])):
            raise OrderingError(f"segment {self.segment_id}: words not time-ordered")

    @property
    def interval(self) -> TimeInterval:
        """Tight hull of the word intervals."""
        return TimeInterval(self.words[0].interval.start_ms, self.words[-1].interval.end_ms)

    @property
    def tokens(self) -> list[str]:
        return [w.token for w in self.words]


@dataclass(frozen=True)
class RoleLabel:
    """A conversational role, 1-based index plus a display name."""

    index: int
    name: str

    def __post_init__(self):
        if self.index < 1:
            raise ParameterError("role indices are 1-based")


def make_role_labels(names: list[str] | tuple[str, ...]) -> list[RoleLabel]:
    return [RoleLabel(i + 1, name) for i, name in enumerate(names)]


_STRIP_RE = re.compile(r"[^a-z0-9']+")
_APOSTROPHE_EDGE_RE = re.compile(r"^'+|'+$")


def normalize_token(raw: str) -> str:
    """Lowercase and strip punctuation, keeping intra-word apostrophes."""
    tok = _STRIP_RE.sub("", raw.lower())
    return _APOSTROPHE_EDGE_RE.sub("", tok)


def merge_adjacent(
    intervals: list[tuple[TimeInterval, str]], max_gap: float
) -> list[tuple[TimeInterval, str]]:
    """Coalesce consecutive same-speaker intervals separated by <= max_gap.

    ``intervals`` must be sorted by start time. Gaps are compared in
    integer milliseconds, so equality at the threshold is well defined
    (a gap exactly equal to ``max_gap`` is merged).
    """
    if max_gap < 0:
        raise ParameterError("max_gap must be non-negative")
    starts = [iv.start_ms for iv, _ in intervals]
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise OrderingError("intervals must be sorted by start time")
    max_gap_ms = to_ms(max_gap)
    merged: list[tuple[TimeInterval, str]] = []
    for interval, speaker in intervals:
        if merged:
            last_iv, last_spk = merged[-1]
            if speaker == last_spk and interval.start_ms - last_iv.end_ms <= max_gap_ms:
                merged[-1] = (
                    TimeInterval(last_iv.start_ms, max(last_iv.end_ms, interval.end_ms)),
                    speaker,
                )
                continue
        merged.append((interval, speaker))
    return merged


# ---------------------------------------------------------------------------
# CTM-style word alignments:
#   <session-id> <channel> <start-sec> <dur-sec> <token> [<speaker>] [<conf>]


def parse_ctm(lines, normalize: bool = True) -> dict[str, list[TimedWord]]:
    """Parse CTM lines into per-session word lists (file order preserved)."""
    sessions: dict[str, list[TimedWord]] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith(("#", ";;")):
            continue
        fields = line.split()
        if len(fields) < 5 or len(fields) > 7:
            raise FormatError(f"CTM line {lineno}: expected 5-7 fields, got {len(fields)}")
        session, _channel, start_s, dur_s, token = fields[:5]
        speaker = fields[5] if len(fields) >= 6 else None
        confidence = None
        if len(fields) == 7:
            try:
                confidence = float(fields[6])
            except ValueError as exc:
                raise FormatError(f"CTM line {lineno}: bad confidence {fields[6]!r}") from exc
        try:
            start = float(start_s)
            dur = float(dur_s)
        except ValueError as exc:
            raise FormatError(f"CTM line {lineno}: bad time fields") from exc
        if normalize:
            token = normalize_token(token)
            if not token:
                continue
        word = TimedWord(
            token=token,
            interval=TimeInterval.from_seconds(start, start + dur),
            speaker=speaker,
            confidence=confidence,
        )
        sessions.setdefault(session, []).append(word)
    return sessions


def read_ctm(path, normalize: bool = True) -> dict[str, list[TimedWord]]:
    with open(path, encoding="utf-8") as fh:
        return parse_ctm(fh, normalize=normalize)


def write_ctm(path, session_id: str, words: list[TimedWord], channel: str = "1") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in words:
            fields = [
                session_id,
                channel,
                f"{w.interval.start:.3f}",
                f"{w.interval.duration:.3f}",
                w.token,
            ]
            if w.speaker is not None or w.confidence is not None:
                fields.append(w.speaker if w.speaker is not None else "-")
            if w.confidence is not None:
                fields.append(f"{w.confidence:.4f}")
            fh.write(" ".join(fields) + "\n")
