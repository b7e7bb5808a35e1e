"""Text segmentation strategies producing speaker-homogeneous segments.

Three deterministic strategies share one interface: silence-gap
pre-segmentation, sentence-mark splitting (marks come from reference
punctuation or any external tagger's output file), and oracle splitting
at annotated speaker changes. Every strategy conserves the input word
sequence exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import TextSegment, TimedWord, to_ms
from .errors import FormatError, OrderingError, ParameterError

STRATEGY_KINDS = ("oracle", "sentence-marks", "silence-gap")


@dataclass(frozen=True)
class SegmentationStrategy:
    kind: str = "silence-gap"
    gap_threshold: float = 1.0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ParameterError(f"unknown strategy {self.kind!r}, expected {STRATEGY_KINDS}")
        if self.gap_threshold <= 0:
            raise ParameterError("gap_threshold must be positive")


def _check_order(words: list[TimedWord]) -> None:
    starts = [w.interval.start_ms for w in words]
    if any(b < a for a, b in zip(starts, starts[1:])):
        raise OrderingError("words must be time-ordered")


def _renumber(groups: list[list[TimedWord]]) -> list[TextSegment]:
    return [TextSegment(tuple(g), i) for i, g in enumerate(groups)]


def presegment(words: list[TimedWord], gap_threshold: float = 1.0) -> list[TextSegment]:
    """Split at silences strictly longer than ``gap_threshold`` seconds.

    A gap exactly equal to the threshold does not split. Empty input
    yields an empty list.
    """
    if gap_threshold <= 0:
        raise ParameterError("gap_threshold must be positive")
    if not words:
        return []
    _check_order(words)
    threshold_ms = to_ms(gap_threshold)
    groups: list[list[TimedWord]] = [[words[0]]]
    for prev, cur in zip(words, words[1:]):
        if cur.interval.start_ms - prev.interval.end_ms > threshold_ms:
            groups.append([cur])
        else:
            groups[-1].append(cur)
    return _renumber(groups)


def sentence_split(segment: TextSegment, marks: list[int]) -> list[TextSegment]:
    """Split a segment before each marked word position.

    ``marks`` are word indices within the segment (0 = first word; a mark
    at 0 is redundant and ignored). The concatenation of the output word
    sequences equals the input.
    """
    n = len(segment.words)
    for m in marks:
        if not 0 <= m < n:
            raise ParameterError(f"sentence mark {m} outside segment of {n} words")
    cuts = sorted({m for m in marks if m > 0})
    bounds = [0] + cuts + [n]
    groups = [list(segment.words[a:b]) for a, b in zip(bounds, bounds[1:])]
    return _renumber(groups)


def oracle_split(words: list[TimedWord]) -> list[TextSegment]:
    """Segments are maximal runs of identical reference speaker ids."""
    if not words:
        return []
    _check_order(words)
    if any(w.speaker is None for w in words):
        raise ParameterError("oracle segmentation requires speaker ids on every word")
    groups: list[list[TimedWord]] = [[words[0]]]
    for prev, cur in zip(words, words[1:]):
        if cur.speaker != prev.speaker:
            groups.append([cur])
        else:
            groups[-1].append(cur)
    return _renumber(groups)


def apply_strategy(
    words: list[TimedWord],
    strategy: SegmentationStrategy,
    sentence_marks: list[int] | None = None,
) -> list[TextSegment]:
    """Pre-segment at silences, then refine per the chosen strategy.

    ``sentence_marks`` are indices into ``words`` (first word of each
    sentence); required for the sentence-marks strategy. The returned
    segments are renumbered session-wide.
    """
    pre = presegment(words, strategy.gap_threshold)
    if strategy.kind == "silence-gap":
        return pre
    groups: list[list[TimedWord]] = []
    if strategy.kind == "oracle":
        for seg in pre:
            groups.extend(list(s.words) for s in oracle_split(list(seg.words)))
    else:
        if sentence_marks is None:
            raise ParameterError("sentence-marks strategy requires a mark list")
        mark_set = set(sentence_marks)
        offset = 0
        for seg in pre:
            local = [i - offset for i in range(offset, offset + len(seg.words)) if i in mark_set]
            groups.extend(list(s.words) for s in sentence_split(seg, local))
            offset += len(seg.words)
    return _renumber(groups)


# ---------------------------------------------------------------------------
# Sentence-mark files: `<session-id> <word-index>` per line, marking the
# first word of each sentence.


def parse_sentence_marks(lines) -> dict[str, list[int]]:
    marks: dict[str, list[int]] = {}
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise FormatError(f"sentence-mark line {lineno}: expected 2 fields")
        try:
            index = int(fields[1])
        except ValueError as exc:
            raise FormatError(f"sentence-mark line {lineno}: bad index {fields[1]!r}") from exc
        if index < 0:
            raise FormatError(f"sentence-mark line {lineno}: negative index")
        marks.setdefault(fields[0], []).append(index)
    return {sid: sorted(set(v)) for sid, v in marks.items()}


def read_sentence_marks(path) -> dict[str, list[int]]:
    with open(path, encoding="utf-8") as fh:
        return parse_sentence_marks(fh)


def write_sentence_marks(path, session_id: str, marks: list[int]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in marks:
            fh.write(f"{session_id} {m}\n")
