"""Audio windowing, embedding ingestion and the normalization chain.

Embeddings arrive as data (this toolkit never touches waveforms); the
operations here cut uniform overlapped windows out of pre-segments,
apply projection / mean / length normalization, and read or write the
plain-text embedding files shared with the rest of the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import TextSegment, TimeInterval, to_ms
from .errors import DegenerateInputError, FormatError, ParameterError

MIN_PARTIAL_WINDOW_MS = 500


@dataclass(frozen=True)
class AudioWindow:
    window_id: str
    interval: TimeInterval
    embedding: np.ndarray


def uniform_windows(
    interval: TimeInterval, win: float = 1.5, overlap_fraction: float = 0.5
) -> list[TimeInterval]:
    """Uniform overlapped windows covering the interval exactly.

    Windows start every win*(1-overlap_fraction) seconds. A trailing
    partial window is kept if it is at least 0.5 s long, otherwise the
    previous window is extended to the interval end. Intervals shorter
    than one window yield a single window equal to the interval.
    """
    if win <= 0:
        raise ParameterError("window length must be positive")
    if not 0.0 <= overlap_fraction < 1.0:
        raise ParameterError("overlap fraction must lie in [0, 1)")
    win_ms = to_ms(win)
    stride_ms = max(1, int(round(win_ms * (1.0 - overlap_fraction))))
    if interval.duration_ms <= win_ms:
        return [interval]
    windows: list[TimeInterval] = []
    start = interval.start_ms
    while start + win_ms <= interval.end_ms:
        windows.append(TimeInterval(start, start + win_ms))
        start += stride_ms
    if windows[-1].end_ms < interval.end_ms:
        tail = TimeInterval(start, interval.end_ms)
        if tail.duration_ms >= MIN_PARTIAL_WINDOW_MS:
            windows.append(tail)
        else:
            windows[-1] = TimeInterval(windows[-1].start_ms, interval.end_ms)
    return windows


def segment_windows(
    segments: list[TextSegment] | list[TimeInterval],
    win: float = 1.5,
    overlap_fraction: float = 0.5,
    id_prefix: str = "w",
) -> list[TimeInterval]:
    """Window intervals per pre-segment, in time order (no embeddings yet)."""
    intervals = [s.interval if isinstance(s, TextSegment) else s for s in segments]
    out: list[TimeInterval] = []
    for iv in intervals:
        out.extend(uniform_windows(iv, win, overlap_fraction))
    return out


@dataclass(frozen=True)
class NormalizationChain:
    """Projection, mean subtraction and optional length normalization."""

    projection: np.ndarray  # D_in x D_out
    global_mean: np.ndarray  # D_in
    apply_length_norm: bool = True

    def __post_init__(self):
        proj = np.asarray(self.projection, dtype=float)
        mean = np.asarray(self.global_mean, dtype=float)
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "global_mean", mean)
        if proj.ndim != 2:
            raise ParameterError("projection must be a matrix")
        if not np.all(np.isfinite(proj)):
            raise ParameterError("projection must be finite")
        if proj.shape[1] > proj.shape[0]:
            raise ParameterError("projection cannot increase dimensionality")
        if mean.shape != (proj.shape[0],):
            raise ParameterError("mean dimension must match projection input")

    @classmethod
    def identity(cls, dim: int, apply_length_norm: bool = True) -> "NormalizationChain":
        return cls(np.eye(dim), np.zeros(dim), apply_length_norm)


def normalize(embedding: np.ndarray, chain: NormalizationChain) -> np.ndarray:
    """Apply projection^T (x - mean), then unit length normalization."""
    x = np.asarray(embedding, dtype=float)
    if x.shape != (chain.projection.shape[0],):
        raise ParameterError(
            f"embedding dimension {x.shape} does not match chain input "
            f"{chain.projection.shape[0]}"
        )
    y = chain.projection.T @ (x - chain.global_mean)
    if chain.apply_length_norm:
        norm = np.linalg.norm(y)
        if norm == 0.0:
            raise DegenerateInputError("zero vector after projection")
        y = y / norm
    return y


def estimate_lda(
    embeddings: np.ndarray, labels, out_dim: int, apply_length_norm: bool = True
) -> NormalizationChain:
    """LDA projection from labeled embeddings.

    Solves the generalized eigenproblem on the between/within scatter
    matrices and keeps the ``out_dim`` leading directions. The within
    scatter is lightly regularized so the decomposition is well posed.
    """
    x = np.asarray(embeddings, dtype=float)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise ParameterError("need one label per embedding row")
    d = x.shape[1]
    if not 1 <= out_dim <= d:
        raise ParameterError(f"out_dim must lie in [1, {d}]")
    mean = x.mean(axis=0)
    sw = np.zeros((d, d))
    sb = np.zeros((d, d))
    for lab in np.unique(labels):
        rows = x[labels == lab]
        mu = rows.mean(axis=0)
        centered = rows - mu
        sw += centered.T @ centered
        diff = (mu - mean)[:, None]
        sb += rows.shape[0] * (diff @ diff.T)
    sw += np.eye(d) * (1e-8 * (np.trace(sw) / d + 1.0))
    eigvals, eigvecs = scipy.linalg.eigh(sb, sw)
    order = np.argsort(eigvals)[::-1][:out_dim]
    return NormalizationChain(eigvecs[:, order], mean, apply_length_norm)


# ---------------------------------------------------------------------------
# Embedding files:
#   <session-id> <window-id> <start-sec> <dur-sec> <v1> <v2> ...


def parse_embeddings(lines) -> dict[str, list[AudioWindow]]:
    sessions: dict[str, list[AudioWindow]] = {}
    seen: set[tuple[str, str]] = set()
    dim: int | None = None
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) < 5:
            raise FormatError(f"embedding line {lineno}: expected at least 5 fields")
        session, window_id, start_s, dur_s = fields[:4]
        if (session, window_id) in seen:
            raise FormatError(f"embedding line {lineno}: duplicate window id {window_id!r}")
        seen.add((session, window_id))
        try:
            start = float(start_s)
            dur = float(dur_s)
            values = np.array([float(v) for v in fields[4:]], dtype=float)
        except ValueError as exc:
            raise FormatError(f"embedding line {lineno}: bad numeric field") from exc
        if dim is None:
            dim = values.shape[0]
        elif values.shape[0] != dim:
            raise FormatError(
                f"embedding line {lineno}: dimension {values.shape[0]} != {dim}"
            )
        window = AudioWindow(window_id, TimeInterval.from_seconds(start, start + dur), values)
        sessions.setdefault(session, []).append(window)
    return sessions


def read_embeddings(path) -> dict[str, list[AudioWindow]]:
    with open(path, encoding="utf-8") as fh:
        return parse_embeddings(fh)


def ingest_embeddings(path_or_lines) -> dict[str, np.ndarray]:
    """Flat window-id to vector map (ids must be unique across sessions)."""
    if isinstance(path_or_lines, (str,)) or hasattr(path_or_lines, "__fspath__"):
        with open(path_or_lines, encoding="utf-8") as fh:
            sessions = parse_embeddings(fh)
    else:
        sessions = parse_embeddings(path_or_lines)
    out: dict[str, np.ndarray] = {}
    for windows in sessions.values():
        for w in windows:
            if w.window_id in out:
                raise FormatError(f"duplicate window id across sessions: {w.window_id!r}")
            out[w.window_id] = w.embedding
    return out


def write_embeddings(path, session_id: str, windows: list[AudioWindow]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w in windows:
            values = " ".join(f"{v:.17g}" for v in w.embedding)
            fh.write(
                f"{session_id} {w.window_id} {w.interval.start:.3f} "
                f"{w.interval.duration:.3f} {values}\n"
            )


def pooled_embedding(interval: TimeInterval, windows: list[AudioWindow]) -> np.ndarray:
    """Overlap-weighted mean of window embeddings across a time span."""
    weights = []
    vectors = []
    for w in windows:
        ov = w.interval.overlap_ms(interval)
        if ov > 0:
            weights.append(float(ov))
            vectors.append(w.embedding)
    if not vectors:
        raise DegenerateInputError(
            f"no window overlaps [{interval.start:.3f}, {interval.end:.3f}]"
        )
    wsum = np.array(weights)
    return (np.stack(vectors) * wsum[:, None]).sum(axis=0) / wsum.sum()
