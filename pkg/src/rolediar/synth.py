"""Deterministic synthetic dyadic sessions for desk-scale experiments.

Two speakers with fixed roles alternate turns. Words come from planted
role unigram distributions (shared function words plus role-exclusive
content vocabulary whose mass is a divergence knob); embeddings come
from a planted Gaussian speaker model; a noise knob replaces a fraction
of windows with far-off non-speech-like vectors, and a corruption knob
emulates recognizer substitutions and deletions. Everything is
reproducible from the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import embed
from .core import TimeInterval, TimedWord, merge_adjacent
from .errors import ParameterError
from .lm import Corpus
from .segmenter import presegment

SPEAKERS = ("spk1", "spk2")
ROLE_NAMES = ("guide", "client")

FUNCTION_WORDS = (
    "yeah well so i you we it that this is was are do don't what how "
    "and but or just really think know mean right okay like them then "
    "a the of to in on for with about"
).split()

GUIDE_WORDS = (
    "goal plan review session exercise practice suggest focus notice "
    "progress strategy step reflect describe explore option support "
    "schedule track habit change reward values commit scale rate "
    "summary check agenda homework skill pattern"
).split()

CLIENT_WORDS = (
    "tired worried sleep stress family work money week night morning "
    "hard trouble feel felt anxious angry sad hope tried drink coffee "
    "friday weekend kids house job boss argue upset stomach headache "
    "appetite energy lonely overwhelmed"
).split()

# Zipf-flavored weights for the shared function words.
_FUNCTION_WEIGHTS = np.array([1.0 / (k + 2.0) for k in range(len(FUNCTION_WORDS))])
_FUNCTION_WEIGHTS /= _FUNCTION_WEIGHTS.sum()


@dataclass(frozen=True)
class SyntheticSessionSpec:
    seed: int = 0
    num_turns: int = 40
    role_vocab_divergence: float = 0.3
    speaker_separation: float = 4.0
    noise_fraction: float = 0.0
    asr_corruption: tuple[float, float] = (0.0, 0.0)  # (substitution, deletion)
    filler_fraction: float = 0.0
    embedding_dim: int = 16

    def __post_init__(self):
        if self.num_turns < 2:
            raise ParameterError("need at least two turns")
        if self.role_vocab_divergence < 0:
            raise ParameterError("divergence must be non-negative")
        if self.speaker_separation < 0:
            raise ParameterError("separation must be non-negative")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ParameterError("noise_fraction must lie in [0, 1)")
        sub, dele = self.asr_corruption
        if not (0.0 <= sub < 1.0 and 0.0 <= dele < 1.0):
            raise ParameterError("corruption rates must lie in [0, 1)")
        if not 0.0 <= self.filler_fraction < 1.0:
            raise ParameterError("filler_fraction must lie in [0, 1)")
        if self.embedding_dim < 2:
            raise ParameterError("embedding dimension must be at least 2")


@dataclass
class SyntheticSession:
    session_id: str
    spec: SyntheticSessionSpec
    words: list[TimedWord]
    sentence_marks: list[int]
    asr_words: list[TimedWord]
    asr_sentence_marks: list[int]
    windows: list[embed.AudioWindow]
    window_speakers: list[str]
    noise_flags: list[bool]
    reference: list[tuple[TimeInterval, str]]
    speaker_means: dict[str, np.ndarray] = field(default_factory=dict)


def role_distribution(role_index: int, divergence: float):
    """Planted unigram distribution for one role.

    The exclusive-content mass is 1 - exp(-divergence): zero divergence
    makes both roles sample the shared function words only.
    """
    content = GUIDE_WORDS if role_index == 0 else CLIENT_WORDS
    content_mass = 1.0 - math.exp(-divergence)
    tokens = list(FUNCTION_WORDS) + list(content)
    weights = np.concatenate(
        [
            (1.0 - content_mass) * _FUNCTION_WEIGHTS,
            np.full(len(content), content_mass / len(content)),
        ]
    )
    return tokens, weights / weights.sum()


def filler_distribution():
    return list(FUNCTION_WORDS), _FUNCTION_WEIGHTS.copy()


def _sample_sentence(rng, tokens, weights, mean_len: float = 6.0) -> list[str]:
    n = 1 + rng.binomial(int(2 * mean_len) - 1, 0.5)
    idx = rng.choice(len(tokens), size=n, p=weights)
    return [tokens[i] for i in idx]


def sample_corpus(rng, role_index: int, divergence: float, sentences: int, name: str) -> Corpus:
    tokens, weights = role_distribution(role_index, divergence)
    return Corpus([_sample_sentence(rng, tokens, weights) for _ in range(sentences)], name=name)


def background_corpus(rng, divergence: float, sentences: int, name: str = "background") -> Corpus:
    """Mixed-role text with wide vocabulary coverage for background models."""
    dists = [role_distribution(0, divergence), role_distribution(1, divergence)]
    out = []
    for k in range(sentences):
        tokens, weights = dists[k % 2]
        out.append(_sample_sentence(rng, tokens, weights))
    return Corpus(out, name=name)


def generate(spec: SyntheticSessionSpec, session_id: str | None = None) -> SyntheticSession:
    """Generate one dyadic session with words, embeddings and reference."""
    rng = np.random.default_rng(spec.seed)
    session_id = session_id or f"synth{spec.seed:04d}"
    dists = [role_distribution(i, spec.role_vocab_divergence) for i in range(2)]
    filler_tokens, filler_weights = filler_distribution()

    words: list[TimedWord] = []
    sentence_marks: list[int] = []
    cursor_ms = int(rng.integers(0, 400))
    # Asymmetric turn taking: the first speaker holds longer turns, the
    # second replies in short turns carrying the backchannel-style
    # fillers (doubled per-turn rate so the overall filler share matches
    # the requested fraction). Misassigned fillers therefore pull the
    # profiles asymmetrically, and the short turns put most of that
    # speaker's windows near turn boundaries.
    filler_rate = (0.0, min(2.0 * spec.filler_fraction, 1.0))
    sentence_stop = (0.40, 0.75)
    for turn in range(spec.num_turns):
        speaker = SPEAKERS[turn % 2]
        n_sentences = int(rng.geometric(sentence_stop[turn % 2]))
        for _ in range(n_sentences):
            use_filler = rng.random() < filler_rate[turn % 2]
            tokens, weights = (filler_tokens, filler_weights) if use_filler else dists[turn % 2]
            sentence = _sample_sentence(rng, tokens, weights)
            sentence_marks.append(len(words))
            for w_i, token in enumerate(sentence):
                if w_i > 0:
                    cursor_ms += int(rng.integers(10, 90))
                dur = int(rng.integers(120, 420))
                words.append(
                    TimedWord(
                        token=token,
                        interval=TimeInterval(cursor_ms, cursor_ms + dur),
                        speaker=speaker,
                    )
                )
                cursor_ms += dur
            cursor_ms += int(rng.integers(50, 300))  # inter-sentence pause
        cursor_ms += int(rng.integers(300, 2000))  # turn-taking gap

    reference = merge_adjacent(
        [(w.interval, w.speaker) for w in words], max_gap=0.2
    )

    # Planted acoustic world: identity within-speaker covariance, speaker
    # means placed at the prescribed separation around a random center.
    d = spec.embedding_dim
    center = rng.normal(0.0, 1.0, size=d)
    direction = rng.normal(0.0, 1.0, size=d)
    direction /= np.linalg.norm(direction)
    half = 0.5 * spec.speaker_separation
    means = {
        SPEAKERS[0]: center + half * direction,
        SPEAKERS[1]: center - half * direction,
    }

    turn_spans = _speaker_spans(words)
    window_intervals = []
    for seg in presegment(words, gap_threshold=1.0):
        window_intervals.extend(embed.uniform_windows(seg.interval, 1.5, 0.5))

    windows: list[embed.AudioWindow] = []
    window_speakers: list[str] = []
    noise_flags: list[bool] = []
    # Noise windows sit on a shell in independent random directions:
    # mutually dissimilar (no coherent rogue cluster), off-speaker but
    # close enough that clustering absorbs rather than isolates them.
    # Speech windows straddling a turn change carry the overlap-weighted
    # mixture of the two speaker means, like embeddings pooled over a
    # window with two voices in it.
    noise_radius = 0.5 * spec.speaker_separation
    for idx, interval in enumerate(window_intervals):
        speaker = _dominant_speaker(interval, turn_spans)
        is_noise = rng.random() < spec.noise_fraction
        if is_noise:
            u = rng.normal(0.0, 1.0, size=d)
            u /= np.linalg.norm(u)
            vector = center + noise_radius * u + rng.normal(0.0, 1.0, size=d)
        else:
            weights = {spk: 0 for spk in SPEAKERS}
            for span, spk in turn_spans:
                weights[spk] += span.overlap_ms(interval)
            total = sum(weights.values())
            if total > 0:
                mixed_mean = sum(
                    (w / total) * means[spk] for spk, w in weights.items()
                )
            else:
                mixed_mean = means[speaker]
            vector = mixed_mean + rng.normal(0.0, 1.0, size=d)
        windows.append(embed.AudioWindow(f"w{idx:05d}", interval, vector))
        window_speakers.append(speaker)
        noise_flags.append(bool(is_noise))

    asr_words, kept = _corrupt(words, spec.asr_corruption, rng)
    asr_sentence_marks = _remap_marks(sentence_marks, kept, len(words))

    return SyntheticSession(
        session_id=session_id,
        spec=spec,
        words=words,
        sentence_marks=sentence_marks,
        asr_words=asr_words,
        asr_sentence_marks=asr_sentence_marks,
        windows=windows,
        window_speakers=window_speakers,
        noise_flags=noise_flags,
        reference=reference,
        speaker_means=means,
    )


def _speaker_spans(words: list[TimedWord]):
    spans = []
    for w in words:
        if spans and spans[-1][1] == w.speaker:
            spans[-1][0] = TimeInterval(spans[-1][0].start_ms, w.interval.end_ms)
        else:
            spans.append([w.interval, w.speaker])
    return [(iv, spk) for iv, spk in spans]


def _dominant_speaker(interval: TimeInterval, spans) -> str:
    best_spk = spans[0][1]
    best_ov = -1
    for iv, spk in spans:
        ov = iv.overlap_ms(interval)
        if ov > best_ov:
            best_ov = ov
            best_spk = spk
    if best_ov > 0:
        return best_spk
    mid = interval.midpoint_ms()
    return min(spans, key=lambda s: min(abs(s[0].start_ms - mid), abs(s[0].end_ms - mid)))[1]


def _corrupt(words, rates, rng):
    """Word-level substitution/deletion; returns surviving original indices."""
    sub_rate, del_rate = rates
    pool = FUNCTION_WORDS + GUIDE_WORDS + CLIENT_WORDS
    out: list[TimedWord] = []
    kept: list[int] = []
    for i, w in enumerate(words):
        r = rng.random()
        if r < del_rate:
            continue
        if r < del_rate + sub_rate:
            token = pool[int(rng.integers(0, len(pool)))]
            out.append(TimedWord(token, w.interval, w.speaker, w.confidence))
        else:
            out.append(w)
        kept.append(i)
    return out, kept


def _remap_marks(marks, kept, total):
    """First surviving word of each original sentence becomes the new mark."""
    kept_set = {orig: new for new, orig in enumerate(kept)}
    bounds = list(marks) + [total]
    new_marks = []
    for a, b in zip(bounds, bounds[1:]):
        for orig in range(a, b):
            if orig in kept_set:
                new_marks.append(kept_set[orig])
                break
    return new_marks


def corrupt_transcript(
    words: list[TimedWord], rates: tuple[float, float], seed: int = 0
) -> list[TimedWord]:
    """Independently substitute or delete each word at the given rates.

    Timing (and reference speaker) of surviving words is preserved;
    substitutions draw a token from the planted vocabulary.
    """
    sub_rate, del_rate = rates
    if not (0.0 <= sub_rate <= 1.0 and 0.0 <= del_rate <= 1.0):
        raise ParameterError("corruption rates must lie in [0, 1]")
    if del_rate >= 1.0:
        return []
    rng = np.random.default_rng(seed)
    out, _ = _corrupt(words, (sub_rate, del_rate), rng)
    return out


def write_session_files(session: SyntheticSession, out_dir) -> dict[str, str]:
    """Emit the CTM / embedding / RTTM files the toolkit consumes."""
    import os

    from .core import write_ctm
    from .diarize import DiarizationHypothesis, write_rttm
    from .embed import write_embeddings
    from .segmenter import write_sentence_marks

    os.makedirs(out_dir, exist_ok=True)
    sid = session.session_id
    paths = {
        "ctm": os.path.join(out_dir, f"{sid}.ctm"),
        "asr_ctm": os.path.join(out_dir, f"{sid}.asr.ctm"),
        "marks": os.path.join(out_dir, f"{sid}.marks"),
        "asr_marks": os.path.join(out_dir, f"{sid}.asr.marks"),
        "embeddings": os.path.join(out_dir, f"{sid}.emb"),
        "rttm": os.path.join(out_dir, f"{sid}.ref.rttm"),
    }
    write_ctm(paths["ctm"], sid, session.words)
    write_ctm(paths["asr_ctm"], sid, session.asr_words)
    write_sentence_marks(paths["marks"], sid, session.sentence_marks)
    write_sentence_marks(paths["asr_marks"], sid, session.asr_sentence_marks)
    write_embeddings(paths["embeddings"], sid, session.windows)
    write_rttm(paths["rttm"], DiarizationHypothesis(sid, tuple(session.reference)))
    return paths
