"""Multi-session synthetic benchmark assembly and pipeline sweeps.

Builds a shared model world (role LMs mixed per the interpolation recipe,
a PLDA model trained on planted multi-speaker embeddings and adapted to
the benchmark's in-domain windows), generates seeded sessions, and runs
the three pipelines over them with deterministic session-level
parallelism.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import lm, roles, synth
from .core import RoleLabel, make_role_labels
from .der import DerReport, pooled_report, score_der
from .diarize import DiarizationHypothesis, PipelineConfig, SessionData, run_pipeline
from .errors import ParameterError
from .plda import PldaModel, adapt, train_plda


@dataclass(frozen=True)
class BenchmarkSpec:
    seed: int = 7
    num_sessions: int = 25
    session: synth.SyntheticSessionSpec = field(default_factory=synth.SyntheticSessionSpec)
    lm_order: int = 3
    train_sentences_per_role: int = 400
    dev_sentences_per_role: int = 120
    background_sentences: int = 600
    plda_train_speakers: int = 24
    plda_samples_per_speaker: int = 30
    plda_iterations: int = 5
    plda_alpha: float = 0.5


@dataclass
class Benchmark:
    spec: BenchmarkSpec
    sessions: list[synth.SyntheticSession]
    role_models: list[lm.NGramModel]
    role_labels: list[RoleLabel]
    plda: PldaModel


def _training_embeddings(rng, spec: BenchmarkSpec):
    """Labeled embeddings from the planted world for PLDA training.

    Training speakers are drawn from a between-speaker Gaussian whose
    scale matches the session separation; within-speaker noise is the
    planted identity covariance.
    """
    d = spec.session.embedding_dim
    sigma_b = max(spec.session.speaker_separation, 1e-3) / np.sqrt(2.0 * d)
    pairs = []
    for s in range(spec.plda_train_speakers):
        mean = rng.normal(0.0, sigma_b, size=d)
        for _ in range(spec.plda_samples_per_speaker):
            pairs.append((mean + rng.normal(0.0, 1.0, size=d), f"t{s:03d}"))
    return pairs


def build_benchmark(spec: BenchmarkSpec) -> Benchmark:
    """Generate sessions and train the shared model world."""
    if spec.num_sessions < 1:
        raise ParameterError("need at least one session")
    master = np.random.default_rng([spec.seed, 0xB])

    # Text world: per-role training and development corpora plus a mixed
    # background corpus with an unknown-word floor for coverage.
    div = spec.session.role_vocab_divergence
    corpora_rng = np.random.default_rng([spec.seed, 1])
    train_corpora = [
        synth.sample_corpus(corpora_rng, i, div, spec.train_sentences_per_role, f"role{i}")
        for i in range(2)
    ]
    dev_corpora = [
        synth.sample_corpus(corpora_rng, i, div, spec.dev_sentences_per_role, f"dev{i}")
        for i in range(2)
    ]
    background = synth.background_corpus(corpora_rng, div, spec.background_sentences)

    background_model = lm.train(background, spec.lm_order, unknown_count=1)
    base_role_models = [lm.train(c, spec.lm_order) for c in train_corpora]
    role_models = roles.mix_role_models(background_model, base_role_models, dev_corpora)
    role_labels = make_role_labels(list(synth.ROLE_NAMES))

    plda_rng = np.random.default_rng([spec.seed, 2])
    plda_model = train_plda(
        _training_embeddings(plda_rng, spec), iterations=spec.plda_iterations
    )

    sessions = []
    for k in range(spec.num_sessions):
        session_seed = int(np.random.default_rng([spec.seed, 3, k]).integers(0, 2**31 - 1))
        session_spec = replace(spec.session, seed=session_seed)
        sessions.append(synth.generate(session_spec, session_id=f"s{k:03d}"))

    # In-domain adaptation on the pooled session windows.
    in_domain = np.stack([w.embedding for s in sessions for w in s.windows])
    plda_model = adapt(plda_model, in_domain, spec.plda_alpha)

    _ = master  # reserved stream
    return Benchmark(
        spec=spec,
        sessions=sessions,
        role_models=role_models,
        role_labels=role_labels,
        plda=plda_model,
    )


def session_data(
    bench: Benchmark,
    session: synth.SyntheticSession,
    transcripts: str = "asr",
    segmentation: str = "sentence-marks",
) -> SessionData:
    """Assemble one pipeline input from a synthetic session."""
    if transcripts == "asr":
        words, marks = session.asr_words, session.asr_sentence_marks
    elif transcripts == "reference":
        words, marks = session.words, session.sentence_marks
    else:
        raise ParameterError(f"unknown transcript choice {transcripts!r}")
    return SessionData(
        session_id=session.session_id,
        words=words,
        sentence_marks=marks if segmentation == "sentence-marks" else None,
        windows=session.windows,
        role_models=bench.role_models,
        role_labels=bench.role_labels,
        plda=bench.plda,
        reference=tuple(session.reference),
    )


@dataclass
class ModeResult:
    mode: str
    hypotheses: list[DiarizationHypothesis]
    reports: list[tuple[str, DerReport]]
    pooled: DerReport
    fallbacks: int


def _run_one(args):
    session_d, config = args
    hyp = run_pipeline(session_d, config)
    report = score_der(list(session_d.reference), hyp, config.collar)
    return hyp, report


def run_mode(
    bench: Benchmark,
    mode: str,
    transcripts: str = "asr",
    segmentation: str = "sentence-marks",
    config: PipelineConfig | None = None,
    jobs: int = 1,
) -> ModeResult:
    """Run one pipeline mode over every session and pool the DERs.

    Results are independent of ``jobs``: sessions are dispatched and
    collected in session order.
    """
    base = config or PipelineConfig()
    cfg = replace(base, mode=mode, text_segmentation=segmentation)
    tasks = [(session_data(bench, s, transcripts, segmentation), cfg) for s in bench.sessions]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    hypotheses = [h for h, _ in outcomes]
    reports = [(h.session_id, r) for h, r in outcomes]
    return ModeResult(
        mode=mode,
        hypotheses=hypotheses,
        reports=reports,
        pooled=pooled_report([r for _, r in reports]),
        fallbacks=sum(1 for h in hypotheses if h.note),
    )


def role_accuracy(
    bench: Benchmark,
    transcripts: str = "asr",
    segmentation: str = "sentence-marks",
    config: PipelineConfig | None = None,
) -> float:
    """Fraction of text segments whose assigned role matches the speaker.

    The true role of a segment is its dominant speaker by word time; the
    speaker order matches the role label order.
    """
    from .diarize import linguistic_state

    base = config or PipelineConfig()
    cfg = replace(base, mode="language-only", text_segmentation=segmentation)
    speaker_to_role = dict(zip(synth.SPEAKERS, [r.name for r in bench.role_labels]))
    hits = total = 0
    for session in bench.sessions:
        sd = session_data(bench, session, transcripts, segmentation)
        segments, assignments, _ = linguistic_state(sd, cfg, pool_embeddings=False)
        for seg, a in zip(segments, assignments):
            durations: dict[str, int] = {}
            for w in seg.words:
                durations[w.speaker] = durations.get(w.speaker, 0) + w.interval.duration_ms
            true_speaker = max(sorted(durations), key=lambda s: durations[s])
            total += 1
            hits += a.role.name == speaker_to_role[true_speaker]
    return hits / total if total else 0.0
