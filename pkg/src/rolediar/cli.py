"""Command-line entry points.

Every flag has a config-file equivalent (plain ``key=value`` lines, keys
use underscores); explicit command-line flags override the config file,
which overrides built-in defaults. Subcommands that produce files write
them only inside their declared output directory, alongside a run
manifest recording the resolved settings and input digests.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 pipeline
failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, bench, der, diarize, embed, lm, plda, roles, segmenter, synth
from .core import read_ctm
from .errors import (
    ConfigurationError,
    FormatError,
    ParameterError,
    ToolkitError,
)

USAGE_ERROR, DATA_ERROR, PIPELINE_ERROR = 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def parse_config_file(path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


class Settings:
    """Layered option lookup: CLI > config file > default."""

    def __init__(self, args: argparse.Namespace):
        self.args = vars(args)
        self.file_values = {}
        if self.args.get("config"):
            self.file_values = parse_config_file(self.args["config"])
        self.resolved: dict[str, object] = {}

    def get(self, key: str, default, cast=str):
        cli = self.args.get(key)
        if cli is not None:
            value = cli
        elif key in self.file_values:
            raw = self.file_values[key]
            value = cast(raw) if cast is not bool else raw.lower() in ("1", "true", "yes")
        else:
            value = default
        self.resolved[key] = value
        return value


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command: str, settings: Settings, inputs: list[str]) -> None:
    lines = [f"tool=rolediar {__version__}", f"command={command}"]
    for key in sorted(settings.resolved):
        lines.append(f"{key}={settings.resolved[key]}")
    for path in sorted(inputs):
        lines.append(f"input {os.path.basename(path)} sha256={_sha256(path)}")
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_models(paths) -> list[lm.NGramModel]:
    return [lm.read_arpa(p) for p in paths]


def _load_training_pairs(path):
    """Embedding file whose session column carries the speaker label."""
    sessions = embed.read_embeddings(path)
    pairs = []
    for speaker in sorted(sessions):
        for w in sessions[speaker]:
            pairs.append((w.embedding, speaker))
    return pairs


# ---------------------------------------------------------------------------
# Subcommand implementations.


def cmd_train_lm(args):
    settings = Settings(args)
    order = settings.get("order", 3, int)
    discount = settings.get("discount", None, float)
    unknown_count = settings.get("unknown_count", 0, int)
    corpus = lm.read_corpus(args.corpus)
    model = lm.train(corpus, order=order, discount=discount, unknown_count=unknown_count)
    lm.write_arpa(model, args.output)
    print(f"trained order-{order} model on {len(corpus)} sentences -> {args.output}")
    return 0


def cmd_interpolate_lm(args):
    settings = Settings(args)
    models = _read_models(args.models)
    weights_arg = settings.get("weights", None)
    dev_path = settings.get("dev", None)
    if weights_arg:
        weights = [float(w) for w in str(weights_arg).split(",")]
    elif dev_path:
        weights = list(lm.optimize_weights(models, lm.read_corpus(dev_path)))
        print("optimized weights: " + " ".join(f"{w:.4f}" for w in weights))
    else:
        raise ParameterError("give either --weights or --dev")
    mixed = lm.interpolate(models, weights)
    lm.write_arpa(mixed, args.output)
    print(f"interpolated {len(models)} models -> {args.output}")
    return 0


def cmd_perplexity(args):
    model = lm.read_arpa(args.model)
    corpus = lm.read_corpus(args.text)
    for sent in corpus.sentences:
        print(f"{lm.perplexity(model, sent):.6f} {' '.join(sent)}")
    print(f"overall {lm.corpus_perplexity(model, corpus):.6f}")
    return 0


def cmd_train_plda(args):
    settings = Settings(args)
    iterations = settings.get("iterations", 10, int)
    pairs = _load_training_pairs(args.embeddings)
    model = plda.train_plda(pairs, iterations=iterations)
    plda.write_plda(args.output, model)
    print(f"trained PLDA (dim {model.dim}) on {len(pairs)} vectors -> {args.output}")
    return 0


def cmd_adapt_plda(args):
    settings = Settings(args)
    alpha = settings.get("alpha", 0.5, float)
    model = plda.read_plda(args.model)
    sessions = embed.read_embeddings(args.embeddings)
    vectors = [w.embedding for sid in sorted(sessions) for w in sessions[sid]]
    adapted = plda.adapt(model, vectors, alpha=alpha)
    plda.write_plda(args.output, adapted)
    print(f"adapted PLDA with alpha={alpha} on {len(vectors)} vectors -> {args.output}")
    return 0


def cmd_synth(args):
    settings = Settings(args)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    seed = settings.get("seed", 0, int)
    sessions = settings.get("sessions", 1, int)
    spec = synth.SyntheticSessionSpec(
        seed=seed,
        num_turns=settings.get("turns", 40, int),
        role_vocab_divergence=settings.get("divergence", 0.3, float),
        speaker_separation=settings.get("separation", 4.0, float),
        noise_fraction=settings.get("noise", 0.0, float),
        asr_corruption=(
            settings.get("sub_rate", 0.0, float),
            settings.get("del_rate", 0.0, float),
        ),
        filler_fraction=settings.get("filler", 0.0, float),
        embedding_dim=settings.get("dim", 16, int),
    )
    written = []
    for k in range(sessions):
        session_spec = replace(spec, seed=int(np.random.default_rng([seed, 3, k]).integers(0, 2**31 - 1)))
        session = synth.generate(session_spec, session_id=f"s{k:03d}")
        paths = synth.write_session_files(session, out_dir)
        written.extend(paths.values())
    if settings.get("corpora", False, bool):
        rng = np.random.default_rng([seed, 1])
        div = spec.role_vocab_divergence
        for i in range(2):
            lm.write_corpus(
                os.path.join(out_dir, f"train_role{i + 1}.txt"),
                synth.sample_corpus(rng, i, div, 400, f"role{i}"),
            )
            lm.write_corpus(
                os.path.join(out_dir, f"dev_role{i + 1}.txt"),
                synth.sample_corpus(rng, i, div, 120, f"dev{i}"),
            )
        lm.write_corpus(os.path.join(out_dir, "background.txt"), synth.background_corpus(rng, div, 600))
    write_manifest(out_dir, "synth", settings, [])
    print(f"wrote {sessions} session(s) to {out_dir}")
    return 0


def _pipeline_config(settings: Settings, mode: str) -> diarize.PipelineConfig:
    min_conf = settings.get("min_confidence", None, float)
    return diarize.PipelineConfig(
        mode=mode,
        window=settings.get("window", 1.5, float),
        overlap=settings.get("overlap", 0.5, float),
        gap_threshold=settings.get("gap_threshold", 1.0, float),
        merge_gap=settings.get("merge_gap", 0.2, float),
        collar=settings.get("collar", 0.25, float),
        top_percent=settings.get("top_percent", 100.0, float),
        min_confidence=min_conf,
        plda_alpha=settings.get("plda_alpha", 0.5, float),
        text_segmentation=settings.get("segmentation", "silence-gap"),
        seed=settings.get("seed", 0, int),
        jobs=settings.get("jobs", 1, int),
    )


def _load_sessions(args):
    """Shared session assembly for diarize/curve from data files."""
    words_by_session = read_ctm(args.ctm)
    windows_by_session = embed.read_embeddings(args.embeddings) if args.embeddings else {}
    marks_by_session = (
        segmenter.read_sentence_marks(args.marks) if getattr(args, "marks", None) else {}
    )
    role_models = _read_models(args.lm) if args.lm else None
    plda_model = plda.read_plda(args.plda) if args.plda else None
    sessions = []
    for sid in sorted(words_by_session):
        sessions.append(
            diarize.SessionData(
                session_id=sid,
                words=words_by_session[sid],
                sentence_marks=marks_by_session.get(sid),
                windows=windows_by_session.get(sid, []),
                role_models=role_models,
                plda=plda_model,
            )
        )
    return sessions


def cmd_diarize(args):
    settings = Settings(args)
    mode = settings.get("mode", "linguistically-aided")
    config = _pipeline_config(settings, mode)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    sessions = _load_sessions(args)
    hypotheses = []
    fallbacks = 0
    role_dump = []
    for session in sessions:
        hyp = diarize.run_pipeline(session, config)
        if hyp.note:
            fallbacks += 1
            print(f"{session.session_id}: {hyp.note}", file=sys.stderr)
        hypotheses.append(hyp)
        if mode != "audio-only":
            _, assignments, _ = diarize.linguistic_state(session, config, pool_embeddings=False)
            role_dump.append((session.session_id, assignments))
    out_path = os.path.join(out_dir, "hypothesis.rttm")
    diarize.write_rttm(out_path, hypotheses)
    if role_dump:
        with open(os.path.join(out_dir, "roles.txt"), "w", encoding="utf-8") as fh:
            for sid, assignments in role_dump:
                fh.write(roles.format_role_assignments(sid, assignments))
    inputs = [p for p in [args.ctm, args.embeddings, args.plda, getattr(args, "marks", None)] if p]
    inputs.extend(args.lm or [])
    write_manifest(out_dir, "diarize", settings, inputs)
    print(f"wrote {out_path}" + (f" ({fallbacks} fallback(s))" if fallbacks else ""))
    return 0


def cmd_score_der(args):
    settings = Settings(args)
    collar = settings.get("collar", 0.25, float)
    include_overlap = settings.get("include_overlap", False, bool)
    refs = diarize.read_rttm(args.reference)
    hyps = diarize.read_rttm(args.hypothesis)
    reports = []
    for sid in sorted(refs):
        report = der.score_der(
            refs[sid], hyps.get(sid, []), collar=collar, ignore_overlap=not include_overlap
        )
        reports.append((sid, report))
        print(f"{sid}\t{report.summary()}")
    pooled = der.pooled_report([r for _, r in reports])
    print(f"TOTAL\t{pooled.summary()}")
    if args.output:
        der.write_der_report(args.output, reports)
    return 0


def cmd_curve(args):
    settings = Settings(args)
    percents = [float(p) for p in str(settings.get("percents", "10,20,30,40,50,60,70,80,90,100")).split(",")]
    config = _pipeline_config(settings, "linguistically-aided")
    sessions = _load_sessions(args)
    refs = diarize.read_rttm(args.reference)
    for session in sessions:
        if session.session_id not in refs:
            raise ConfigurationError(f"no reference for session {session.session_id!r}")
        session.reference = tuple(refs[session.session_id])
    curve = der.der_curve(sessions, percents, config)
    for p, value in curve:
        print(f"{p:g}\t{value:.4f}")
    if args.output:
        der.write_curve_csv(args.output, curve)
    return 0


def cmd_reproduce(args):
    settings = Settings(args)
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    seed = settings.get("seed", 7, int)
    num_sessions = settings.get("sessions", 25, int)
    jobs = settings.get("jobs", 1, int)
    report_path = os.path.join(out_dir, "report.txt")
    lines = run_reproduction(
        seed=seed,
        num_sessions=num_sessions,
        jobs=jobs,
        out_dir=out_dir,
    )
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    write_manifest(out_dir, "reproduce", settings, [])
    print("\n".join(lines))
    print(f"report -> {report_path}")
    return 0


def benchmark_spec(seed: int, num_sessions: int, filler: float = 0.0) -> bench.BenchmarkSpec:
    """The synthetic analogue of the evaluation setup.

    Divergence is tuned so segment-level role accuracy lands near 80%
    with the configured recognizer corruption; separation is moderate:
    clustering works on clean audio but degrades under the noise windows.
    """
    return bench.BenchmarkSpec(
        seed=seed,
        num_sessions=num_sessions,
        session=synth.SyntheticSessionSpec(
            num_turns=40,
            role_vocab_divergence=0.36,
            speaker_separation=6.0,
            noise_fraction=0.15,
            asr_corruption=(0.2, 0.05),
            filler_fraction=filler,
        ),
    )


def run_reproduction(seed: int, num_sessions: int, jobs: int, out_dir: str | None = None):
    """Benchmark tables and selection curve; returns report lines."""
    lines = [f"seed={seed} sessions={num_sessions}"]
    main = bench.build_benchmark(benchmark_spec(seed, num_sessions))
    accuracy = bench.role_accuracy(main)
    lines.append(f"segment role accuracy (recognizer transcripts, marks) = {accuracy:.3f}")

    audio = bench.run_mode(main, "audio-only", jobs=jobs)
    lines.append("")
    lines.append("DER (%) with recognizer transcripts, sentence-mark segmentation")
    lang = bench.run_mode(main, "language-only", jobs=jobs)
    aided = bench.run_mode(main, "linguistically-aided", jobs=jobs)
    lines.append(
        f"  audio-only={audio.pooled.der:.2f} language-only={lang.pooled.der:.2f} "
        f"linguistically-aided={aided.pooled.der:.2f}"
    )

    lines.append("")
    lines.append("DER (%) with reference transcripts")
    for segmentation in ("oracle", "sentence-marks"):
        lang_ref = bench.run_mode(
            main, "language-only", transcripts="reference", segmentation=segmentation, jobs=jobs
        )
        aided_ref = bench.run_mode(
            main,
            "linguistically-aided",
            transcripts="reference",
            segmentation=segmentation,
            jobs=jobs,
        )
        lines.append(
            f"  {segmentation}: audio-only={audio.pooled.der:.2f} "
            f"language-only={lang_ref.pooled.der:.2f} "
            f"linguistically-aided={aided_ref.pooled.der:.2f}"
        )

    filler_bench = bench.build_benchmark(
        benchmark_spec(seed, num_sessions, filler=0.2)
    )
    sessions = [
        bench.session_data(filler_bench, s, "asr", "sentence-marks")
        for s in filler_bench.sessions
    ]
    config = diarize.PipelineConfig(text_segmentation="sentence-marks")
    percents = [float(p) for p in range(10, 101, 10)]
    curve = der.der_curve(sessions, percents, config)
    lines.append("")
    lines.append("DER (%) vs confidence selection percentage (filler benchmark)")
    for p, value in curve:
        lines.append(f"  top {p:g}% -> {value:.2f}")
    best_p, best_v = min(curve, key=lambda pv: (pv[1], pv[0]))
    lines.append(f"  best: top {best_p:g}% at {best_v:.2f} (vs {curve[-1][1]:.2f} ungated)")

    if out_dir:
        rttm_dir = os.path.join(out_dir, "rttm")
        os.makedirs(rttm_dir, exist_ok=True)
        for mode_result in (audio, lang, aided):
            diarize.write_rttm(
                os.path.join(rttm_dir, f"{mode_result.mode}.rttm"), mode_result.hypotheses
            )
        refs = [
            diarize.DiarizationHypothesis(s.session_id, tuple(s.reference))
            for s in main.sessions
        ]
        diarize.write_rttm(os.path.join(rttm_dir, "reference.rttm"), refs)
        der.write_curve_csv(os.path.join(out_dir, "curve.csv"), curve)
    return lines


# ---------------------------------------------------------------------------
# Parser wiring.


def build_parser() -> _Parser:
    parser = _Parser(prog="rolediar", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rolediar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key=value config file")
        return p

    p = add("train-lm", cmd_train_lm, "train a Kneser-Ney n-gram model")
    p.add_argument("corpus")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--order", type=int)
    p.add_argument("--discount", type=float)
    p.add_argument("--unknown-count", dest="unknown_count", type=int)

    p = add("interpolate-lm", cmd_interpolate_lm, "mix ARPA models")
    p.add_argument("models", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--weights", help="comma-separated mixture weights")
    p.add_argument("--dev", help="development corpus for weight optimization")

    p = add("perplexity", cmd_perplexity, "score a text file with a model")
    p.add_argument("model")
    p.add_argument("text")

    p = add("train-plda", cmd_train_plda, "train a PLDA model on labeled embeddings")
    p.add_argument("embeddings", help="embedding file; the session column is the speaker")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--iterations", type=int)

    p = add("adapt-plda", cmd_adapt_plda, "adapt a PLDA model to in-domain embeddings")
    p.add_argument("model")
    p.add_argument("embeddings")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--alpha", type=float)

    p = add("synth", cmd_synth, "generate synthetic sessions")
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--sessions", type=int)
    p.add_argument("--turns", type=int)
    p.add_argument("--divergence", type=float)
    p.add_argument("--separation", type=float)
    p.add_argument("--noise", type=float)
    p.add_argument("--sub-rate", dest="sub_rate", type=float)
    p.add_argument("--del-rate", dest="del_rate", type=float)
    p.add_argument("--filler", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--corpora", action="store_const", const=True, default=None)

    p = add("diarize", cmd_diarize, "run a diarization pipeline on data files")
    p.add_argument("--mode", choices=diarize.MODES)
    p.add_argument("--ctm", required=True)
    p.add_argument("--embeddings")
    p.add_argument("--marks")
    p.add_argument("--lm", action="append", help="role ARPA model (repeat per role)")
    p.add_argument("--plda")
    p.add_argument("-o", "--out-dir", required=True)
    _add_pipeline_flags(p)

    p = add("score-der", cmd_score_der, "score hypothesis RTTM against reference")
    p.add_argument("reference")
    p.add_argument("hypothesis")
    p.add_argument("-o", "--output")
    p.add_argument("--collar", type=float)
    p.add_argument("--include-overlap", dest="include_overlap", action="store_const", const=True, default=None)

    p = add("curve", cmd_curve, "DER vs selection percentage for one session set")
    p.add_argument("--ctm", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--marks")
    p.add_argument("--lm", action="append", required=True)
    p.add_argument("--plda", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--percents")
    p.add_argument("-o", "--output")
    _add_pipeline_flags(p)

    p = add("reproduce", cmd_reproduce, "synthetic analogue of the reported experiments")
    p.add_argument("-o", "--out-dir", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--sessions", type=int)
    p.add_argument("--jobs", type=int)

    return parser


def _add_pipeline_flags(p):
    p.add_argument("--window", type=float)
    p.add_argument("--overlap", type=float)
    p.add_argument("--gap-threshold", dest="gap_threshold", type=float)
    p.add_argument("--merge-gap", dest="merge_gap", type=float)
    p.add_argument("--collar", type=float)
    p.add_argument("--top-percent", dest="top_percent", type=float)
    p.add_argument("--min-confidence", dest="min_confidence", type=float)
    p.add_argument("--plda-alpha", dest="plda_alpha", type=float)
    p.add_argument("--segmentation", choices=segmenter.STRATEGY_KINDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (FormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return DATA_ERROR
    except ToolkitError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return PIPELINE_ERROR


if __name__ == "__main__":
    sys.exit(main())
