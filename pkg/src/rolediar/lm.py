"""N-gram language models with interpolated Kneser-Ney smoothing.

Models are stored in backoff form (per-n-gram log probability plus
per-context backoff weight), which represents the interpolated
Kneser-Ney recursion exactly and maps one-to-one onto the ARPA file
layout. Natural log is used internally; ARPA files use log10.

Conventions:
  * one sentence-start marker conditions the first word but is never a
    scored event; the sentence-end marker is a scored event;
  * tokens outside a model's vocabulary are scored via the unknown
    marker;
  * the lowest (unigram) level interpolates with a uniform distribution
    over the prediction vocabulary, so every in-vocabulary token has
    positive probability whenever the discount is positive.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import normalize_token
from .errors import FormatError, ParameterError, TrainingError

SENT_START = "<s>"
SENT_END = "</s>"
UNKNOWN = "<unk>"

_MARKERS = (SENT_START, SENT_END, UNKNOWN)

LOG10 = math.log(10.0)


@dataclass
class Corpus:
    """A list of tokenized sentences."""

    sentences: list[list[str]]
    name: str = ""

    def __post_init__(self):
        if any(not s for s in self.sentences):
            raise ParameterError("corpus sentences must be non-empty")

    def __len__(self):
        return len(self.sentences)


def parse_corpus(lines, name: str = "", normalize: bool = True) -> Corpus:
    sentences = []
    for line in lines:
        toks = line.split()
        if normalize:
            toks = [t for t in (normalize_token(t) for t in toks) if t]
        if toks:
            sentences.append(toks)
    return Corpus(sentences, name=name)


def read_corpus(path, name: str = "", normalize: bool = True) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh, name=name or str(path), normalize=normalize)


def write_corpus(path, corpus: Corpus) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus.sentences:
            fh.write(" ".join(sent) + "\n")


@dataclass
class NGramModel:
    """Backoff n-gram model.

    ``logprobs`` maps n-gram tuples (context + predicted word) to natural
    log probabilities; ``backoffs`` maps context tuples to natural log
    backoff weights. A context absent from ``backoffs`` has weight 1.
    """

    order: int
    vocabulary: frozenset[str]
    logprobs: dict[tuple[str, ...], float]
    backoffs: dict[tuple[str, ...], float] = field(default_factory=dict)
    name: str = ""

    @property
    def prediction_vocabulary(self) -> frozenset[str]:
        """Tokens that can be predicted (everything except sentence-start)."""
        return self.vocabulary - {SENT_START}

    def _map(self, token: str) -> str:
        return token if token in self.vocabulary else UNKNOWN

    def logprob(self, word: str, context: tuple[str, ...] = ()) -> float:
        """Natural-log P(word | context) with standard backoff lookup."""
        w = self._map(word)
        ctx = tuple(self._map(t) for t in context)
        if self.order > 1:
            ctx = ctx[-(self.order - 1):]
        else:
            ctx = ()
        acc = 0.0
        while True:
            entry = self.logprobs.get(ctx + (w,))
            if entry is not None:
                return acc + entry
            if not ctx:
                return float("-inf")
            acc += self.backoffs.get(ctx, 0.0)
            ctx = ctx[1:]

    def prob(self, word: str, context: tuple[str, ...] = ()) -> float:
        return math.exp(self.logprob(word, context))

    def sentence_logprob(self, tokens: list[str]) -> tuple[float, int]:
        """Total log probability and number of scored events.

        Events are every token plus the sentence-end marker; the
        sentence-start marker seeds the context only.
        """
        if not tokens:
            raise ParameterError("cannot score an empty token list")
        context: tuple[str, ...] = (SENT_START,)
        total = 0.0
        for tok in tokens:
            total += self.logprob(tok, context)
            context = context + (self._map(tok),)
            if self.order > 1:
                context = context[-(self.order - 1):]
        total += self.logprob(SENT_END, context)
        return total, len(tokens) + 1

    def context_mass(self, context: tuple[str, ...] = ()) -> float:
        """Total probability over the prediction vocabulary given a context."""
        return sum(self.prob(w, context) for w in self.prediction_vocabulary)

    def observed_contexts(self) -> set[tuple[str, ...]]:
        """All contexts with explicit entries (includes the empty context)."""
        return {gram[:-1] for gram in self.logprobs}


def _count_ngrams(sentences, order: int):
    """Raw counts of all k-grams, k = 1..order, one start marker per sentence."""
    raw = [Counter() for _ in range(order + 1)]  # raw[k] for k-grams
    for sent in sentences:
        toks = [SENT_START] + list(sent) + [SENT_END]
        for k in range(1, order + 1):
            counts = raw[k]
            for i in range(len(toks) - k + 1):
                counts[tuple(toks[i : i + k])] += 1
    return raw


def _estimate_discount(counts: dict) -> float:
    """Absolute discount from count-of-count statistics, n1/(n1 + 2*n2)."""
    n1 = sum(1 for c in counts.values() if c == 1)
    n2 = sum(1 for c in counts.values() if c == 2)
    if n1 + 2 * n2 == 0:
        return 0.5
    return min(1.0, n1 / (n1 + 2.0 * n2))


def train(
    corpus: Corpus,
    order: int = 3,
    discount: float | None = None,
    unknown_count: int = 0,
) -> NGramModel:
    """Train an interpolated Kneser-Ney model.

    With ``discount=0`` the model reduces to maximum likelihood on every
    n-gram with positive count. When ``discount`` is None, one discount
    per order is estimated from that order's count-of-count statistics.
    ``unknown_count`` gives the unknown marker a floor count at the
    unigram level (used for background models with wide vocabularies).
    """
    if not corpus.sentences:
        raise TrainingError("cannot train on an empty corpus")
    if not 1 <= order <= 5:
        raise ParameterError(f"order must be in [1, 5], got {order}")
    if discount is not None and not 0.0 <= discount < 1.0:
        raise ParameterError(f"discount must lie in [0, 1), got {discount}")
    if unknown_count < 0:
        raise ParameterError("unknown_count must be non-negative")

    raw = _count_ngrams(corpus.sentences, order)
    vocab = frozenset(t for sent in corpus.sentences for t in sent) | frozenset(_MARKERS)
    pred_vocab = sorted(vocab - {SENT_START})
    v_size = len(pred_vocab)

    # Adjusted ("continuation") counts per level. The top level uses raw
    # counts; lower levels count distinct predecessor types, except that
    # k-grams beginning with the start marker keep raw counts because
    # nothing can precede them.
    adjusted: list[dict] = [dict() for _ in range(order + 1)]
    adjusted[order] = {
        g: c for g, c in raw[order].items() if g[-1] != SENT_START
    }
    for k in range(order - 1, 0, -1):
        cont = Counter()
        for gram in raw[k + 1]:
            cont[gram[1:]] += 1
        level = {}
        for gram, c in raw[k].items():
            if gram[-1] == SENT_START:
                continue
            level[gram] = c if gram[0] == SENT_START else cont.get(gram, 0)
        adjusted[k] = level
    if unknown_count > 0:
        uni = adjusted[1]
        uni[(UNKNOWN,)] = uni.get((UNKNOWN,), 0) + unknown_count

    discounts = [0.0] * (order + 1)
    for k in range(1, order + 1):
        discounts[k] = discount if discount is not None else _estimate_discount(adjusted[k])

    logprobs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}

    # Unigram level: interpolate with uniform over the prediction vocab.
    uni = adjusted[1]
    total1 = float(sum(uni.values()))
    types1 = sum(1 for c in uni.values() if c > 0)
    d1 = discounts[1]
    unigram_probs: dict[str, float] = {}
    for w in pred_vocab:
        a = uni.get((w,), 0)
        p = (max(a - d1, 0.0) + d1 * types1 / v_size) / total1
        unigram_probs[w] = p
        if p > 0.0:
            logprobs[(w,)] = math.log(p)

    def lower_prob(word: str, context: tuple[str, ...]) -> float:
        """Probability at the next level down, by direct table lookup."""
        acc = 0.0
        ctx = context
        while True:
            entry = logprobs.get(ctx + (word,))
            if entry is not None:
                return math.exp(acc + entry)
            if not ctx:
                return 0.0
            acc += backoffs.get(ctx, 0.0)
            ctx = ctx[1:]

    for k in range(2, order + 1):
        level = adjusted[k]
        d = discounts[k]
        ctx_total: Counter = Counter()
        ctx_types: Counter = Counter()
        for gram, a in level.items():
            ctx_total[gram[:-1]] += a
            if a > 0:
                ctx_types[gram[:-1]] += 1
        for ctx, total in ctx_total.items():
            if total <= 0:
                continue
            lam = d * ctx_types[ctx] / total
            backoffs[ctx] = math.log(lam) if lam > 0.0 else float("-inf")
        for gram, a in sorted(level.items()):
            ctx = gram[:-1]
            total = ctx_total[ctx]
            if total <= 0:
                continue
            p = (max(a - d, 0.0) + d * ctx_types[ctx] * lower_prob(gram[-1], ctx[1:])) / total
            if p > 0.0:
                logprobs[gram] = math.log(p)

    return NGramModel(
        order=order,
        vocabulary=vocab,
        logprobs=logprobs,
        backoffs=backoffs,
        name=corpus.name,
    )


@dataclass(frozen=True)
class InterpolationWeights:
    """Convex mixture weights, one per component model."""

    weights: tuple[float, ...]

    def __init__(self, weights):
        weights = tuple(float(w) for w in weights)
        if not weights:
            raise ParameterError("need at least one weight")
        if any(w < 0.0 for w in weights):
            raise ParameterError(f"weights must be non-negative: {weights}")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ParameterError(f"weights must sum to 1: {weights}")
        object.__setattr__(self, "weights", weights)

    def __iter__(self):
        return iter(self.weights)

    def __len__(self):
        return len(self.weights)


def interpolate(models: list[NGramModel], weights) -> NGramModel:
    """Probability-space mixture of models over the union vocabulary.

    Every n-gram stored in any component receives the weighted average of
    the component probabilities, components evaluating absent n-grams via
    their backoff. A component's unknown-word mass is split uniformly
    across union-vocabulary words it does not know, which keeps each
    component normalized over the union vocabulary; backoff weights of
    the result are then recomputed so the mixture is exactly normalized.
    """
    if not isinstance(weights, InterpolationWeights):
        weights = InterpolationWeights(weights)
    if len(models) < 2:
        raise ParameterError("interpolation needs at least two models")
    if len(models) != len(weights):
        raise ParameterError("one weight per model required")
    order = models[0].order
    if any(m.order != order for m in models):
        raise ParameterError("all models must share the same order")

    union_pred = sorted(set().union(*(m.prediction_vocabulary for m in models)))
    union_vocab = frozenset(union_pred) | {SENT_START}
    # Per-component share of the unknown mass for words it does not know.
    shares = []
    for m in models:
        unknown_words = sum(1 for w in union_pred if w not in m.vocabulary)
        shares.append(1.0 / (unknown_words + 1))

    def component_prob(i: int, word: str, context: tuple[str, ...]) -> float:
        m = models[i]
        p = math.exp(m.logprob(word, context))
        if word not in m.vocabulary:
            p *= shares[i]
        return p

    def mixture_prob(word: str, context: tuple[str, ...]) -> float:
        return sum(w * component_prob(i, word, context) for i, w in enumerate(weights))

    logprobs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}

    def result_prob(word: str, context: tuple[str, ...]) -> float:
        acc = 0.0
        ctx = context
        while True:
            entry = logprobs.get(ctx + (word,))
            if entry is not None:
                return math.exp(acc + entry)
            if not ctx:
                return 0.0
            acc += backoffs.get(ctx, 0.0)
            ctx = ctx[1:]

    # Unigram level over the full union vocabulary.
    mixed_unigrams = {w: mixture_prob(w, ()) for w in union_pred}
    norm = sum(mixed_unigrams.values())
    for w, p in mixed_unigrams.items():
        if p > 0.0:
            logprobs[(w,)] = math.log(p / norm)

    # Higher levels: union of stored n-grams; backoff weights are set so
    # that each context's full-vocabulary mass is exactly one.
    for k in range(2, order + 1):
        grams = sorted(set().union(*({g for g in m.logprobs if len(g) == k} for m in models)))
        by_context: dict[tuple[str, ...], list[tuple[str, float]]] = {}
        for gram in grams:
            p = mixture_prob(gram[-1], gram[:-1])
            if p > 0.0:
                by_context.setdefault(gram[:-1], []).append((gram[-1], p))
        for ctx, entries in by_context.items():
            stored_mass = sum(p for _, p in entries)
            lower_mass = sum(result_prob(w, ctx[1:]) for w, _ in entries)
            num = max(1.0 - stored_mass, 0.0)
            den = 1.0 - lower_mass
            if den <= 1e-12:
                bow = 1.0
            else:
                bow = num / den
            backoffs[ctx] = math.log(bow) if bow > 0.0 else float("-inf")
            for w, p in entries:
                logprobs[ctx + (w,)] = math.log(p)

    return NGramModel(order=order, vocabulary=union_vocab, logprobs=logprobs, backoffs=backoffs)


def perplexity(model: NGramModel, tokens: list[str]) -> float:
    """Length-normalized perplexity of one token sequence.

    exp(-(1/T) * sum log P), with T counting every token plus the
    sentence-end event.
    """
    if not tokens:
        raise ParameterError("cannot compute perplexity of an empty segment")
    total, events = model.sentence_logprob(tokens)
    return math.exp(-total / events)


def corpus_perplexity(model: NGramModel, corpus: Corpus) -> float:
    """Perplexity pooled over all sentences of a corpus."""
    if not corpus.sentences:
        raise ParameterError("empty corpus")
    total = 0.0
    events = 0
    for sent in corpus.sentences:
        t, e = model.sentence_logprob(sent)
        total += t
        events += e
    return math.exp(-total / events)


class _MixtureEvaluator:
    """Scores text under the renormalized mixture without materializing it.

    Mirrors :func:`interpolate` exactly: stored n-grams carry the weighted
    component probability, backoff weights renormalize each context, the
    unigram level is normalized over the union vocabulary. Component
    probabilities are precomputed once per model set, so sweeping weight
    vectors (grid search) costs one matrix-vector product plus lazy,
    memoized backoff weights.
    """

    def __init__(self, models: list[NGramModel]):
        self.order = models[0].order
        self.vocabulary = set().union(*(m.vocabulary for m in models))
        union_pred = sorted(set().union(*(m.prediction_vocabulary for m in models)))
        shares = []
        for m in models:
            unknown_words = sum(1 for w in union_pred if w not in m.vocabulary)
            shares.append(1.0 / (unknown_words + 1))

        def component_prob(i, word, context):
            p = math.exp(models[i].logprob(word, context))
            if word not in models[i].vocabulary:
                p *= shares[i]
            return p

        self.level_grams: list[list[tuple[str, ...]]] = [[] for _ in range(self.order + 1)]
        self.level_grams[1] = [(w,) for w in union_pred]
        for k in range(2, self.order + 1):
            self.level_grams[k] = sorted(
                set().union(*({g for g in m.logprobs if len(g) == k} for m in models))
            )
        self.comp: list = [None] * (self.order + 1)
        self.index: list[dict] = [dict() for _ in range(self.order + 1)]
        self.children: list[dict] = [dict() for _ in range(self.order + 1)]
        for k in range(1, self.order + 1):
            rows = []
            for pos, gram in enumerate(self.level_grams[k]):
                rows.append(
                    [component_prob(i, gram[-1], gram[:-1]) for i in range(len(models))]
                )
                self.index[k][gram] = pos
                self.children[k].setdefault(gram[:-1], []).append(pos)
            self.comp[k] = np.array(rows) if rows else np.zeros((0, len(models)))
        self.vals: list = [None] * (self.order + 1)
        self._bows: dict[tuple[str, ...], float] = {}
        self._unigram_norm = 1.0

    def set_weights(self, weights) -> None:
        w = np.asarray(list(weights), dtype=float)
        self.vals = [None] + [self.comp[k] @ w for k in range(1, self.order + 1)]
        self._bows = {}
        self._unigram_norm = float(self.vals[1].sum())

    def _stored(self, gram):
        pos = self.index[len(gram)].get(gram)
        if pos is None:
            return None
        v = float(self.vals[len(gram)][pos])
        if len(gram) == 1:
            v /= self._unigram_norm
        return v if v > 0.0 else None

    def _bow(self, ctx) -> float:
        cached = self._bows.get(ctx)
        if cached is not None:
            return cached
        level = len(ctx) + 1
        positions = self.children[level].get(ctx)
        if not positions:
            bow = 1.0
        else:
            vals = self.vals[level]
            stored_mass = 0.0
            lower_mass = 0.0
            for pos in positions:
                v = float(vals[pos])
                if v > 0.0:
                    stored_mass += v
                    lower_mass += self._prob(self.level_grams[level][pos][-1], ctx[1:])
            num = max(1.0 - stored_mass, 0.0)
            den = 1.0 - lower_mass
            bow = 1.0 if den <= 1e-12 else num / den
        self._bows[ctx] = bow
        return bow

    def _prob(self, word: str, ctx: tuple[str, ...]) -> float:
        acc = 1.0
        while True:
            v = self._stored(ctx + (word,))
            if v is not None:
                return acc * v
            if not ctx:
                return 0.0
            acc *= self._bow(ctx)
            ctx = ctx[1:]

    def _map(self, token: str) -> str:
        return token if token in self.vocabulary else UNKNOWN

    def sentence_logprob(self, tokens: list[str]) -> tuple[float, int]:
        if not tokens:
            raise ParameterError("cannot score an empty token list")
        context: tuple[str, ...] = (SENT_START,) if self.order > 1 else ()
        total = 0.0
        for tok in list(tokens) + [SENT_END]:
            w = self._map(tok)
            p = self._prob(w, context)
            total += math.log(p) if p > 0.0 else float("-inf")
            if tok != SENT_END and self.order > 1:
                context = (context + (w,))[-(self.order - 1):]
        return total, len(tokens) + 1


def _simplex_grid(k: int, steps: int):
    """All weight vectors with components i/steps summing to 1 (lexicographic)."""

    def rec(prefix, remaining, slots):
        if slots == 1:
            yield prefix + (remaining,)
            return
        for c in range(remaining + 1):
            yield from rec(prefix + (c,), remaining - c, slots - 1)

    for composition in rec((), steps, k):
        yield tuple(c / steps for c in composition)


def _reweight(weights: tuple[float, ...], index: int, value: float) -> tuple[float, ...]:
    """Set one coordinate, rescaling the others to keep the simplex."""
    k = len(weights)
    rest = 1.0 - weights[index]
    out = []
    for j, w in enumerate(weights):
        if j == index:
            out.append(value)
        elif rest > 1e-12:
            out.append(w * (1.0 - value) / rest)
        else:
            out.append((1.0 - value) / (k - 1))
    return tuple(out)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def optimize_weights(
    components: list[NGramModel],
    dev: Corpus,
    step: float = 0.05,
    refine_iterations: int = 16,
) -> InterpolationWeights:
    """Mixture weights minimizing dev-set perplexity of the interpolation.

    Deterministic: a full simplex grid search (default step 0.05)
    followed by one golden-section pass per coordinate, accepting only
    improvements. The returned perplexity is therefore never worse than
    any evaluated grid point.
    """
    if not dev.sentences:
        raise ParameterError("empty development corpus")
    if len(components) == 1:
        return InterpolationWeights((1.0,))

    steps = int(round(1.0 / step))
    evaluator = _MixtureEvaluator(components)

    def objective(weights: tuple[float, ...]) -> float:
        evaluator.set_weights(weights)
        return corpus_perplexity(evaluator, dev)

    best_w: tuple[float, ...] | None = None
    best_ppl = math.inf
    for w in _simplex_grid(len(components), steps):
        ppl = objective(w)
        if ppl < best_ppl:
            best_ppl = ppl
            best_w = w
    assert best_w is not None

    for i in range(len(components)):
        lo = max(0.0, best_w[i] - step)
        hi = min(1.0, best_w[i] + step)
        a, b = lo, hi
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        fc = objective(_reweight(best_w, i, c))
        fd = objective(_reweight(best_w, i, d))
        cand_v, cand_f = (c, fc) if fc < fd else (d, fd)
        for _ in range(refine_iterations):
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - _INV_PHI * (b - a)
                fc = objective(_reweight(best_w, i, c))
            else:
                a, c, fc = c, d, fd
                d = a + _INV_PHI * (b - a)
                fd = objective(_reweight(best_w, i, d))
            point, value = (c, fc) if fc < fd else (d, fd)
            if value < cand_f:
                cand_v, cand_f = point, value
        if cand_f < best_ppl:
            best_ppl = cand_f
            best_w = _reweight(best_w, i, cand_v)

    total = sum(best_w)
    return InterpolationWeights(tuple(w / total for w in best_w))


# ---------------------------------------------------------------------------
# ARPA-compatible serialization (log10 probabilities and backoffs).


def write_arpa(model: NGramModel, path) -> None:
    grams_by_order: list[list[tuple[str, ...]]] = [[] for _ in range(model.order + 1)]
    for gram in model.logprobs:
        grams_by_order[len(gram)].append(gram)
    if model.order >= 2:
        grams_by_order[1].append((SENT_START,))
    for level in grams_by_order:
        level.sort()

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for k in range(1, model.order + 1):
            fh.write(f"ngram {k}={len(grams_by_order[k])}\n")
        fh.write("\n")
        for k in range(1, model.order + 1):
            fh.write(f"\\{k}-grams:\n")
            for gram in grams_by_order[k]:
                if gram == (SENT_START,):
                    lp10 = -99.0
                else:
                    lp10 = model.logprobs[gram] / LOG10
                fields = [f"{lp10:.17g}", " ".join(gram)]
                if k < model.order and gram in model.backoffs:
                    bow = model.backoffs[gram]
                    fields.append(f"{max(bow / LOG10, -99.0):.17g}")
                fh.write("\t".join(fields) + "\n")
            fh.write("\n")
        fh.write("\\end\\\n")


def read_arpa(path) -> NGramModel:
    logprobs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}
    declared: dict[int, int] = {}
    vocab: set[str] = set(_MARKERS)
    section = 0
    in_data = False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line == "\\data\\":
                in_data = True
                continue
            if line == "\\end\\":
                break
            if line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:].split("-")[0])
                in_data = False
                continue
            if in_data:
                if not line.startswith("ngram"):
                    raise FormatError(f"bad ARPA data line: {line!r}")
                k, n = line[len("ngram"):].split("=")
                declared[int(k)] = int(n)
                continue
            if section == 0:
                raise FormatError(f"ARPA entry outside any section: {line!r}")
            fields = line.split()
            if len(fields) == section + 2:
                bow10 = float(fields[-1])
                tokens = fields[1:-1]
            elif len(fields) == section + 1:
                bow10 = None
                tokens = fields[1:]
            else:
                raise FormatError(f"bad ARPA line in {section}-gram section: {line!r}")
            gram = tuple(tokens)
            vocab.update(tokens)
            lp10 = float(fields[0])
            if gram != (SENT_START,):
                logprobs[gram] = lp10 * LOG10
            if bow10 is not None:
                backoffs[gram] = bow10 * LOG10
    if not declared:
        raise FormatError("missing \\data\\ header")
    order = max(declared)
    return NGramModel(
        order=order, vocabulary=frozenset(vocab), logprobs=logprobs, backoffs=backoffs
    )
