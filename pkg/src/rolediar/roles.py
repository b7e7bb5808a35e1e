"""Role recognition: minimum-perplexity assignment and role-LM mixing.

A segment is assigned the role whose language model yields the lowest
length-normalized perplexity; the assignment confidence is the gap
between the best and second-best perplexity. The role LMs themselves
are mixtures of a background model, the role's own model and the other
roles' models, with weights tuned on role-specific development data.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import lm
from .core import RoleLabel, TextSegment, TimeInterval, make_role_labels
from .errors import ParameterError


@dataclass(frozen=True)
class RoleAssignment:
    """Per-segment role decision with the full perplexity vector."""

    segment_id: int
    role: RoleLabel
    perplexities: tuple[float, ...]
    confidence: float


def assign_role(
    segment: TextSegment,
    role_models: list[lm.NGramModel],
    roles: list[RoleLabel] | None = None,
) -> RoleAssignment:
    """Assign the minimum-perplexity role; ties go to the lowest index.

    Confidence is the smallest absolute perplexity gap between the
    winning role and any other role (0 when the two best tie).
    """
    if len(role_models) < 2:
        raise ParameterError("need at least two role models")
    if not segment.words:
        raise ParameterError("cannot assign a role to an empty segment")
    if roles is None:
        roles = make_role_labels([f"role{i + 1}" for i in range(len(role_models))])
    if len(roles) != len(role_models):
        raise ParameterError("one role label per model required")
    pps = tuple(lm.perplexity(m, segment.tokens) for m in role_models)
    best = min(range(len(pps)), key=lambda i: (pps[i], i))
    confidence = min(abs(pps[j] - pps[best]) for j in range(len(pps)) if j != best)
    return RoleAssignment(
        segment_id=segment.segment_id,
        role=roles[best],
        perplexities=pps,
        confidence=confidence,
    )


def assign_roles(
    segments: list[TextSegment],
    role_models: list[lm.NGramModel],
    roles: list[RoleLabel] | None = None,
) -> list[RoleAssignment]:
    return [assign_role(seg, role_models, roles) for seg in segments]


def language_only_diarize(
    segments: list[TextSegment],
    role_models: list[lm.NGramModel],
    session_id: str = "",
    roles: list[RoleLabel] | None = None,
):
    """Label each segment's time span with its assigned role.

    This is the language-only baseline: the hypothesis uses audio only
    for the segment timestamps. Returns a DiarizationHypothesis.
    """
    from .diarize import DiarizationHypothesis

    records: list[tuple[TimeInterval, str]] = []
    for seg in segments:
        assignment = assign_role(seg, role_models, roles)
        records.append((seg.interval, assignment.role.name))
    return DiarizationHypothesis(session_id=session_id, records=tuple(records))


# ---------------------------------------------------------------------------
# Role LM construction: background + own-role + other-roles mixtures.


def mix_role_models(
    background: lm.NGramModel,
    role_models: list[lm.NGramModel],
    dev_corpora: list[lm.Corpus],
) -> list[lm.NGramModel]:
    """Build the final per-role mixture models.

    For each role the background model, the role's own model and the
    equal-weight mixture of the remaining roles' models are interpolated,
    with weights chosen to minimize perplexity on that role's development
    corpus.
    """
    n = len(role_models)
    if n < 2:
        raise ParameterError("need at least two roles")
    if len(dev_corpora) != n:
        raise ParameterError("one development corpus per role required")
    mixed = []
    for i in range(n):
        others = [m for j, m in enumerate(role_models) if j != i]
        if len(others) == 1:
            other_mix = others[0]
        else:
            other_mix = lm.interpolate(others, [1.0 / len(others)] * len(others))
        components = [background, role_models[i], other_mix]
        weights = lm.optimize_weights(components, dev_corpora[i])
        mixed.append(lm.interpolate(components, weights))
    return mixed


def mix_background_model(
    background: lm.NGramModel,
    role_models: list[lm.NGramModel],
    dev: lm.Corpus,
) -> lm.NGramModel:
    """Mix the background model with the pooled role models.

    Used as the wide-coverage recognizer-side model; the pooled role
    mixture is the equal-weight interpolation of all role models.
    """
    if len(role_models) < 1:
        raise ParameterError("need at least one role model")
    if len(role_models) == 1:
        pooled = role_models[0]
    else:
        pooled = lm.interpolate(role_models, [1.0 / len(role_models)] * len(role_models))
    weights = lm.optimize_weights([background, pooled], dev)
    return lm.interpolate([background, pooled], weights)


# ---------------------------------------------------------------------------
# Role-assignment dump:
#   <session-id> <segment-id> <role-name> <pp-role-1> ... <confidence>


def format_role_assignments(session_id: str, assignments: list[RoleAssignment]) -> str:
    lines = []
    for a in assignments:
        pps = " ".join(f"{p:.6f}" for p in a.perplexities)
        lines.append(f"{session_id} {a.segment_id} {a.role.name} {pps} {a.confidence:.6f}")
    return "\n".join(lines) + ("\n" if lines else "")


def write_role_assignments(path, session_id: str, assignments: list[RoleAssignment]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_role_assignments(session_id, assignments))
