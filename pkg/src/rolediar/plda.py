"""Two-covariance PLDA: EM training, in-domain adaptation, LLR scoring.

The generative model is x = mean + y + e with y ~ N(0, between_cov) and
e ~ N(0, within_cov). The similarity of two embeddings is the
log-likelihood ratio between the same-speaker joint density (shared y
marginalized out) and the product of the independent marginals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import FormatError, ModelError, ParameterError, TrainingError

SYMMETRY_TOL = 1e-10


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def _regularize_within(within: np.ndarray) -> np.ndarray:
    """Add 1e-6 * trace/D to the diagonal if Cholesky fails."""
    try:
        np.linalg.cholesky(within)
        return within
    except np.linalg.LinAlgError:
        d = within.shape[0]
        fixed = within + np.eye(d) * (1e-6 * np.trace(within) / d)
        try:
            np.linalg.cholesky(fixed)
        except np.linalg.LinAlgError as exc:
            raise ModelError("within-class covariance is not positive definite") from exc
        return fixed


@dataclass(frozen=True)
class PldaModel:
    mean: np.ndarray
    between_cov: np.ndarray
    within_cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        between = np.asarray(self.between_cov, dtype=float)
        within = np.asarray(self.within_cov, dtype=float)
        d = mean.shape[0]
        if between.shape != (d, d) or within.shape != (d, d):
            raise ModelError("covariance shapes must match the mean dimension")
        if np.abs(between - between.T).max() > SYMMETRY_TOL:
            raise ModelError("between-class covariance is not symmetric")
        if np.abs(within - within.T).max() > SYMMETRY_TOL:
            raise ModelError("within-class covariance is not symmetric")
        between = _symmetrize(between)
        within = _symmetrize(within)
        try:
            np.linalg.cholesky(within)
        except np.linalg.LinAlgError as exc:
            raise ModelError("within-class covariance must be positive definite") from exc
        eigvals = np.linalg.eigvalsh(between)
        if eigvals.min() < -1e-8 * max(1.0, eigvals.max()):
            raise ModelError("between-class covariance must be positive semi-definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "between_cov", between)
        object.__setattr__(self, "within_cov", within)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _group_by_speaker(embeddings) -> list[np.ndarray]:
    groups: dict = {}
    for vector, speaker in embeddings:
        groups.setdefault(speaker, []).append(np.asarray(vector, dtype=float))
    return [np.stack(groups[k]) for k in sorted(groups, key=str)]


def _moment_init(groups: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Global mean, pooled within-speaker scatter, scatter of speaker means."""
    all_x = np.concatenate(groups, axis=0)
    n_total = all_x.shape[0]
    mean = all_x.mean(axis=0)
    d = all_x.shape[1]
    within = np.zeros((d, d))
    between = np.zeros((d, d))
    for x in groups:
        mu = x.mean(axis=0)
        centered = x - mu
        within += centered.T @ centered
        diff = (mu - mean)[:, None]
        between += diff @ diff.T
    within /= n_total
    between /= len(groups)
    return mean, _symmetrize(between), _symmetrize(within)


def _posterior(
    x: np.ndarray, mean: np.ndarray, between: np.ndarray, within: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance of the speaker offset given samples."""
    n = x.shape[0]
    xbar = x.mean(axis=0)
    cov = between + within / n
    gain = between @ np.linalg.solve(cov, np.eye(cov.shape[0]))
    m = gain @ (xbar - mean)
    c = _symmetrize(between - gain @ between)
    return m, c


def log_likelihood(model: PldaModel, embeddings) -> float:
    """Total marginal log-likelihood of labeled embeddings under the model."""
    groups = _group_by_speaker(embeddings)
    mean, between, within = model.mean, model.between_cov, model.within_cov
    d = model.dim
    chol_w = np.linalg.cholesky(within)
    logdet_w = 2.0 * np.log(np.diag(chol_w)).sum()
    total = 0.0
    for x in groups:
        n = x.shape[0]
        xbar = x.mean(axis=0)
        centered = x - xbar
        # within part: -1/2 tr(W^-1 S) - (n-1)/2 log|2 pi W| - (D/2) log n
        solved = scipy.linalg.cho_solve((chol_w, True), centered.T)
        tr_term = float((centered.T * solved).sum())
        total += -0.5 * tr_term
        total += -0.5 * (n - 1) * (d * math.log(2 * math.pi) + logdet_w)
        total += -0.5 * d * math.log(n)
        # mean part: N(xbar; mean, between + within/n)
        cov = between + within / n
        chol = np.linalg.cholesky(cov)
        diff = xbar - mean
        z = scipy.linalg.solve_triangular(chol, diff, lower=True)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        total += -0.5 * (d * math.log(2 * math.pi) + logdet + float(z @ z))
    return total


def train_plda(
    embeddings,
    iterations: int = 10,
    history: list[float] | None = None,
) -> PldaModel:
    """EM estimate of the two-covariance model from (vector, speaker) pairs.

    ``iterations=0`` returns the moment initialization (global mean,
    pooled within-speaker scatter, scatter of speaker means). When
    ``history`` is given, the data log-likelihood after each iteration is
    appended to it (starting with the initialization's likelihood).
    """
    if iterations < 0:
        raise ParameterError("iterations must be non-negative")
    pairs = list(embeddings)
    if not pairs:
        raise TrainingError("no training embeddings")
    groups = _group_by_speaker(pairs)
    if len(groups) < 2:
        raise TrainingError("PLDA training needs at least two speakers")
    if all(g.shape[0] < 2 for g in groups):
        raise TrainingError("PLDA training needs a speaker with at least two samples")

    mean, between, within = _moment_init(groups)
    within = _regularize_within(within)
    n_total = sum(g.shape[0] for g in groups)
    d = mean.shape[0]

    if history is not None:
        history.append(log_likelihood(PldaModel(mean, between, within), pairs))

    for _ in range(iterations):
        posteriors = [_posterior(x, mean, between, within) for x in groups]
        # mean update, then within/between given the posteriors
        shift = sum(x.shape[0] * m for x, (m, _) in zip(groups, posteriors))
        mean = np.concatenate(groups, axis=0).mean(axis=0) - shift / n_total
        new_within = np.zeros((d, d))
        new_between = np.zeros((d, d))
        for x, (m, c) in zip(groups, posteriors):
            n = x.shape[0]
            resid = x - mean - m
            new_within += resid.T @ resid + n * c
            new_between += np.outer(m, m) + c
        within = _regularize_within(_symmetrize(new_within / n_total))
        # keep the between covariance PSD against numerical drift
        between = _symmetrize(new_between / len(groups))
        eigvals, eigvecs = np.linalg.eigh(between)
        between = _symmetrize((eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T)
        if history is not None:
            history.append(log_likelihood(PldaModel(mean, between, within), pairs))

    return PldaModel(mean, between, within)


def adapt(model: PldaModel, in_domain, alpha: float = 0.5) -> PldaModel:
    """Recenter on in-domain data and interpolate the total covariance.

    The total covariance moves by alpha toward the in-domain sample
    covariance and is then split between the two covariances in the
    model's original between/total proportion along each eigen-direction
    of the interpolated total. alpha = 0 recenters the mean only; the
    split keeps the between part PSD and the within part PD whenever the
    interpolated total is PD.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError("alpha must lie in [0, 1]")
    x = np.asarray(list(in_domain), dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ParameterError("in-domain data must be a non-empty set of vectors")
    if x.shape[1] != model.dim:
        raise ParameterError("in-domain dimension does not match the model")
    new_mean = x.mean(axis=0)
    if alpha == 0.0:
        return PldaModel(new_mean, model.between_cov, model.within_cov)

    total = _symmetrize(model.between_cov + model.within_cov)
    centered = x - new_mean
    in_cov = _symmetrize(centered.T @ centered / x.shape[0])
    new_total = _symmetrize((1.0 - alpha) * total + alpha * in_cov)

    eigvals, u = np.linalg.eigh(new_total)
    eigvals = np.clip(eigvals, 0.0, None)
    between_var = np.einsum("ij,jk,ki->i", u.T, model.between_cov, u)
    total_var = np.einsum("ij,jk,ki->i", u.T, total, u)
    ratios = np.clip(between_var / total_var, 0.0, 1.0)
    new_between = _symmetrize((u * (ratios * eigvals)) @ u.T)
    new_within = _regularize_within(_symmetrize((u * ((1.0 - ratios) * eigvals)) @ u.T))
    return PldaModel(new_mean, new_between, new_within)


class PairScorer:
    """Precomputed same/different-speaker LLR scorer for one model.

    The joint same-speaker covariance is [[T, B], [B, T]] with
    T = between + within; its inverse has the block form [[P, Q], [Q, P]]
    where P is the inverse Schur complement. The score of (v, r) is
      0.5 v'(T^-1 - P)v + 0.5 r'(T^-1 - P)r - v'Qr + 0.5(log|T| - log|S|)
    with S the Schur complement; all terms vanish when between = 0.
    """

    def __init__(self, model: PldaModel):
        self.model = model
        total = _symmetrize(model.between_cov + model.within_cov)
        try:
            chol_t = np.linalg.cholesky(total)
        except np.linalg.LinAlgError as exc:
            raise ModelError("total covariance must be positive definite") from exc
        tinv = scipy.linalg.cho_solve((chol_t, True), np.eye(model.dim))
        schur = total - model.between_cov @ tinv @ model.between_cov
        try:
            chol_s = np.linalg.cholesky(schur)
        except np.linalg.LinAlgError as exc:
            raise ModelError("degenerate joint covariance") from exc
        p = scipy.linalg.cho_solve((chol_s, True), np.eye(model.dim))
        logdet_t = 2.0 * np.log(np.diag(chol_t)).sum()
        logdet_s = 2.0 * np.log(np.diag(chol_s)).sum()
        self._half_a = 0.5 * (tinv - p)  # quadratic "own" term, halved
        self._q = _symmetrize(p @ model.between_cov @ tinv)  # cross term
        self._const = 0.5 * (logdet_t - logdet_s)

    def score(self, v: np.ndarray, r: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        r = np.asarray(r, dtype=float)
        if v.shape != (self.model.dim,) or r.shape != (self.model.dim,):
            raise ParameterError("embedding dimension does not match the model")
        v = v - self.model.mean
        r = r - self.model.mean
        own = float(v @ self._half_a @ v) + float(r @ self._half_a @ r)
        cross = 0.5 * (float(v @ self._q @ r) + float(r @ self._q @ v))
        return self._const + own + cross

    def score_matrix(self, vs: np.ndarray, rs: np.ndarray) -> np.ndarray:
        """Pairwise scores, rows indexing ``vs`` and columns ``rs``."""
        vs = np.atleast_2d(np.asarray(vs, dtype=float)) - self.model.mean
        rs = np.atleast_2d(np.asarray(rs, dtype=float)) - self.model.mean
        own_v = np.einsum("ij,jk,ik->i", vs, self._half_a, vs)
        own_r = np.einsum("ij,jk,ik->i", rs, self._half_a, rs)
        cross = vs @ self._q @ rs.T
        return self._const + own_v[:, None] + own_r[None, :] + cross


def score(model: PldaModel, v: np.ndarray, r: np.ndarray) -> float:
    """Same/different-speaker log-likelihood ratio for one pair."""
    return PairScorer(model).score(v, r)


# ---------------------------------------------------------------------------
# Model files: dimension header, then the mean row, then the between-class
# rows, then the within-class rows, full-precision decimal.


def write_plda(path, model: PldaModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{model.dim}\n")
        rows = [model.mean] + list(model.between_cov) + list(model.within_cov)
        for row in rows:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_plda(path) -> PldaModel:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise FormatError("empty PLDA model file")
    try:
        d = int(lines[0])
    except ValueError as exc:
        raise FormatError(f"bad PLDA header: {lines[0]!r}") from exc
    values = []
    for ln in lines[1:]:
        try:
            values.extend(float(v) for v in ln.split())
        except ValueError as exc:
            raise FormatError(f"bad PLDA value row: {ln!r}") from exc
    if len(values) != d + 2 * d * d:
        raise FormatError(f"PLDA file has {len(values)} values, expected {d + 2 * d * d}")
    arr = np.array(values, dtype=float)
    mean = arr[:d]
    between = arr[d : d + d * d].reshape(d, d)
    within = arr[d + d * d :].reshape(d, d)
    return PldaModel(mean, between, within)
