"""Mean-field losses: samples interact with per-class mean fields instead of each other.

Sample terms average over the classes present in the batch. Negative terms
range over every bank class, and the soft constraint on mean-field separation
averages over the whole bank.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from mean_field_dml.losses.classes import BatchClasses, require_bank_coverage
from mean_field_dml.models import Batch, LossResult, MeanFieldBank
from mean_field_dml.numerics import (
    grouped_logsumexp,
    pairwise_distances,
    pairwise_distances_backward,
    rowwise_distances,
    self_distances,
    self_distances_backward,
)
from mean_field_dml.schema import DistanceKind, MFContParams, MFCWMSParams


def mfcont_loss(batch: Batch, bank: MeanFieldBank, params: MFContParams, kind: DistanceKind) -> LossResult:
    require_bank_coverage(batch, bank)
    classes = BatchClasses.of(batch)
    x, fields = batch.embeddings, bank.vectors
    dist, own = _sample_to_field_distances(batch, bank, kind)
    weights = 1.0 / (classes.num_present * classes.sample_counts())

    margins = np.where(own, dist - params.m_p, params.m_n - dist)
    active = margins > 0.0
    value = float(np.sum(np.where(active, weights[:, None] * margins, 0.0)))

    upstream = np.where(active, np.where(own, 1.0, -1.0) * weights[:, None], 0.0)
    grad_x, grad_fields = pairwise_distances_backward(x, fields, upstream, kind)

    if params.lambda_mf > 0.0:
        reg_value, reg_grad = _separation_penalty(fields, params.lambda_mf, kind, params.m_n)
        value += reg_value
        grad_fields = grad_fields + reg_grad
    return LossResult(value=value, grad_embeddings=grad_x, grad_meanfields=grad_fields)


def mfcwms_loss(batch: Batch, bank: MeanFieldBank, params: MFCWMSParams, kind: DistanceKind) -> LossResult:
    """Mean-field class-wise multi-similarity loss.

    For an ordered bank pair (c, c') the negative logarithm joins samples of c
    measured against M_c' and samples of c' measured against M_c, so both
    orderings of a pair share one value.
    """
    require_bank_coverage(batch, bank)
    classes = BatchClasses.of(batch)
    num_present = classes.num_present
    labels = batch.labels
    num_fields = bank.num_classes
    x, fields = batch.embeddings, bank.vectors
    dist, own = _sample_to_field_distances(batch, bank, kind)
    log_counts = np.log(classes.sample_counts())
    rows = np.arange(batch.size)

    positive = params.alpha * (dist[rows, labels] - params.delta) - log_counts
    positive_values = np.logaddexp(0.0, grouped_logsumexp(positive, labels, num_fields))
    value = float(np.sum(positive_values)) / (params.alpha * num_present)

    negative = np.where(own, -np.inf, -params.beta * (dist - params.delta) - log_counts[:, None])
    block = grouped_logsumexp(negative, labels, num_fields)
    pair_values = np.logaddexp(0.0, np.logaddexp(block, block.T))
    np.fill_diagonal(pair_values, 0.0)
    value += float(np.sum(pair_values)) / (2.0 * params.beta * num_present)

    upstream = -np.exp(negative - pair_values[labels]) / num_present
    upstream[rows, labels] = np.exp(positive - positive_values[labels]) / num_present
    grad_x, grad_fields = pairwise_distances_backward(x, fields, upstream, kind)

    if params.lambda_mf > 0.0:
        reg_value, reg_grad = _softplus_separation_penalty(fields, params, kind)
        value += reg_value
        grad_fields = grad_fields + reg_grad
    return LossResult(value=value, grad_embeddings=grad_x, grad_meanfields=grad_fields)


def _sample_to_field_distances(batch: Batch, bank: MeanFieldBank, kind: DistanceKind) -> tuple[np.ndarray, np.ndarray]:
    rows = np.arange(batch.size)
    dist = pairwise_distances(batch.embeddings, bank.vectors, kind)
    dist[rows, batch.labels] = rowwise_distances(batch.embeddings, bank.vectors[batch.labels], kind)
    own = np.zeros(dist.shape, dtype=bool)
    own[rows, batch.labels] = True
    return dist, own


def _separation_penalty(
    fields: np.ndarray,
    lambda_mf: float,
    kind: DistanceKind,
    m_n: float,
) -> tuple[float, np.ndarray]:
    """lambda/|C| * sum over ordered pairs c != c' of [m_N - d(M_c, M_c')]_+^2."""
    scale = lambda_mf / fields.shape[0]
    gaps = np.maximum(m_n - self_distances(fields, kind), 0.0)
    np.fill_diagonal(gaps, 0.0)
    value = scale * float(np.sum(gaps**2))
    grad = self_distances_backward(fields, -2.0 * scale * gaps, kind)
    return value, grad


def _softplus_separation_penalty(fields: np.ndarray, params: MFCWMSParams, kind: DistanceKind) -> tuple[float, np.ndarray]:
    """lambda/|C| * sum over ordered pairs c != c' of log(1 + exp(-beta (d(M_c, M_c') - delta)))^2."""
    scale = params.lambda_mf / fields.shape[0]
    logits = -params.beta * (self_distances(fields, kind) - params.delta)
    softplus = np.logaddexp(0.0, logits)
    off_diagonal = ~np.eye(fields.shape[0], dtype=bool)
    value = scale * float(np.sum(softplus[off_diagonal] ** 2))
    upstream = np.where(off_diagonal, -2.0 * scale * params.beta * softplus * expit(logits), 0.0)
    return value, self_distances_backward(fields, upstream, kind)
