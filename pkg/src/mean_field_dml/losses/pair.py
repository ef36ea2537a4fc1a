"""Pair-based losses: every sample interacts with every other sample of the batch.

Class sets and class sizes are taken from the batch. Double sums over a class
include the i == j self-pairs, whose distance is exactly zero.
"""

from __future__ import annotations

import numpy as np

from mean_field_dml.losses.classes import BatchClasses
from mean_field_dml.models import Batch, LossResult
from mean_field_dml.numerics import grouped_logsumexp, self_distances, self_distances_backward
from mean_field_dml.schema import ContrastiveParams, CWMSParams, DistanceKind


def contrastive_loss(batch: Batch, params: ContrastiveParams, kind: DistanceKind) -> LossResult:
    """Hinge on positive distances above m_P and negative distances below m_N.

    Positive pairs are weighted 1/(2|C||D_c|^2); ordered negative pairs across
    classes c != c' are weighted 1/(2|C||D_c||D_c'|).
    """
    classes = BatchClasses.of(batch)
    x = batch.embeddings
    dist = self_distances(x, kind)
    same = classes.dense_labels[:, None] == classes.dense_labels[None, :]
    counts = classes.sample_counts()
    weights = 1.0 / (2.0 * classes.num_present * np.outer(counts, counts))

    margins = np.where(same, dist - params.m_p, params.m_n - dist)
    active = margins > 0.0
    value = float(np.sum(np.where(active, weights * margins, 0.0)))

    upstream = np.where(active, np.where(same, weights, -weights), 0.0)
    np.fill_diagonal(upstream, 0.0)
    return LossResult(value=value, grad_embeddings=self_distances_backward(x, upstream, kind))


def cwms_loss(batch: Batch, params: CWMSParams, kind: DistanceKind) -> LossResult:
    """Class-wise multi-similarity loss.

    One soft-plus of a log-sum-exp per class block: diagonal blocks hold the
    positive pairs (scale alpha, normaliser 2|D_c|^2), off-diagonal blocks the
    negative pairs of an ordered class pair (scale -beta, normaliser |D_c||D_c'|).
    """
    classes = BatchClasses.of(batch)
    num_present = classes.num_present
    dense = classes.dense_labels
    x = batch.embeddings
    dist = self_distances(x, kind)
    same = dense[:, None] == dense[None, :]
    counts = classes.sample_counts()
    log_pair_counts = np.log(np.outer(counts, counts))

    scaled = np.where(
        same,
        params.alpha * (dist - params.delta) - np.log(2.0) - log_pair_counts,
        -params.beta * (dist - params.delta) - log_pair_counts,
    )
    row_blocks = grouped_logsumexp(scaled, dense, num_present)
    block_lse = grouped_logsumexp(row_blocks.T, dense, num_present).T
    block_values = np.logaddexp(0.0, block_lse)

    diagonal = np.eye(num_present, dtype=bool)
    coefficients = np.where(diagonal, 1.0 / (params.alpha * num_present), 1.0 / (2.0 * params.beta * num_present))
    value = float(np.sum(coefficients * block_values))

    shares = np.exp(scaled - block_values[dense[:, None], dense[None, :]])
    upstream = np.where(same, shares / num_present, -shares / (2.0 * num_present))
    np.fill_diagonal(upstream, 0.0)
    return LossResult(value=value, grad_embeddings=self_distances_backward(x, upstream, kind))
