"""Distances, hinges and stable log-exp primitives shared by every loss.

All arithmetic is float64. Pairwise helpers return dense matrices and come with
an explicit backward pass so losses can chain gradients without autodiff.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from mean_field_dml.errors import ShapeError
from mean_field_dml.schema import DistanceKind


def distance(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray, kind: DistanceKind) -> float:
    a_vec, b_vec = _as_pair(a, b, kind)
    if kind == DistanceKind.SQ_EUCLIDEAN:
        diff = a_vec - b_vec
        return float(np.dot(diff, diff))
    similarity = np.dot(a_vec, b_vec) / (np.linalg.norm(a_vec) * np.linalg.norm(b_vec))
    return float(np.clip(1.0 - similarity, 0.0, 2.0))


def distance_grad(
    a: Sequence[float] | np.ndarray,
    b: Sequence[float] | np.ndarray,
    kind: DistanceKind,
) -> tuple[np.ndarray, np.ndarray]:
    a_vec, b_vec = _as_pair(a, b, kind)
    if kind == DistanceKind.SQ_EUCLIDEAN:
        grad_a = 2.0 * (a_vec - b_vec)
        return grad_a, -grad_a
    norm_a = np.linalg.norm(a_vec)
    norm_b = np.linalg.norm(b_vec)
    unit_a = a_vec / norm_a
    unit_b = b_vec / norm_b
    similarity = np.dot(unit_a, unit_b)
    grad_a = -(unit_b - similarity * unit_a) / norm_a
    grad_b = -(unit_a - similarity * unit_b) / norm_b
    return grad_a, grad_b


def hinge(x: float) -> float:
    return float(max(x, 0.0))


def log1p_sum_exp_scaled(terms: Sequence[float] | np.ndarray, log_denominator: float) -> float:
    """log(1 + sum(exp(terms)) / exp(log_denominator)) without overflow."""
    values = np.asarray(terms, dtype=np.float64)
    if values.size == 0:
        return 0.0
    return float(np.logaddexp(0.0, logsumexp(values) - log_denominator))


def pairwise_distances(left: np.ndarray, right: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """Dense distance matrix D[i, j] = d(left[i], right[j])."""
    left, right = _as_matrices(left, right, kind)
    if kind == DistanceKind.SQ_EUCLIDEAN:
        left_sq = np.einsum("ij,ij->i", left, left)
        right_sq = np.einsum("ij,ij->i", right, right)
        dist = left_sq[:, None] + right_sq[None, :] - 2.0 * (left @ right.T)
        return np.maximum(dist, 0.0)
    similarity = row_normalize(left) @ row_normalize(right).T
    return np.clip(1.0 - similarity, 0.0, 2.0)


def rowwise_distances(left: np.ndarray, right: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """d(left[i], right[i]) for every row, computed without the expansion used for matrices."""
    left, right = _as_matrices(left, right, kind)
    if left.shape != right.shape:
        raise ShapeError(f"rowwise distances need equal shapes, got {left.shape} and {right.shape}")
    if kind == DistanceKind.SQ_EUCLIDEAN:
        diff = left - right
        return np.einsum("ij,ij->i", diff, diff)
    similarity = np.einsum("ij,ij->i", row_normalize(left), row_normalize(right))
    return np.clip(1.0 - similarity, 0.0, 2.0)


def self_distances(points: np.ndarray, kind: DistanceKind) -> np.ndarray:
    """pairwise_distances(points, points) with an exactly zero diagonal."""
    dist = pairwise_distances(points, points, kind)
    np.fill_diagonal(dist, 0.0)
    return dist


def pairwise_distances_backward(
    left: np.ndarray,
    right: np.ndarray,
    upstream: np.ndarray,
    kind: DistanceKind,
) -> tuple[np.ndarray, np.ndarray]:
    """Chain dL/dD through D = pairwise_distances(left, right) to (dL/dleft, dL/dright)."""
    if upstream.shape != (left.shape[0], right.shape[0]):
        raise ShapeError(f"upstream gradient shape {upstream.shape} does not match {left.shape[0]} x {right.shape[0]}")
    if kind == DistanceKind.SQ_EUCLIDEAN:
        grad_left = 2.0 * (upstream.sum(axis=1)[:, None] * left - upstream @ right)
        grad_right = 2.0 * (upstream.sum(axis=0)[:, None] * right - upstream.T @ left)
        return grad_left, grad_right
    norm_left = np.linalg.norm(left, axis=1)
    norm_right = np.linalg.norm(right, axis=1)
    unit_left = left / norm_left[:, None]
    unit_right = right / norm_right[:, None]
    weighted = upstream * (unit_left @ unit_right.T)
    grad_left = -(upstream @ unit_right - weighted.sum(axis=1)[:, None] * unit_left) / norm_left[:, None]
    grad_right = -(upstream.T @ unit_left - weighted.sum(axis=0)[:, None] * unit_right) / norm_right[:, None]
    return grad_left, grad_right


def self_distances_backward(points: np.ndarray, upstream: np.ndarray, kind: DistanceKind) -> np.ndarray:
    grad_left, grad_right = pairwise_distances_backward(points, points, upstream, kind)
    return grad_left + grad_right


def grouped_logsumexp(values: np.ndarray, groups: np.ndarray, num_groups: int) -> np.ndarray:
    """Log-sum-exp of the rows of `values` that share a group id.

    Returns a (num_groups, k) array; groups without rows yield -inf.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        return grouped_logsumexp(values[:, None], groups, num_groups)[:, 0]
    maxes = np.full((num_groups, values.shape[1]), -np.inf)
    np.maximum.at(maxes, groups, values)
    shift = np.where(np.isfinite(maxes), maxes, 0.0)
    sums = np.zeros_like(maxes)
    np.add.at(sums, groups, np.exp(values - shift[groups]))
    with np.errstate(divide="ignore"):
        return np.log(sums) + shift


def row_normalize(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return matrix / norms


def _as_pair(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray, kind: DistanceKind) -> tuple[np.ndarray, np.ndarray]:
    a_vec = np.asarray(a, dtype=np.float64).reshape(-1)
    b_vec = np.asarray(b, dtype=np.float64).reshape(-1)
    if a_vec.size == 0 or a_vec.shape != b_vec.shape:
        raise ShapeError(f"distance needs two vectors of equal dimension >= 1, got {a_vec.shape} and {b_vec.shape}")
    if kind == DistanceKind.COSINE and (not np.any(a_vec) or not np.any(b_vec)):
        raise ShapeError("cosine distance is undefined for a zero-norm vector")
    return a_vec, b_vec


def _as_matrices(left: np.ndarray, right: np.ndarray, kind: DistanceKind) -> tuple[np.ndarray, np.ndarray]:
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.ndim != 2 or right.ndim != 2 or left.shape[1] != right.shape[1]:
        raise ShapeError(f"pairwise distances need matrices of equal width, got {left.shape} and {right.shape}")
    if kind == DistanceKind.COSINE:
        if not np.all(np.any(left, axis=1)) or not np.all(np.any(right, axis=1)):
            raise ShapeError("cosine distance is undefined for a zero-norm row")
    return left, right
