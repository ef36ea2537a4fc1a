"""Mean-field theory of the infinite-range magnet.

Every spin couples to every other spin (and to itself) with exchange J. The
mean-field Hamiltonian replaces that coupling with a single field M; for
Ising spins the self-consistent M solves M = tanh(J N M / T).
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp

from mean_field_dml.errors import ConfigError, NumericalError, ShapeError
from mean_field_dml.models import GibbsMoments, MagnetRow, MFTSolution, SpinSystem

logger = logging.getLogger(__name__)

MAX_EXACT_SPINS = 16
DAMPING = 0.5
IDENTITY_TOLERANCE = 1e-9


def hamiltonian(sys: SpinSystem) -> float:
    """-(J/2) sum over all ordered pairs (i, j), i == j included, of S_i . S_j."""
    gram = sys.spins @ sys.spins.T
    return float(-0.5 * sys.exchange * np.sum(gram))


def mft_hamiltonian(sys: SpinSystem, mean_field: float | Sequence[float] | np.ndarray) -> float:
    m = _as_field(sys, mean_field)
    n = sys.size
    total = sys.spins.sum(axis=0)
    return float(0.5 * sys.exchange * n * n * np.dot(m, m) - sys.exchange * n * np.dot(m, total))


def fluctuation_energy(sys: SpinSystem, mean_field: float | Sequence[float] | np.ndarray) -> float:
    """-(J/2) |sum_i (S_i - M)|^2, the term the mean-field approximation drops."""
    deviation = np.sum(sys.spins - _as_field(sys, mean_field), axis=0)
    return float(-0.5 * sys.exchange * np.dot(deviation, deviation))


def expansion_gap(sys: SpinSystem, mean_field: float | Sequence[float] | np.ndarray) -> float:
    """H - H_MFT, checked against the fluctuation term it must equal exactly."""
    gap = hamiltonian(sys) - mft_hamiltonian(sys, mean_field)
    expected = fluctuation_energy(sys, mean_field)
    scale = max(1.0, abs(gap), abs(expected))
    if abs(gap - expected) > IDENTITY_TOLERANCE * scale:
        raise NumericalError(f"expansion identity violated: gap {gap!r} vs fluctuation term {expected!r}")
    return gap


def solve_self_consistency(
    exchange: float,
    num_spins: int,
    temperature: float,
    init: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> MFTSolution:
    """Damped fixed-point iteration M <- (1 - g) M + g tanh(J N M / T) with g = 0.5."""
    if temperature <= 0 or exchange <= 0 or num_spins < 1:
        raise ConfigError(
            f"self-consistency needs J > 0, N >= 1 and T > 0, got J={exchange}, N={num_spins}, T={temperature}"
        )
    coupling = exchange * num_spins / temperature
    m = float(init)
    for iteration in range(max_iter + 1):
        target = math.tanh(coupling * m)
        residual = abs(m - target)
        if residual <= tol:
            return MFTSolution(magnetization=m, residual=residual, iterations=iteration)
        m = (1.0 - DAMPING) * m + DAMPING * target
    raise NumericalError(
        f"self-consistency did not converge in {max_iter} iterations at T/JN={1.0 / coupling:g} (residual {residual:.3e})"
    )


def exact_gibbs(num_spins: int, exchange: float, temperature: float) -> GibbsMoments:
    """Enumerate all 2^N Ising states of the infinite-range magnet."""
    if num_spins < 1 or num_spins > MAX_EXACT_SPINS:
        raise ConfigError(f"exact enumeration supports 1 <= N <= {MAX_EXACT_SPINS}, got N={num_spins}")
    if temperature <= 0 or exchange <= 0:
        raise ConfigError(f"exact enumeration needs J > 0 and T > 0, got J={exchange}, T={temperature}")
    states = enumerate_states(num_spins)
    totals = states.sum(axis=1)
    energies = -0.5 * exchange * totals * totals
    log_weights = -energies / temperature
    log_z = float(logsumexp(log_weights))
    weights = np.exp(log_weights - log_z)
    per_site = totals / num_spins
    return GibbsMoments(
        log_partition=log_z,
        mean_spin=float(np.dot(weights, per_site)),
        mean_abs_spin=float(np.dot(weights, np.abs(per_site))),
    )


def enumerate_states(num_spins: int) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 1.0), repeat=num_spins)))


def magnet_scan(
    num_spins: int,
    exchange: float,
    reduced_temperatures: Sequence[float],
    exact: bool = True,
) -> list[MagnetRow]:
    """Mean-field magnetization (and exact E|m| when requested) at T = t * J * N for each t."""
    if exact and num_spins > MAX_EXACT_SPINS:
        raise ConfigError(f"exact enumeration supports N <= {MAX_EXACT_SPINS}, got N={num_spins}")
    rows: list[MagnetRow] = []
    for reduced in reduced_temperatures:
        temperature = reduced * exchange * num_spins
        solution = solve_self_consistency(exchange, num_spins, temperature)
        exact_abs = exact_gibbs(num_spins, exchange, temperature).mean_abs_spin if exact else None
        logger.debug("T/JN=%g M=%g iterations=%d", reduced, solution.magnetization, solution.iterations)
        rows.append(
            MagnetRow(
                reduced_temperature=float(reduced),
                magnetization=solution.magnetization,
                exact_abs_magnetization=exact_abs,
            )
        )
    return rows


def _as_field(sys: SpinSystem, mean_field: float | Sequence[float] | np.ndarray) -> np.ndarray:
    m = np.atleast_1d(np.asarray(mean_field, dtype=np.float64))
    if m.shape != (sys.spins.shape[1],):
        raise ShapeError(f"mean field of shape {m.shape} does not match spins of dimension {sys.spins.shape[1]}")
    return m
