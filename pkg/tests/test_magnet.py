import math

import numpy as np
import pytest

from mean_field_dml.errors import ConfigError, NumericalError, ShapeError
from mean_field_dml.magnet import (
    MAX_EXACT_SPINS,
    enumerate_states,
    exact_gibbs,
    expansion_gap,
    fluctuation_energy,
    hamiltonian,
    magnet_scan,
    mft_hamiltonian,
    solve_self_consistency,
)
from mean_field_dml.models import SpinSystem
from oracles import bisect_root


def _random_vector_spins(rng: np.random.Generator, n: int) -> np.ndarray:
    spins = rng.standard_normal((n, 3))
    return spins / np.linalg.norm(spins, axis=1, keepdims=True)


def test_ising_pair_energies() -> None:
    assert hamiltonian(SpinSystem(spins=[1, 1])) == -2.0
    assert hamiltonian(SpinSystem(spins=[1, -1])) == 0.0


def test_vector_hamiltonian_is_total_spin_norm() -> None:
    rng = np.random.default_rng(0)
    spins = _random_vector_spins(rng, 7)
    sys = SpinSystem(spins=spins, exchange=1.5)
    total = spins.sum(axis=0)
    assert hamiltonian(sys) == pytest.approx(-0.75 * float(total @ total), rel=1e-12)


def test_mft_hamiltonian_examples() -> None:
    rng = np.random.default_rng(1)
    sys = SpinSystem(spins=_random_vector_spins(rng, 5), exchange=2.0)
    assert mft_hamiltonian(sys, [0.0, 0.0, 0.0]) == 0.0

    m = np.array([0.0, 0.6, 0.8])
    aligned = SpinSystem(spins=np.tile(m, (4, 1)), exchange=2.0)
    assert mft_hamiltonian(aligned, m) == pytest.approx(-0.5 * 2.0 * 16, rel=1e-12)


def test_mft_hamiltonian_matches_scalar_formula() -> None:
    rng = np.random.default_rng(2)
    spins = _random_vector_spins(rng, 6)
    m = rng.standard_normal(3)
    j, n = 0.7, 6
    expected = 0.5 * j * n * n * sum(c * c for c in m)
    for s in spins:
        expected -= j * n * sum(a * b for a, b in zip(m, s))
    assert mft_hamiltonian(SpinSystem(spins=spins, exchange=j), m) == pytest.approx(expected, rel=1e-12)


def test_expansion_gap_is_zero_without_fluctuations() -> None:
    m = np.array([1.0, 0.0, 0.0])
    assert expansion_gap(SpinSystem(spins=np.tile(m, (5, 1))), m) == pytest.approx(0.0, abs=1e-12)

    rng = np.random.default_rng(3)
    spins = _random_vector_spins(rng, 8)
    assert expansion_gap(SpinSystem(spins=spins), spins.mean(axis=0)) == pytest.approx(0.0, abs=1e-12)


def test_expansion_identity_over_random_systems() -> None:
    rng = np.random.default_rng(4)
    for trial in range(1000):
        n = int(rng.integers(1, 65))
        j = float(rng.uniform(0.1, 3.0))
        if trial % 2:
            sys = SpinSystem(spins=_random_vector_spins(rng, n), exchange=j)
            m = rng.standard_normal(3)
        else:
            sys = SpinSystem(spins=rng.choice([-1.0, 1.0], size=n), exchange=j)
            m = float(rng.uniform(-1.0, 1.0))
        gap = hamiltonian(sys) - mft_hamiltonian(sys, m)
        assert abs(gap - fluctuation_energy(sys, m)) <= 1e-9 * max(1.0, abs(gap))
        expansion_gap(sys, m)


def test_field_shape_must_match_spins() -> None:
    with pytest.raises(ShapeError):
        mft_hamiltonian(SpinSystem(spins=[1, -1]), [0.1, 0.2, 0.3])
    with pytest.raises(ShapeError):
        SpinSystem(spins=[1, 0.5])
    with pytest.raises(ShapeError):
        SpinSystem(spins=[[1.0, 1.0, 0.0]])


def test_self_consistency_low_temperature_saturates() -> None:
    solution = solve_self_consistency(1.0, 10, temperature=1e-3 * 10)
    assert solution.magnetization == pytest.approx(1.0, abs=1e-6)

    solution = solve_self_consistency(1.0, 10, temperature=1e-2 * 10)
    assert abs(solution.magnetization) >= 0.99


@pytest.mark.parametrize("init", [-0.9, 0.0, 0.5, 1.0])
def test_self_consistency_high_temperature_is_disordered(init: float) -> None:
    solution = solve_self_consistency(2.0, 5, temperature=2.0 * 2.0 * 5, init=init)
    assert abs(solution.magnetization) <= 1e-8
    assert solution.residual <= 1e-10


def test_self_consistency_matches_bisection() -> None:
    solution = solve_self_consistency(1.0, 8, temperature=0.5 * 8)
    root = bisect_root(lambda m: m - math.tanh(2.0 * m), 0.5, 1.0)
    assert solution.magnetization == pytest.approx(root, abs=1e-9)
    assert solution.residual <= 1e-10


def test_magnetization_is_non_increasing_in_temperature() -> None:
    temps = np.linspace(0.05, 2.0, 20)
    rows = magnet_scan(12, 1.0, [t for t in temps if abs(t - 1.0) > 0.02], exact=False)
    values = [row.magnetization for row in rows]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(values, values[1:]))
    assert values[0] > 0.99
    assert values[-1] == pytest.approx(0.0, abs=1e-8)


def test_self_consistency_validation_and_failure() -> None:
    with pytest.raises(ConfigError):
        solve_self_consistency(1.0, 4, temperature=0.0)
    with pytest.raises(NumericalError):
        solve_self_consistency(1.0, 4, temperature=0.9 * 4, max_iter=2)


def test_exact_gibbs_single_spin() -> None:
    moments = exact_gibbs(1, 1.0, 0.7)
    assert moments.partition == pytest.approx(2.0 * math.exp(1.0 / (2.0 * 0.7)), rel=1e-12)
    assert moments.mean_spin == pytest.approx(0.0, abs=1e-15)
    assert moments.mean_abs_spin == pytest.approx(1.0)


def test_exact_gibbs_cold_magnet_keeps_log_partition_finite() -> None:
    moments = exact_gibbs(12, 1.0, 0.01)
    assert moments.log_partition == pytest.approx(0.5 * 144 / 0.01 + math.log(2.0), rel=1e-12)
    assert moments.partition == math.inf
    assert moments.mean_abs_spin == pytest.approx(1.0)
    assert moments.mean_spin == pytest.approx(0.0, abs=1e-12)


def test_enumerate_states() -> None:
    states = enumerate_states(3)
    assert states.shape == (8, 3)
    assert len({tuple(row) for row in states}) == 8


def test_exact_gibbs_limits() -> None:
    assert exact_gibbs(12, 1.0, 0.05 * 12).mean_abs_spin > 0.99
    hot = exact_gibbs(12, 1.0, 100.0 * 12).mean_abs_spin
    assert hot < 0.3
    with pytest.raises(ConfigError):
        exact_gibbs(MAX_EXACT_SPINS + 1, 1.0, 1.0)


def test_magnet_scan_rows() -> None:
    rows = magnet_scan(12, 1.0, [0.1, 0.5, 0.9, 1.5, 2.0])
    assert [row.reduced_temperature for row in rows] == [0.1, 0.5, 0.9, 1.5, 2.0]
    assert rows[0].magnetization > rows[2].magnetization >= 0.0
    assert rows[-1].magnetization == pytest.approx(0.0, abs=1e-8)
    assert all(row.exact_abs_magnetization is not None for row in rows)
    assert rows[0].as_csv_row()[0] == "0.1"

    assert magnet_scan(20, 1.0, [0.5], exact=False)[0].as_csv_row()[2] == ""
    with pytest.raises(ConfigError):
        magnet_scan(20, 1.0, [0.5])
