"""Renewal DP against brute-force enumeration; measures; growth estimates."""

import math

import numpy as np
import pytest

from qldp.env import IidSequence, Periodic, letter, realize, shift
from qldp.errors import (
    AllMinusInfinity,
    MemoryCap,
    OffLattice,
    OutOfHorizon,
    TooLarge,
)
from qldp.model import delta_reward, letter_local_model, reward_law, waiting_law
from qldp.partition import (
    KingmanEstimate,
    brute_force_partition,
    constrained_measure,
    constrained_partition,
    default_t_list,
    free_measure,
    free_partition,
    kingman_cgf_estimate,
    measure_to_csv,
    partition_to_csv,
)

L = letter(name=0.0)


def homogeneous(probs, reward=None, p_inf=None, s_max=None):
    law = waiting_law(probs, p_inf=p_inf)
    return letter_local_model(
        waiting=law,
        reward=reward if reward is not None else delta_reward(1.0),
        s_max=s_max or law.s_max,
    )


def flat_traj(horizon=256):
    return realize(Periodic(states=(L,)), seed=None, horizon=horizon)


SIXFOUR = homogeneous({1: 0.6, 2: 0.4})


def test_constrained_partition_small_values():
    table = constrained_partition(SIXFOUR, flat_traj(), 3, 0.0)
    assert np.exp(table.values) == pytest.approx([1.0, 0.6, 0.76, 0.696], abs=1e-14)


def test_partition_t_zero_and_unreachable():
    table = constrained_partition(homogeneous({2: 1.0}), flat_traj(), 3, 0.0)
    assert table.values[0] == 0.0
    assert table.values[1] == -np.inf
    assert table.values[2] == 0.0
    assert table.values[3] == -np.inf


def test_free_partition_proper_is_one():
    """Without the endpoint constraint a proper law at phi=0 integrates to 1."""
    traj = flat_traj()
    for t in (1, 2, 7, 40):
        assert free_partition(SIXFOUR, traj, t, 0.0) == pytest.approx(0.0, abs=1e-12)


def test_free_partition_two_term_decomposition():
    val = free_partition(SIXFOUR, flat_traj(), 1, 0.0)
    assert math.exp(val) == pytest.approx(0.6 * 1.0 + 1.0 * 0.4, abs=1e-14)


def test_free_partition_defective_floor():
    m = homogeneous({1: 0.9}, p_inf=0.1)
    for t in (5, 50, 200):
        assert math.exp(free_partition(m, flat_traj(), t, 0.0)) >= 0.1 - 1e-15


@pytest.mark.parametrize("phi", [0.0, 0.3, -1.0])
def test_brute_force_matches_dp(phi):
    traj = flat_traj()
    table = constrained_partition(SIXFOUR, traj, 12, phi)
    for t in range(13):
        oracle = brute_force_partition(SIXFOUR, traj, t, phi, constrained=True)
        if oracle == -math.inf:
            assert table.values[t] == -math.inf
        else:
            assert table.values[t] == pytest.approx(oracle, abs=1e-12)
        free_oracle = brute_force_partition(SIXFOUR, traj, t, phi, constrained=False)
        assert free_partition(SIXFOUR, traj, t, phi, table=table) == pytest.approx(
            free_oracle, abs=1e-12
        )


def test_brute_force_matches_dp_disordered():
    spec = IidSequence(letters=(letter(p1=0.3), letter(p1=0.8)), weights=(0.5, 0.5))
    traj = realize(spec, seed=21, horizon=64)
    m = letter_local_model(
        waiting=lambda le: waiting_law({1: le["p1"], 2: 1 - le["p1"]}),
        reward=delta_reward(1.0),
        s_max=2,
    )
    table = constrained_partition(m, traj, 10, 0.3)
    for t in range(11):
        oracle = brute_force_partition(m, traj, t, 0.3, constrained=True)
        assert table.values[t] == pytest.approx(oracle, abs=1e-12)


def test_brute_force_guard():
    with pytest.raises(TooLarge):
        brute_force_partition(SIXFOUR, flat_traj(), 15, 0.0)


def test_constrained_measure_two_path_example():
    m = homogeneous(
        {1: 0.6, 2: 0.4},
        reward=reward_law(per_s={1: [(1.0, 1.0)], 2: [(0.0, 1.0)]}),
    )
    mu = constrained_measure(m, flat_traj(), 2, 1.0)
    assert mu.mass(2) == pytest.approx(0.36, abs=1e-14)
    assert mu.mass(0) == pytest.approx(0.4, abs=1e-14)
    assert mu.mass(1) == 0.0
    assert math.exp(mu.log_total_mass()) == pytest.approx(0.76, abs=1e-12)


def test_constrained_measure_deterministic_renewal():
    m = homogeneous({1: 1.0})
    mu = constrained_measure(m, flat_traj(), 5, 1.0)
    assert mu.atoms == {(5,): pytest.approx(1.0)}


def test_free_measure_two_term_assembly():
    nu = free_measure(SIXFOUR, flat_traj(), 1, 1.0)
    assert nu.mass(1) == pytest.approx(0.6, abs=1e-14)
    assert nu.mass(0) == pytest.approx(0.4, abs=1e-14)


def test_free_measure_equals_constrained_when_no_overshoot():
    m = homogeneous({1: 1.0})
    traj = flat_traj()
    for t in (1, 4, 9):
        assert free_measure(m, traj, t, 1.0).atoms == constrained_measure(m, traj, t, 1.0).atoms


def test_free_measure_total_mass_matches_free_partition():
    nu = free_measure(SIXFOUR, flat_traj(), 6, 1.0)
    assert nu.log_total_mass() == pytest.approx(
        free_partition(SIXFOUR, flat_traj(), 6, 0.0), abs=1e-12
    )


def test_measure_moment_identity():
    """Integrating e^{phi W} against the lattice measure recovers Z(phi)."""
    traj = flat_traj()
    mu = constrained_measure(SIXFOUR, traj, 6, 1.0)
    keys = np.array([k[0] for k in mu.log_atoms])
    logs = np.array([mu.log_atoms[(k,)] for k in keys])
    for phi in (-0.7, 0.0, 0.5, 2.0):
        moment = float(np.logaddexp.reduce(logs + phi * keys))
        z = constrained_partition(SIXFOUR, traj, 6, phi).values[6]
        assert moment == pytest.approx(z, rel=1e-9, abs=1e-9)


def test_supermultiplicativity_sweep():
    spec = IidSequence(letters=(letter(p1=0.3), letter(p1=0.8)), weights=(0.5, 0.5))
    traj = realize(spec, seed=5, horizon=140)
    m = letter_local_model(
        waiting=lambda le: waiting_law({1: le["p1"], 3: 1 - le["p1"]}),
        reward=delta_reward(1.0),
        s_max=3,
    )
    rng = np.random.default_rng(2)
    for phi in (0.0, 0.3):
        table = constrained_partition(m, traj, 120, phi)
        for _ in range(40):
            t = int(rng.integers(1, 100))
            tp = int(rng.integers(1, 120 - t))
            lhs = table.values[t + tp]
            rhs = table.values[t] + constrained_partition(m, shift(traj, t), tp, phi).values[tp]
            assert lhs >= rhs - 1e-9


def test_measure_supermultiplicativity_on_intervals():
    """Window mass at t+t' dominates the product of window masses, for
    windows read as intervals of the per-step reward average."""
    m = homogeneous(
        {1: 0.5, 2: 0.5},
        reward=reward_law(per_s={1: [(1.0, 1.0)], 2: [(0.0, 0.5), (2.0, 0.5)]}),
    )
    traj = flat_traj()
    for (t, tp) in [(2, 3), (4, 4), (3, 6)]:
        for center, radius in [(1.0, 0.25), (0.8, 0.5), (0.5, 0.5)]:
            big = constrained_measure(m, traj, t + tp, 1.0).log_mass_window(center, radius)
            a = constrained_measure(m, traj, t, 1.0).log_mass_window(center, radius)
            b = constrained_measure(m, shift(traj, t), tp, 1.0).log_mass_window(center, radius)
            assert big >= a + b - 1e-9


def test_partition_convex_in_phi():
    traj = flat_traj()
    rng = np.random.default_rng(8)
    for _ in range(25):
        a, b = rng.normal(scale=1.5, size=2)
        za = constrained_partition(SIXFOUR, traj, 40, a).values[40]
        zb = constrained_partition(SIXFOUR, traj, 40, b).values[40]
        zm = constrained_partition(SIXFOUR, traj, 40, (a + b) / 2).values[40]
        assert zm / 40 <= (za + zb) / 80 + 1e-10


def test_kingman_deterministic_renewal_exact():
    m = homogeneous({1: 1.0})
    est = kingman_cgf_estimate(m, flat_traj(), 0.37, (10, 20, 40))
    assert est.per_t == pytest.approx([0.37, 0.37, 0.37], abs=1e-13)
    assert est.estimate == pytest.approx(0.37, abs=1e-13)
    assert est.spread < 1e-12


def test_kingman_probability_bound_and_spread():
    est = kingman_cgf_estimate(SIXFOUR, flat_traj(), 0.0, (16, 64, 256))
    assert est.estimate <= 0.0
    assert est.spread >= 0.0
    assert isinstance(est, KingmanEstimate)


def test_kingman_all_minus_infinity():
    m = homogeneous({2: 1.0})
    with pytest.raises(AllMinusInfinity):
        kingman_cgf_estimate(m, flat_traj(), 0.0, (3, 5, 7))


def test_horizon_checks():
    traj = flat_traj(horizon=10)
    with pytest.raises(OutOfHorizon):
        constrained_partition(SIXFOUR, traj, 11, 0.0)
    with pytest.raises(OutOfHorizon):
        free_partition(SIXFOUR, traj, 11, 0.0)
    with pytest.raises(OutOfHorizon):
        kingman_cgf_estimate(SIXFOUR, traj, 0.0, (4, 16))
    assert default_t_list(4, 10) == (4, 8)
    with pytest.raises(OutOfHorizon):
        default_t_list(11, 10)


def test_off_lattice_and_memory_cap():
    bad = homogeneous({1: 1.0}, reward=delta_reward(0.3))
    with pytest.raises(OffLattice):
        constrained_measure(bad, flat_traj(), 3, 0.2)
    with pytest.raises(MemoryCap):
        constrained_measure(SIXFOUR, flat_traj(), 40, 1.0, memory_cap=3)


def test_csv_exports(tmp_path):
    traj = flat_traj()
    table = constrained_partition(SIXFOUR, traj, 4, 0.0)
    p1 = tmp_path / "table.csv"
    partition_to_csv(table, p1)
    lines = p1.read_text().splitlines()
    assert lines[0] == "tau,log_Z"
    assert len(lines) == 6
    assert float(lines[1].split(",")[1]) == 0.0

    mu = constrained_measure(SIXFOUR, traj, 2, 1.0)
    p2 = tmp_path / "mu.csv"
    measure_to_csv(mu, p2)
    rows = p2.read_text().splitlines()
    assert rows[0] == "idx_0,mass"
    masses = {int(r.split(",")[0]): float(r.split(",")[1]) for r in rows[1:]}
    assert masses[2] == pytest.approx(0.36, abs=1e-12)
    assert masses[1] == pytest.approx(0.4, abs=1e-12)
