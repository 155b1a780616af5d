"""Waiting/reward law construction, Gibbs weights, tails, diagnostics."""

import math

import numpy as np
import pytest

from qldp.env import Periodic, letter, realize
from qldp.errors import DimensionMismatch, InvalidSpec
from qldp.model import (
    delta_reward,
    gibbs_weight,
    letter_local_model,
    reward_law,
    site_model,
    tail_probability,
    validate,
    waiting_law,
)

L = letter(name=0.0)


def simple_model(probs, potential=None, reward=None, s_max=None, p_inf=None):
    law = waiting_law(probs, p_inf=p_inf)
    return letter_local_model(
        waiting=law,
        reward=reward if reward is not None else delta_reward(1.0),
        potential=potential,
        s_max=s_max or law.s_max,
    )


def one_letter_traj(horizon=64):
    return realize(Periodic(states=(L,)), seed=None, horizon=horizon)


def test_gibbs_weight_examples():
    m = simple_model({1: 0.6, 2: 0.4})
    assert gibbs_weight(m, L, 0.0, 1) == pytest.approx(0.6, abs=1e-15)
    assert gibbs_weight(m, L, math.log(2), 2) == pytest.approx(0.8, abs=1e-15)
    m_pot = simple_model({1: 0.6, 2: 0.4}, potential=lambda le, s: 1.0 if s == 1 else 0.0)
    assert gibbs_weight(m_pot, L, 0.0, 1) == pytest.approx(0.6 * math.e, rel=1e-12)
    assert gibbs_weight(m_pot, L, 0.0, 1) == pytest.approx(1.63097, abs=1e-5)


def test_gibbs_weight_zero_off_support():
    m = simple_model({1: 0.6, 3: 0.4})
    assert gibbs_weight(m, L, 0.0, 2) == 0.0
    with pytest.raises(InvalidSpec):
        gibbs_weight(m, L, 0.0, 4)
    with pytest.raises(InvalidSpec):
        gibbs_weight(m, L, 0.0, 0)


def test_gibbs_weight_matches_p_at_phi_zero():
    rng = np.random.default_rng(5)
    for _ in range(20):
        k = rng.integers(1, 6)
        raw = rng.random(k) + 0.05
        probs = raw / raw.sum()
        m = simple_model(probs)
        for s in range(1, k + 1):
            assert gibbs_weight(m, L, 0.0, s) == probs[s - 1]


def test_gibbs_weight_log_convex_in_phi():
    """Midpoint test: log w((a+b)/2) <= (log w(a) + log w(b))/2."""
    m = simple_model(
        {1: 0.5, 2: 0.5},
        reward=reward_law(atoms=[(-1.0, 0.3), (0.5, 0.2), (2.0, 0.5)]),
    )
    rng = np.random.default_rng(11)
    for _ in range(50):
        a, b = rng.normal(scale=2, size=2)
        s = int(rng.integers(1, 3))
        mid = math.log(gibbs_weight(m, L, (a + b) / 2, s))
        ends = 0.5 * (
            math.log(gibbs_weight(m, L, a, s)) + math.log(gibbs_weight(m, L, b, s))
        )
        assert mid <= ends + 1e-12


def test_tail_probability_examples():
    traj = one_letter_traj()
    m = simple_model({1: 0.6, 2: 0.4})
    assert tail_probability(m, traj, 0, 0) == 1.0
    assert tail_probability(m, traj, 0, 1) == pytest.approx(0.4, abs=1e-15)
    assert tail_probability(m, traj, 0, 2) == 0.0
    defective = simple_model({1: 0.9}, p_inf=0.1)
    for s in (1, 2, 10):
        assert tail_probability(defective, traj, 0, s) == pytest.approx(0.1, abs=1e-15)


def test_tail_difference_is_pointmass():
    rng = np.random.default_rng(3)
    raw = rng.random(7)
    probs = 0.95 * raw / raw.sum()
    m = simple_model(probs, p_inf=1 - probs.sum())
    traj = one_letter_traj()
    for s in range(7):
        diff = tail_probability(m, traj, 0, s) - tail_probability(m, traj, 0, s + 1)
        assert diff == pytest.approx(probs[s], abs=1e-14)


def test_waiting_law_validation():
    with pytest.raises(InvalidSpec):
        waiting_law({1: 0.5, 2: 0.6})
    with pytest.raises(InvalidSpec):
        waiting_law({1: -0.1, 2: 1.1})
    with pytest.raises(InvalidSpec):
        waiting_law({0: 1.0})
    law = waiting_law({2: 0.25, 5: 0.5}, p_inf=0.25)
    assert law.s_max == 5
    assert list(law.support) == [2, 5]


def test_reward_law_validation_and_overrides():
    with pytest.raises(InvalidSpec):
        reward_law(atoms=[(1.0, 0.4), (2.0, 0.4)])
    with pytest.raises(DimensionMismatch):
        reward_law(atoms=[((1.0, 0.0), 0.5), ((1.0,), 0.5)])
    law = reward_law(atoms=[(0.0, 1.0)], per_s={2: [(5.0, 1.0)]})
    phi = np.array([1.0])
    assert law.log_mgf(phi, 1) == pytest.approx(0.0)
    assert law.log_mgf(phi, 2) == pytest.approx(5.0)
    row = law.log_mgf_row(phi, 3)
    assert row == pytest.approx([0.0, 5.0, 0.0])


def test_log_weight_row_matches_scalar():
    rng = np.random.default_rng(17)
    m = simple_model(
        {1: 0.3, 2: 0.2, 4: 0.5},
        potential=lambda le, s: 0.1 * s,
        reward=reward_law(atoms=[(1.0, 0.5), (-1.0, 0.5)]),
        s_max=5,
    )
    traj = one_letter_traj()
    for _ in range(10):
        phi = rng.normal()
        zeta = rng.normal()
        row = m.log_weight_row(traj, 0, phi, zeta=zeta)
        for s in range(1, 6):
            w = gibbs_weight(m, L, phi, s)
            expected = math.log(w) - zeta * s if w > 0 else -math.inf
            assert row[s - 1] == pytest.approx(expected, abs=1e-12)


def test_log_weight_row_distinguishes_letters():
    la, lb = letter(p1=0.2), letter(p1=0.8)
    m = letter_local_model(
        waiting=lambda le: waiting_law({1: le["p1"], 2: 1 - le["p1"]}),
        reward=delta_reward(1.0),
        s_max=2,
    )
    traj = realize(Periodic(states=(la, lb)), seed=None, horizon=8)
    row0 = m.log_weight_row(traj, 0, 0.0)
    row1 = m.log_weight_row(traj, 1, 0.0)
    assert row0 == pytest.approx([math.log(0.2), math.log(0.8)])
    assert row1 == pytest.approx([math.log(0.8), math.log(0.2)])
    # cached rows must not alias the zeta-shifted copies
    shifted = m.log_weight_row(traj, 0, 0.0, zeta=1.0)
    assert m.log_weight_row(traj, 0, 0.0) == pytest.approx(row0)
    assert shifted == pytest.approx(row0 - np.array([1.0, 2.0]))


def test_phi_dimension_checked():
    m = simple_model({1: 1.0})
    with pytest.raises(DimensionMismatch):
        gibbs_weight(m, L, np.array([0.0, 1.0]), 1)
    m2 = letter_local_model(
        waiting=waiting_law({1: 1.0}),
        reward=delta_reward((1.0, 2.0)),
        s_max=1,
        dim=2,
    )
    assert gibbs_weight(m2, L, np.array([0.0, 0.0]), 1) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatch):
        gibbs_weight(m2, L, 0.5, 1)


def test_validate_periodic_support_flag():
    m = simple_model({2: 0.5, 4: 0.5})
    report = validate(m, one_letter_traj(), 4)
    assert report.support_gcd == 2
    assert not report.aperiodic_ok
    assert any("periodic support" in f for f in report.flags)


def test_validate_singleton_support_passes():
    m = simple_model({1: 1.0})
    report = validate(m, one_letter_traj(), 4)
    assert report.support_gcd == 1
    assert report.aperiodic_ok
    assert report.flags == ()
    assert report.proper


def test_validate_no_common_support():
    la, lb = letter(k=1.0), letter(k=2.0)
    m = letter_local_model(
        waiting=lambda le: waiting_law({1: 0.5, 2: 0.5} if le["k"] == 1.0 else {1: 1.0}),
        reward=delta_reward(1.0),
        s_max=2,
    )
    traj = realize(Periodic(states=(la, lb)), seed=None, horizon=8)
    report = validate(m, traj, 4)
    assert report.support_gcd == 1
    assert not report.aperiodic_ok
    assert report.common_support == (1,)


def test_validate_bounded_potential_and_rewards():
    """Bounded disorder in [-1, 1] with unit coupling: potential bound 1."""
    states = tuple(letter(omega=w) for w in (-1.0, 1.0, 0.25))
    m = site_model(
        waiting=lambda traj, tau: waiting_law({1: 0.5, 2: 0.5}),
        reward=delta_reward(1.0),
        potential_row=lambda traj, tau: np.array(
            [traj.letter(tau + s)["omega"] for s in (1, 2)]
        ),
        s_max=2,
    )
    traj = realize(Periodic(states=states), seed=None, horizon=16)
    report = validate(m, traj, 6)
    assert report.eta == 0.0
    assert report.potential_bound == pytest.approx(1.0)
    assert report.reward_norm_bound == pytest.approx(1.0)


def test_validate_defective_budget():
    m = simple_model({1: 0.9}, p_inf=0.1)
    report = validate(m, one_letter_traj(), 3)
    assert not report.proper
    assert report.p_inf_max == pytest.approx(0.1)
