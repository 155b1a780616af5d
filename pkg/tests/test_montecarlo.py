"""Path sampling against exact renewal measures and closed-form oracles."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from qldp.env import IidSequence, Periodic, letter, realize
from qldp.errors import DimensionMismatch, InvalidSpec, OutOfHorizon
from qldp.model import delta_reward, letter_local_model, waiting_law
from qldp.montecarlo import (
    empirical_ball_mass,
    empirical_rate_scan,
    scan_to_csv,
    simulate_batch,
    simulate_trajectory,
)
from qldp.partition import constrained_measure, free_measure

L = letter(name=0.0)
ENV1 = Periodic(states=(L,))


def homogeneous(probs, potential=None, reward=None, p_inf=None, s_max=None):
    law = waiting_law(probs, p_inf=p_inf)
    return letter_local_model(
        waiting=law,
        reward=reward if reward is not None else delta_reward(1.0),
        potential=potential,
        s_max=s_max or law.s_max,
    )


def test_deterministic_renewal_path():
    model = homogeneous([1.0], potential=lambda le, s: 0.2)
    traj = realize(ENV1, seed=3, horizon=20)
    path = simulate_trajectory(model, traj, 5, seed=11)
    assert path.waits == (1.0,) * 5
    assert path.renewal_times == (0, 1, 2, 3, 4, 5)
    assert path.N_t == 5
    assert path.W_t == pytest.approx([5.0])
    assert path.H == pytest.approx(5 * 0.2)


def test_trajectory_record_invariants():
    model = homogeneous([0.6, 0.4], potential=lambda le, s: 0.05 * s)
    traj = realize(ENV1, seed=3, horizon=100)
    for seed in range(8):
        path = simulate_trajectory(model, traj, 50, seed=seed)
        times = path.renewal_times
        finite = [s for s in path.waits if math.isfinite(s)]
        assert [b - a for a, b in zip(times, times[1:])] == finite
        assert path.N_t == len(times) - 1
        assert times[-1] <= 50
        assert path.rewards.shape == (path.N_t, 1)
        assert np.allclose(path.W_t, path.rewards.sum(axis=0))
        assert path.H == pytest.approx(sum(0.05 * s for s in finite))


def test_same_seed_identical():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=100)
    a = simulate_trajectory(model, traj, 60, seed=19)
    b = simulate_trajectory(model, traj, 60, seed=19)
    assert a.waits == b.waits
    assert a.renewal_times == b.renewal_times
    assert np.array_equal(a.rewards, b.rewards)
    assert a.H == b.H
    c = simulate_trajectory(model, traj, 60, seed=20)
    assert (c.waits, c.H) != (a.waits, a.H)


def test_renewal_density_lln():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=1200)
    batch = simulate_batch(model, traj, 1000, 10_000, seed=5)
    mean = batch.N_t.mean() / 1000
    se = batch.N_t.std(ddof=1) / 1000 / math.sqrt(10_000)
    assert abs(mean - 1 / 1.4) <= 3 * se


def test_ball_mass_trivial_full_occupation():
    model = homogeneous([1.0])
    traj = realize(ENV1, seed=3, horizon=20)
    est = empirical_ball_mass(model, traj, 10, 1.0, 0.3, 500, seed=2)
    assert est.log_mass_per_t == 0.0
    assert est.std_error == 0.0
    assert est.hits == 500


def test_ball_mass_matches_exact_small_t():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=40)
    exact = {
        "constrained": constrained_measure(model, traj, 10, 1.0),
        "free": free_measure(model, traj, 10, 1.0),
    }
    for kind, measure in exact.items():
        est = empirical_ball_mass(model, traj, 10, 0.8, 0.05, 200_000, seed=7, kind=kind)
        target = measure.log_mass_window(0.8, 0.05) / 10
        assert est.hits > 1000
        assert abs(est.log_mass_per_t - target) <= 3 * est.std_error


def test_gibbs_reweighting_with_disorder():
    env = IidSequence(
        letters=(letter(omega=-1.0), letter(omega=1.0)), weights=(0.5, 0.5)
    )
    model = letter_local_model(
        waiting=lambda le: waiting_law([0.5, 0.5] if le["omega"] < 0 else [0.9, 0.1]),
        reward=delta_reward(1.0),
        potential=lambda le, s: 0.3 + 0.1 * le["omega"],
        s_max=2,
    )
    traj = realize(env, seed=21, horizon=40)
    for kind, measure in (
        ("constrained", constrained_measure(model, traj, 12, 1.0)),
        ("free", free_measure(model, traj, 12, 1.0)),
    ):
        est = empirical_ball_mass(model, traj, 12, 0.75, 0.05, 150_000, seed=8, kind=kind)
        target = measure.log_mass_window(0.75, 0.05) / 12
        assert est.hits > 500
        assert abs(est.log_mass_per_t - target) <= 3 * est.std_error


def test_free_dominates_constrained():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=100)
    free = empirical_ball_mass(model, traj, 60, 0.7, 0.1, 20_000, seed=4, kind="free")
    cons = empirical_ball_mass(model, traj, 60, 0.7, 0.1, 20_000, seed=4, kind="constrained")
    assert free.hits >= cons.hits
    assert free.log_mass_per_t >= cons.log_mass_per_t


def test_zero_hits_sentinel():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=40)
    est = empirical_ball_mass(model, traj, 10, 5.0, 0.05, 1000, seed=7)
    assert est.log_mass_per_t == -math.inf
    assert est.std_error == math.inf
    assert est.hits == 0
    # centers beyond the largest atom norm can never be hit
    scan = empirical_rate_scan(model, traj, 10, [2.5, 5.0], 0.05, 1000, seed=7, kind="free")
    assert all(rec.hits == 0 for rec in scan)


def test_seed_split_independence():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=100)
    w = 1 / 1.4
    hits = []
    for seed in (1, 2):
        batch = simulate_batch(model, traj, 50, 100_000, seed=seed)
        hits.append((np.abs(batch.W[:, 0] / 50 - w) <= 0.05).astype(float))
    r = np.corrcoef(hits[0], hits[1])[0, 1]
    assert abs(r) <= 0.01


def test_scan_deterministic_and_consistent_with_single_calls():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=80)
    grid = [0.6, 0.7, 0.8]
    scan1 = empirical_rate_scan(model, traj, 50, grid, 0.05, 20_000, seed=9, kind="free")
    scan2 = empirical_rate_scan(model, traj, 50, grid, 0.05, 20_000, seed=9, kind="free")
    assert scan1 == scan2
    # shared batch and per-center calls draw the same stream for one seed
    for w, rec in zip(grid, scan1):
        single = empirical_ball_mass(model, traj, 50, w, 0.05, 20_000, seed=9, kind="free")
        assert single == rec


def test_scan_tracks_exact_rate_shape():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=300)
    grid = [0.70, 1 / 1.4, 0.75]
    scan = empirical_rate_scan(model, traj, 200, grid, 0.05, 20_000, seed=13, kind="free")
    measure = free_measure(model, traj, 200, 1.0)
    for w, rec in zip(grid, scan):
        target = measure.log_mass_window(w, 0.05) / 200
        assert rec.hits > 100
        assert abs(rec.log_mass_per_t - target) <= 3 * max(rec.std_error, 1e-12)
    # the typical-behavior ball carries almost all mass: rate near zero
    assert abs(scan[1].log_mass_per_t) <= 0.02


def test_infinite_wait_terminates_path():
    model = homogeneous([0.3], p_inf=0.7)
    traj = realize(ENV1, seed=3, horizon=60)
    saw_inf = 0
    for seed in range(12):
        path = simulate_trajectory(model, traj, 30, seed=seed)
        if path.waits and path.waits[-1] == math.inf:
            saw_inf += 1
            assert path.N_t == len(path.waits) - 1
            assert path.renewal_times[-1] < 30
    assert saw_inf >= 10
    est = empirical_ball_mass(model, traj, 30, 0.0, 0.001, 50_000, seed=6, kind="free")
    exact = free_measure(model, traj, 30, 1.0).log_mass_window(0.0, 0.001) / 30
    assert abs(est.log_mass_per_t - exact) <= 3 * est.std_error


def test_chunked_runs_identical_across_executors():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=40)
    plain = empirical_ball_mass(model, traj, 20, 0.8, 0.1, 5000, seed=7, n_chunks=4)
    for workers in (2, 4):
        with ThreadPoolExecutor(workers) as ex:
            pooled = empirical_ball_mass(
                model, traj, 20, 0.8, 0.1, 5000, seed=7, n_chunks=4, executor=ex
            )
        assert pooled == plain


def test_argument_validation():
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=40)
    with pytest.raises(OutOfHorizon):
        simulate_trajectory(model, traj, 50, seed=1)
    with pytest.raises(OutOfHorizon):
        simulate_batch(model, traj, 50, 10, seed=1)
    with pytest.raises(InvalidSpec):
        empirical_ball_mass(model, traj, 0, 0.5, 0.05, 10, seed=1)
    with pytest.raises(InvalidSpec):
        empirical_ball_mass(model, traj, 10, 0.5, 0.0, 10, seed=1)
    with pytest.raises(InvalidSpec):
        empirical_ball_mass(model, traj, 10, 0.5, 0.05, 0, seed=1)
    with pytest.raises(InvalidSpec):
        empirical_ball_mass(model, traj, 10, 0.5, 0.05, 10, seed=1, kind="other")
    with pytest.raises(InvalidSpec):
        simulate_batch(model, traj, 10, 10, seed=1, n_chunks=0)
    with pytest.raises(DimensionMismatch):
        empirical_ball_mass(model, traj, 10, [0.5, 0.5], 0.05, 10, seed=1)
    with pytest.raises(DimensionMismatch):
        empirical_rate_scan(model, traj, 10, [[0.5, 0.5]], 0.05, 10, seed=1)


def test_scan_csv(tmp_path):
    model = homogeneous([0.6, 0.4])
    traj = realize(ENV1, seed=3, horizon=40)
    scan = empirical_rate_scan(model, traj, 20, [0.7, 5.0], 0.1, 2000, seed=3, kind="free")
    out = tmp_path / "scan.csv"
    scan_to_csv(scan, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "w_1,log_mass_per_t,std_error,hits,n_samples,t,seed"
    first = lines[1].split(",")
    assert float(first[0]) == 0.7
    assert float(first[1]) == pytest.approx(scan[0].log_mass_per_t)
    assert first[3:] == [str(scan[0].hits), "2000", "20", "3"]
    assert lines[2].split(",")[1] == "-inf"
