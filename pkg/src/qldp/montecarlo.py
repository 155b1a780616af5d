"""Seeded simulation of renewal-reward paths in a fixed environment and
empirical estimation of Gibbs-weighted ball masses.

Paths are sampled under the quenched path law: waiting times from the
position-dependent waiting law, then a reward atom conditional on the
waiting time, both read off the environment trajectory.  The Hamiltonian
H accumulates the potential of every renewal completed by the horizon, so
averaging e^H against indicator functions estimates the unnormalized
constrained / free reward measures.  Estimation is plain hit-or-miss: no
tilting or importance sampling, which keeps the estimator unbiased and
the error analysis elementary, at the cost of vanishing hit rates deep in
the large-deviation regime (a zero-hit batch is reported, not patched).

Randomness comes from a counter-based generator keyed by (seed, stream),
so every draw is a pure function of the seed and the chunk index.  For a
fixed seed and a fixed chunk partition the results are bit-identical no
matter how many workers execute the chunks.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .env import EnvironmentTrajectory
from .errors import DimensionMismatch, InvalidSpec, OutOfHorizon
from .model import RenewalModel

__all__ = [
    "Trajectory",
    "BatchSample",
    "BallMassEstimate",
    "simulate_trajectory",
    "simulate_batch",
    "empirical_ball_mass",
    "empirical_rate_scan",
    "scan_to_csv",
]

_BALL_TOL = 1e-12

# stream-index offsets inside the Philox key; stream 0 is reserved for
# environment realization so path noise never aliases letter noise
_SINGLE_STREAM = 1
_CHUNK_STREAM = 2


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One sampled renewal-reward path up to the horizon t.

    waits holds the waiting times of renewals completed by t, with a
    trailing inf recording an infinite waiting time (after which no
    further renewal ever occurs).  A finite waiting time that overshoots
    the horizon is drawn but not recorded.  renewal_times starts at 0 and
    ends at the last renewal epoch <= t; W_t sums the rewards of counted
    renewals and H their potentials.
    """

    waits: tuple[float, ...]
    renewal_times: tuple[int, ...]
    rewards: np.ndarray
    W_t: np.ndarray
    N_t: int
    H: float
    seed: int


@dataclass(frozen=True)
class BallMassEstimate:
    """Hit-or-miss estimate of (1/t) log of a ball mass.

    log_mass_per_t is (1/t) log mean(e^H 1{hit}); std_error is the
    delta-method standard error of that quantity.  hits == 0 means the
    ball was never entered: log_mass_per_t is -inf and std_error is inf,
    a signal to raise n_samples or t rather than an error.
    """

    log_mass_per_t: float
    std_error: float
    hits: int
    w: tuple[float, ...]
    delta: float
    kind: str
    n_samples: int
    t: int
    seed: int


def _philox(seed: int, stream: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class _PositionTables:
    """Per-position sampling tables for departures at 0..t-1.

    wcdf rows are waiting-time CDF values at s = 1..s_max; when the law is
    proper the last entry is +inf so rounding residue cannot leak draws
    into a spurious infinite wait.  Reward laws are deduplicated; per law,
    acdf[s] holds the atom-mass CDF (last finite entry replaced by +inf)
    and apts[s] the atom points.
    """

    def __init__(self, model: RenewalModel, traj: EnvironmentTrajectory, t: int):
        s_max = model.s_max
        self.s_max = s_max
        self.dim = model.dim
        self.wcdf = np.empty((max(t, 1), s_max))
        self.vrows = np.empty((max(t, 1), s_max))
        law_ids = []
        laws: list = []
        index_of: dict[int, int] = {}
        for u in range(t):
            law = model.waiting_law(traj, u)
            if law.s_max > s_max:
                raise InvalidSpec("waiting law support exceeds model s_max")
            cums = np.cumsum(law.probs[1:])
            row = np.full(s_max, cums[-1])
            row[: law.s_max] = cums
            if law.p_inf <= 0.0:
                row[-1] = np.inf
            self.wcdf[u] = row
            self.vrows[u] = model.potential_row(traj, u)[:s_max]
            rlaw = model.reward_law(traj, u)
            idx = index_of.get(id(rlaw))
            if idx is None:
                idx = len(laws)
                index_of[id(rlaw)] = idx
                laws.append(rlaw)
            law_ids.append(idx)
            for s in law.support:
                if rlaw.per_s.get(int(s)) is None and rlaw.default is None:
                    raise InvalidSpec(
                        f"waiting support s={int(s)} has no reward atoms at position {u}"
                    )
        self.law_ids = np.asarray(law_ids, dtype=np.int64)
        self.acdf: list[np.ndarray] = []
        self.apts: list[np.ndarray] = []
        for rlaw in laws:
            per_s = [rlaw.per_s.get(s, rlaw.default) for s in range(s_max + 1)]
            width = max((len(g[1]) for g in per_s if g is not None), default=1)
            acdf = np.full((s_max + 1, width), np.inf)
            apts = np.zeros((s_max + 1, width, model.dim))
            for s, got in enumerate(per_s):
                if got is None:
                    continue
                points, masses = got
                k = len(masses)
                acdf[s, : k - 1] = np.cumsum(masses)[:-1]
                apts[s, :k] = points
            self.acdf.append(acdf)
            self.apts.append(apts)


def _simulate_chunk(tables: _PositionTables, t: int, size: int, seed: int, stream: int):
    """Sample `size` paths; returns (W, H, N, final_pos) arrays.

    Each step draws one wait uniform and one atom uniform for every path
    in the chunk, active or not, so the draw schedule is a pure function
    of (seed, stream, size).
    """
    rng = _philox(seed, stream)
    s_max = tables.s_max
    pos = np.zeros(size, dtype=np.int64)
    W = np.zeros((size, tables.dim))
    H = np.zeros(size)
    N = np.zeros(size, dtype=np.int64)
    active = np.full(size, t > 0)
    for _ in range(t + 1):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        u_wait = rng.random(size)
        u_atom = rng.random(size)
        rows = tables.wcdf[pos[act]]
        s = 1 + np.sum(rows <= u_wait[act, None], axis=1)
        land_ok = (s <= s_max) & (pos[act] + s <= t)
        active[act[~land_ok]] = False
        ren = act[land_ok]
        if ren.size == 0:
            continue
        s_ren = s[land_ok]
        H[ren] += tables.vrows[pos[ren], s_ren - 1]
        law_here = tables.law_ids[pos[ren]]
        for lid in np.unique(law_here):
            mask = law_here == lid
            rr = ren[mask]
            ss = s_ren[mask]
            a = np.sum(tables.acdf[lid][ss] <= u_atom[rr, None], axis=1)
            W[rr] += tables.apts[lid][ss, a]
        pos[ren] += s_ren
        N[ren] += 1
        active[ren[pos[ren] == t]] = False
    return W, H, N, pos


def _chunk_sizes(n_samples: int, n_chunks: int) -> list[int]:
    base, extra = divmod(n_samples, n_chunks)
    return [base + (c < extra) for c in range(n_chunks)]


@dataclass(frozen=True, eq=False)
class BatchSample:
    """Per-sample summaries of a batch of paths: reward sums W (n, dim),
    Hamiltonians H (n,), renewal counts N_t (n,) and last renewal epochs
    (n,).  A path has a renewal exactly at the horizon iff its last
    renewal epoch equals t."""

    W: np.ndarray
    H: np.ndarray
    N_t: np.ndarray
    last_renewal: np.ndarray
    t: int
    seed: int


def simulate_batch(
    model: RenewalModel,
    traj_env: EnvironmentTrajectory,
    t: int,
    n_samples: int,
    seed: int,
    *,
    n_chunks: int = 1,
    executor=None,
) -> BatchSample:
    """Sample n_samples independent paths, vectorized across the batch.

    The batch is split into n_chunks contiguous chunks; chunk c draws
    from the counter-based stream keyed (seed, c), so the output is a
    pure function of (seed, n_samples, n_chunks) no matter how many
    executor workers run the chunks.
    """
    if t < 0 or t > traj_env.horizon:
        raise OutOfHorizon(f"t={t} outside trajectory horizon {traj_env.horizon}")
    if n_samples < 1:
        raise InvalidSpec("n_samples must be >= 1")
    if not 1 <= n_chunks <= n_samples:
        raise InvalidSpec("n_chunks must be in 1..n_samples")
    tables = _PositionTables(model, traj_env, t)
    sizes = _chunk_sizes(n_samples, n_chunks)
    jobs = [(tables, t, size, seed, _CHUNK_STREAM + c) for c, size in enumerate(sizes)]
    if executor is None:
        parts = [_simulate_chunk(*job) for job in jobs]
    else:
        parts = list(executor.map(lambda job: _simulate_chunk(*job), jobs))
    return BatchSample(
        W=np.concatenate([p[0] for p in parts]),
        H=np.concatenate([p[1] for p in parts]),
        N_t=np.concatenate([p[2] for p in parts]),
        last_renewal=np.concatenate([p[3] for p in parts]),
        t=t,
        seed=seed,
    )


def simulate_trajectory(
    model: RenewalModel, traj_env: EnvironmentTrajectory, t: int, seed: int
) -> Trajectory:
    """Sample one renewal-reward path up to time t, deterministic in seed.

    Waiting times are drawn sequentially from the waiting law at the
    current renewal epoch, then a reward atom from the conditional reward
    law at the same epoch.  Sampling stops at the first infinite waiting
    time, at the first wait overshooting t, or on landing exactly at t.
    """
    if t < 0 or t > traj_env.horizon:
        raise OutOfHorizon(f"t={t} outside trajectory horizon {traj_env.horizon}")
    tables = _PositionTables(model, traj_env, t)
    rng = _philox(seed, _SINGLE_STREAM)
    pos = 0
    waits: list[float] = []
    times = [0]
    rewards: list[np.ndarray] = []
    H = 0.0
    while pos < t:
        u_wait = rng.random()
        u_atom = rng.random()
        s = 1 + int(np.sum(tables.wcdf[pos] <= u_wait))
        if s > tables.s_max:
            waits.append(math.inf)
            break
        if pos + s > t:
            break
        H += float(tables.vrows[pos, s - 1])
        lid = tables.law_ids[pos]
        a = int(np.sum(tables.acdf[lid][s] <= u_atom))
        rewards.append(tables.apts[lid][s, a].copy())
        waits.append(float(s))
        pos += s
        times.append(pos)
    n = len(times) - 1
    reward_arr = np.array(rewards) if rewards else np.zeros((0, model.dim))
    return Trajectory(
        waits=tuple(waits),
        renewal_times=tuple(times),
        rewards=reward_arr,
        W_t=reward_arr.sum(axis=0),
        N_t=n,
        H=H,
        seed=seed,
    )


def _ball_hits(W: np.ndarray, t: int, w_vec: np.ndarray, delta: float) -> np.ndarray:
    dist = np.max(np.abs(W / t - w_vec), axis=1)
    return dist <= delta + _BALL_TOL


def _estimate(hit, H, n_samples, t, w_vec, delta, kind, seed) -> BallMassEstimate:
    hits = int(np.count_nonzero(hit))
    w_tup = tuple(float(x) for x in w_vec)
    if hits == 0:
        return BallMassEstimate(
            log_mass_per_t=-math.inf,
            std_error=math.inf,
            hits=0,
            w=w_tup,
            delta=delta,
            kind=kind,
            n_samples=n_samples,
            t=t,
            seed=seed,
        )
    shift = float(H[hit].max())
    y = np.exp(H[hit] - shift)
    s1 = float(np.sum(y))
    s2 = float(np.sum(y * y))
    mean = s1 / n_samples
    log_mass = shift + math.log(mean)
    if n_samples > 1:
        var = max(0.0, (s2 - s1 * s1 / n_samples) / (n_samples - 1))
        std_error = math.sqrt(var / n_samples) / (mean * t)
    else:
        std_error = math.inf
    return BallMassEstimate(
        log_mass_per_t=log_mass / t,
        std_error=std_error,
        hits=hits,
        w=w_tup,
        delta=delta,
        kind=kind,
        n_samples=n_samples,
        t=t,
        seed=seed,
    )


def _check_ball_args(t, delta, kind):
    if t < 1:
        raise InvalidSpec("ball-mass estimation needs t >= 1")
    if delta <= 0:
        raise InvalidSpec("ball radius delta must be positive")
    if kind not in ("constrained", "free"):
        raise InvalidSpec(f"kind must be 'constrained' or 'free', got {kind!r}")


def empirical_ball_mass(
    model: RenewalModel,
    traj_env: EnvironmentTrajectory,
    t: int,
    w,
    delta: float,
    n_samples: int,
    seed: int,
    kind: str = "constrained",
    *,
    n_chunks: int = 1,
    executor=None,
) -> BallMassEstimate:
    """Estimate (1/t) log of the Gibbs-weighted mass of the sup-norm ball
    of radius delta around w, by averaging e^H 1{W_t/t in ball} over
    sampled paths.  kind='constrained' additionally requires a renewal
    exactly at t (hit-or-miss rejection); kind='free' does not.

    The estimator of the mass itself is unbiased; the reported standard
    error on the log is first-order (delta method).  Chunked runs are
    bit-identical for a fixed seed and chunk count regardless of the
    executor used.
    """
    _check_ball_args(t, delta, kind)
    w_vec = np.atleast_1d(np.asarray(w, dtype=float))
    if w_vec.shape != (model.dim,):
        raise DimensionMismatch(f"w has dimension {w_vec.size}, reward dimension is {model.dim}")
    batch = simulate_batch(
        model, traj_env, t, n_samples, seed, n_chunks=n_chunks, executor=executor
    )
    hit = _ball_hits(batch.W, t, w_vec, delta)
    if kind == "constrained":
        hit &= batch.last_renewal == t
    return _estimate(hit, batch.H, n_samples, t, w_vec, delta, kind, seed)


def empirical_rate_scan(
    model: RenewalModel,
    traj_env: EnvironmentTrajectory,
    t: int,
    w_grid,
    delta: float,
    n_samples: int,
    seed: int,
    kind: str = "constrained",
    *,
    n_chunks: int = 1,
    executor=None,
) -> list[BallMassEstimate]:
    """Ball-mass estimates on a grid of centers, all evaluated on one
    shared sample batch so neighboring estimates are variance-coupled."""
    _check_ball_args(t, delta, kind)
    grid = np.asarray(w_grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.ndim != 2 or grid.shape[1] != model.dim:
        raise DimensionMismatch(f"w_grid entries must have dimension {model.dim}")
    if len(grid) == 0:
        raise InvalidSpec("w_grid must contain at least one center")
    batch = simulate_batch(
        model, traj_env, t, n_samples, seed, n_chunks=n_chunks, executor=executor
    )
    at_t = batch.last_renewal == t
    out = []
    for w_vec in grid:
        hit = _ball_hits(batch.W, t, w_vec, delta)
        if kind == "constrained":
            hit &= at_t
        out.append(_estimate(hit, batch.H, n_samples, t, w_vec, delta, kind, seed))
    return out


def scan_to_csv(records: list[BallMassEstimate], path) -> None:
    if not records:
        raise InvalidSpec("empty scan")
    dim = len(records[0].w)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            tuple(f"w_{j + 1}" for j in range(dim))
            + ("log_mass_per_t", "std_error", "hits", "n_samples", "t", "seed")
        )
        for rec in records:
            writer.writerow(
                tuple(repr(x) for x in rec.w)
                + (
                    repr(rec.log_mass_per_t),
                    repr(rec.std_error),
                    rec.hits,
                    rec.n_samples,
                    rec.t,
                    rec.seed,
                )
            )
