"""Exact partition functions and reward-distribution measures.

Everything here runs in log-space (log-sum-exp accumulation, -inf for zero
mass) because weights like e^{h t} overflow linear floats long before the
horizons of interest.  The core recurrence decomposes a constrained window
at its last renewal:

    Z_tau = sum_{s} Z_{tau-s} * w_{tau-s}(s),    Z_0 = 1,

where w_u(s) is the one-step Gibbs weight at position u.  The free variants
attach the probability of overshooting the remaining window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .env import EnvironmentTrajectory
from .errors import (
    AllMinusInfinity,
    DimensionMismatch,
    MemoryCap,
    OffLattice,
    OutOfHorizon,
    TooLarge,
)
from .model import RenewalModel

_LATTICE_TOL = 1e-9


def _traj_id(traj: EnvironmentTrajectory) -> str:
    kind = traj.spec.kind if traj.spec is not None else "raw"
    seed = "-" if traj.seed is None else str(traj.seed)
    return f"{kind}:seed={seed}:off={traj.offset}"


@dataclass(frozen=True, eq=False)
class PartitionTable:
    """log Z_tau for tau = 0..t at a fixed phi; -inf marks horizons that no
    composition of supported waiting times can reach."""

    values: np.ndarray
    phi: np.ndarray
    traj_id: str
    model_id: str

    @property
    def t(self) -> int:
        return len(self.values) - 1


def constrained_partition(model: RenewalModel, traj, t: int, phi) -> PartitionTable:
    """Forward DP for the renewal partition function on windows [0, tau],
    tau = 0..t.  Cost O(t * s_max) plus one weight row per position."""
    if t < 0 or t > traj.horizon:
        raise OutOfHorizon(f"t={t} outside trajectory horizon {traj.horizon}")
    phi_vec = model._phi_vec(phi)
    log_z = np.full(t + 1, -np.inf)
    log_z[0] = 0.0
    for u in range(t):
        zu = log_z[u]
        if zu == -np.inf:
            continue
        span = min(model.s_max, t - u)
        row = model.log_weight_row(traj, u, phi_vec)
        np.logaddexp(log_z[u + 1 : u + 1 + span], zu + row[:span], out=log_z[u + 1 : u + 1 + span])
    return PartitionTable(
        values=log_z, phi=phi_vec, traj_id=_traj_id(traj), model_id=model.label or "model"
    )


def free_partition(model: RenewalModel, traj, t: int, phi, table: PartitionTable | None = None):
    """log of sum_{tau<=t} Z_tau * P_tau[S > t - tau]: the unconstrained
    partition function.  Reuses a precomputed table when one is supplied."""
    if table is None:
        table = constrained_partition(model, traj, t, phi)
    elif table.t < t:
        raise OutOfHorizon(f"supplied table covers t={table.t} < {t}")
    terms = np.full(t + 1, -np.inf)
    for tau in range(t + 1):
        z = table.values[tau]
        if z == -np.inf:
            continue
        tail = model.waiting_law(traj, tau).tail(t - tau)
        if tail > 0.0:
            terms[tau] = z + math.log(tail)
    return float(logsumexp(terms))


def brute_force_partition(model: RenewalModel, traj, t: int, phi, constrained: bool = True):
    """Exact enumeration over all renewal configurations; test oracle only."""
    if t > 14 or model.s_max > 64:
        raise TooLarge("brute force limited to t <= 14 and s_max <= 64")
    if t < 0 or t > traj.horizon:
        raise OutOfHorizon(f"t={t} outside trajectory horizon {traj.horizon}")
    phi_vec = model._phi_vec(phi)
    rows = [np.exp(model.log_weight_row(traj, u, phi_vec)) for u in range(t)]
    tails = [model.waiting_law(traj, tau).tail(t - tau) for tau in range(t + 1)]
    terms: list[float] = []

    def rec(pos: int, acc: float) -> None:
        if constrained:
            if pos == t:
                terms.append(acc)
                return
        else:
            terms.append(acc * tails[pos])
            if pos == t:
                return
        row = rows[pos]
        for s in range(1, min(model.s_max, t - pos) + 1):
            w = row[s - 1]
            if w > 0.0:
                rec(pos + s, acc * w)

    rec(0, 1.0)
    total = math.fsum(terms)
    return math.log(total) if total > 0.0 else -math.inf


@dataclass(frozen=True, eq=False)
class LatticeMeasure:
    """Reward-sum distribution on the lattice generated by grid_step, with
    Gibbs weighting folded in.  Masses are stored in log-space; the lattice
    index k stands for the reward value k * grid_step (coordinatewise)."""

    grid_step: tuple[float, ...]
    log_atoms: dict[tuple[int, ...], float]
    t: int

    def _key(self, idx) -> tuple[int, ...]:
        if isinstance(idx, (int, np.integer)):
            return (int(idx),)
        return tuple(int(i) for i in idx)

    def log_mass(self, idx) -> float:
        return self.log_atoms.get(self._key(idx), -math.inf)

    def mass(self, idx) -> float:
        return math.exp(self.log_mass(idx))

    @property
    def atoms(self) -> dict[tuple[int, ...], float]:
        return {k: math.exp(v) for k, v in self.log_atoms.items()}

    def log_total_mass(self) -> float:
        if not self.log_atoms:
            return -math.inf
        return float(logsumexp(np.fromiter(self.log_atoms.values(), dtype=float)))

    def log_mass_window(self, w, radius: float) -> float:
        """log of the mass carried by atoms whose scaled value k*step/t lies
        within sup-distance radius of w."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        step = np.asarray(self.grid_step)
        picked = [
            lm
            for k, lm in self.log_atoms.items()
            if np.all(np.abs(np.asarray(k) * step / max(self.t, 1) - w) <= radius + 1e-12)
        ]
        if not picked:
            return -math.inf
        return float(logsumexp(np.asarray(picked)))


def _index_shifts(points: np.ndarray, steps: np.ndarray) -> np.ndarray:
    ratio = points / steps
    idx = np.rint(ratio)
    if np.any(np.abs(ratio - idx) > _LATTICE_TOL * np.maximum(1.0, np.abs(ratio))):
        raise OffLattice(f"reward atom {points} is not on the lattice with step {steps}")
    return idx.astype(np.int64)


def _measure_tables(model: RenewalModel, traj, t: int, steps: np.ndarray, memory_cap: int):
    """Yield (tau, {lattice index: log mass}) for tau = 0..t, push-style."""
    zero_phi = np.zeros(model.dim)
    origin = (0,) * model.dim
    alive: dict[int, dict[tuple[int, ...], float]] = {0: {origin: 0.0}}
    total_entries = 1
    for u in range(t + 1):
        cur = alive.pop(u, None)
        if cur is not None:
            total_entries -= len(cur)
        yield u, (cur or {})
        if cur is None or u == t:
            continue
        row0 = model.log_weight_row(traj, u, zero_phi)
        law = model.reward_law(traj, u)
        for s in range(1, min(model.s_max, t - u) + 1):
            base = row0[s - 1]
            if base == -math.inf:
                continue
            points, masses = law.atoms(s)
            shifts = _index_shifts(points, steps)
            with np.errstate(divide="ignore"):
                weights = base + np.log(masses)
            tgt = alive.setdefault(u + s, {})
            before = len(tgt)
            for idx, lm in cur.items():
                for shift_vec, wt in zip(shifts, weights):
                    if wt == -math.inf:
                        continue
                    key = tuple(int(a + b) for a, b in zip(idx, shift_vec))
                    old = tgt.get(key)
                    tgt[key] = wt + lm if old is None else float(np.logaddexp(old, wt + lm))
            total_entries += len(tgt) - before
            if total_entries > memory_cap:
                raise MemoryCap(
                    f"lattice measure exceeded {memory_cap} stored atoms at tau={u + s}"
                )


def _check_steps(model: RenewalModel, grid_step) -> np.ndarray:
    steps = np.atleast_1d(np.asarray(grid_step, dtype=float))
    if steps.shape != (model.dim,):
        raise DimensionMismatch(f"grid_step must have one entry per reward coordinate ({model.dim})")
    if np.any(steps <= 0):
        raise OffLattice("grid_step entries must be positive")
    return steps


def constrained_measure(
    model: RenewalModel, traj, t: int, grid_step, memory_cap: int = 4_000_000
) -> LatticeMeasure:
    """Exact Gibbs-weighted distribution of the reward sum on windows that
    end with a renewal at t."""
    if t < 0 or t > traj.horizon:
        raise OutOfHorizon(f"t={t} outside trajectory horizon {traj.horizon}")
    steps = _check_steps(model, grid_step)
    final: dict[tuple[int, ...], float] = {}
    for tau, table in _measure_tables(model, traj, t, steps, memory_cap):
        if tau == t:
            final = table
    return LatticeMeasure(grid_step=tuple(steps), log_atoms=final, t=t)


def free_measure(
    model: RenewalModel, traj, t: int, grid_step, memory_cap: int = 4_000_000
) -> LatticeMeasure:
    """Exact reward-sum distribution without the endpoint renewal: each
    constrained window [0, tau] contributes with the probability that the
    next waiting time overshoots t - tau."""
    if t < 0 or t > traj.horizon:
        raise OutOfHorizon(f"t={t} outside trajectory horizon {traj.horizon}")
    steps = _check_steps(model, grid_step)
    acc: dict[tuple[int, ...], float] = {}
    for tau, table in _measure_tables(model, traj, t, steps, memory_cap):
        if not table:
            continue
        tail = model.waiting_law(traj, tau).tail(t - tau)
        if tail <= 0.0:
            continue
        log_tail = math.log(tail)
        for idx, lm in table.items():
            old = acc.get(idx)
            acc[idx] = lm + log_tail if old is None else float(np.logaddexp(old, lm + log_tail))
    return LatticeMeasure(grid_step=tuple(steps), log_atoms=acc, t=t)


@dataclass(frozen=True)
class KingmanEstimate:
    """Finite-t free-energy readings (1/t) log Z along a t ladder.  The last
    reading is the estimate; spread is the max-min gap of the last three."""

    estimate: float
    t_list: tuple[int, ...]
    per_t: tuple[float, ...]
    spread: float
    kind: str


def kingman_cgf_estimate(
    model: RenewalModel, traj, phi, t_list, kind: str = "constrained"
) -> KingmanEstimate:
    """Estimate the growth rate of the (constrained or free) partition
    function from its values along t_list."""
    ts = tuple(int(t) for t in t_list)
    if not ts or any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] < 1:
        raise ValueError("t_list must be strictly increasing positive integers")
    if ts[-1] > traj.horizon:
        raise OutOfHorizon(f"t={ts[-1]} outside trajectory horizon {traj.horizon}")
    if kind not in ("constrained", "free"):
        raise ValueError(f"unknown kind {kind!r}")
    table = constrained_partition(model, traj, ts[-1], phi)
    if kind == "constrained":
        raw = [float(table.values[t]) for t in ts]
    else:
        raw = [free_partition(model, traj, t, table.phi, table=table) for t in ts]
    per_t = tuple(v / t for v, t in zip(raw, ts))
    finite = [v for v in per_t if v > -math.inf]
    if not finite:
        raise AllMinusInfinity(
            "partition function vanished along the whole t ladder; "
            "check waiting-time support reachability"
        )
    last3 = [v for v in per_t[-3:] if v > -math.inf]
    spread = max(last3) - min(last3) if len(last3) > 1 else math.inf
    return KingmanEstimate(
        estimate=per_t[-1], t_list=ts, per_t=per_t, spread=spread, kind=kind
    )


def default_t_list(t: int, horizon: int) -> tuple[int, ...]:
    """Geometric ladder {t, 2t, 4t} clipped to the horizon."""
    ts = [x for x in (t, 2 * t, 4 * t) if x <= horizon]
    if not ts:
        raise OutOfHorizon(f"t={t} exceeds horizon {horizon}")
    return tuple(ts)


def partition_to_csv(table: PartitionTable, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("tau", "log_Z"))
        for tau, value in enumerate(table.values):
            writer.writerow((tau, repr(float(value))))


def measure_to_csv(measure: LatticeMeasure, path) -> None:
    dim = len(measure.grid_step)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(tuple(f"idx_{j}" for j in range(dim)) + ("mass",))
        for key in sorted(measure.log_atoms):
            writer.writerow(key + (repr(math.exp(measure.log_atoms[key])),))
