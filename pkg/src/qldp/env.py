"""Random environments: letter alphabets, realized disorder trajectories, shifts.

An environment is a sequence of "letters" (flat records of named real
parameters) produced by one of three mechanisms: a deterministic periodic
cycle, an iid draw from a finite letter law, or a finite-state Markov chain.
Model callbacks read whatever parameters they need from each letter.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec, OutOfHorizon


@dataclass(frozen=True)
class Letter:
    """One environment state: an immutable record of named real parameters."""

    items: tuple[tuple[str, float], ...]

    def __getitem__(self, key: str) -> float:
        for name, value in self.items:
            if name == key:
                return value
        raise KeyError(key)

    def get(self, key: str, default: float | None = None) -> float | None:
        for name, value in self.items:
            if name == key:
                return value
        return default

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.items)

    def as_dict(self) -> dict[str, float]:
        return dict(self.items)


def letter(**params: float) -> Letter:
    """Build a Letter from keyword parameters, e.g. letter(rho=0.3)."""
    return Letter(tuple(sorted((k, float(v)) for k, v in params.items())))


@dataclass(frozen=True)
class Periodic:
    """Deterministic cycle through `states`; period = len(states)."""

    states: tuple[Letter, ...]

    @property
    def period(self) -> int:
        return len(self.states)

    kind = "periodic"


@dataclass(frozen=True)
class IidSequence:
    """Iid draws from a finite letter law."""

    letters: tuple[Letter, ...]
    weights: tuple[float, ...]

    kind = "iid"


@dataclass(frozen=True)
class MarkovShift:
    """Stationary-start finite-state Markov chain over letters."""

    letters: tuple[Letter, ...]
    transition: tuple[tuple[float, ...], ...]
    initial: tuple[float, ...]

    kind = "markov"


EnvironmentSpec = Periodic | IidSequence | MarkovShift

_SUM_TOL = 1e-12


def _check_spec(spec: EnvironmentSpec) -> None:
    if isinstance(spec, Periodic):
        if len(spec.states) < 1:
            raise InvalidSpec("periodic spec needs at least one state")
        return
    if isinstance(spec, IidSequence):
        if len(spec.letters) < 1 or len(spec.letters) != len(spec.weights):
            raise InvalidSpec("iid spec needs matching letters and weights")
        w = np.asarray(spec.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > _SUM_TOL:
            raise InvalidSpec("letter law must be a probability vector (sum 1 within 1e-12)")
        return
    if isinstance(spec, MarkovShift):
        n = len(spec.letters)
        P = np.asarray(spec.transition, dtype=float)
        if P.shape != (n, n):
            raise InvalidSpec("transition matrix shape must match letter count")
        if np.any(P < 0) or np.any(np.abs(P.sum(axis=1) - 1.0) > _SUM_TOL):
            raise InvalidSpec("transition rows must sum to 1 within 1e-12")
        init = np.asarray(spec.initial, dtype=float)
        if init.shape != (n,) or np.any(init < 0) or abs(init.sum() - 1.0) > _SUM_TOL:
            raise InvalidSpec("initial distribution must be a probability vector")
        if not _irreducible(P):
            raise InvalidSpec("transition matrix is not irreducible")
        return
    raise InvalidSpec(f"unknown environment spec {type(spec).__name__}")


def _irreducible(P: np.ndarray) -> bool:
    # reachability closure of the support digraph
    n = P.shape[0]
    reach = (P > 0) | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(reach.all())


@dataclass(frozen=True)
class EnvironmentTrajectory:
    """A realized disorder sequence; position tau gives the letter seen after
    tau applications of the shift.  Shifting returns a view over the same
    storage, so trajectories are cheap to re-anchor and safe to share.
    """

    letters: tuple[Letter, ...] = field(repr=False)
    offset: int = 0
    spec: EnvironmentSpec | None = None
    seed: int | None = None

    @property
    def horizon(self) -> int:
        return len(self.letters) - 1 - self.offset

    def letter(self, tau: int) -> Letter:
        if tau < 0 or tau > self.horizon:
            raise OutOfHorizon(f"position {tau} outside horizon {self.horizon}")
        return self.letters[self.offset + tau]

    def window(self, start: int, stop: int) -> tuple[Letter, ...]:
        """Letters at positions start..stop-1 (bounds-checked)."""
        if start < 0 or stop - 1 > self.horizon:
            raise OutOfHorizon(f"window [{start},{stop}) outside horizon {self.horizon}")
        return self.letters[self.offset + start : self.offset + stop]


def realize(spec: EnvironmentSpec, seed: int | None, horizon: int) -> EnvironmentTrajectory:
    """Sample a trajectory of length horizon+1.  Deterministic in
    (spec, seed, horizon); realizations with the same seed and a longer
    horizon extend the shorter one letter-for-letter.
    """
    _check_spec(spec)
    if horizon < 0:
        raise InvalidSpec("horizon must be nonnegative")

    if isinstance(spec, Periodic):
        n = spec.period
        letters = tuple(spec.states[tau % n] for tau in range(horizon + 1))
        return EnvironmentTrajectory(letters=letters, spec=spec, seed=None)

    if seed is None:
        raise InvalidSpec("seed required for stochastic environments")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))

    if isinstance(spec, IidSequence):
        cdf = np.cumsum(np.asarray(spec.weights, dtype=float))
        u = rng.random(horizon + 1)
        idx = np.searchsorted(cdf, u, side="right")
        idx = np.minimum(idx, len(spec.letters) - 1)
        letters = tuple(spec.letters[i] for i in idx)
        return EnvironmentTrajectory(letters=letters, spec=spec, seed=seed)

    # MarkovShift: one uniform per step, consumed in order, so longer
    # horizons with the same seed are prefix-consistent.
    P = np.asarray(spec.transition, dtype=float)
    cdfs = np.cumsum(P, axis=1)
    init_cdf = np.cumsum(np.asarray(spec.initial, dtype=float))
    u = rng.random(horizon + 1)
    n = len(spec.letters)
    idx = np.empty(horizon + 1, dtype=np.int64)
    idx[0] = min(int(np.searchsorted(init_cdf, u[0], side="right")), n - 1)
    for tau in range(1, horizon + 1):
        idx[tau] = min(int(np.searchsorted(cdfs[idx[tau - 1]], u[tau], side="right")), n - 1)
    letters = tuple(spec.letters[i] for i in idx)
    return EnvironmentTrajectory(letters=letters, spec=spec, seed=seed)


def shift(traj: EnvironmentTrajectory, tau: int) -> EnvironmentTrajectory:
    """View of traj re-anchored at position tau; shift(shift(w,a),b) equals
    shift(w,a+b) letter-wise.  No letters are copied."""
    if tau < 0 or tau > traj.horizon:
        raise OutOfHorizon(f"shift by {tau} exceeds horizon {traj.horizon}")
    return EnvironmentTrajectory(
        letters=traj.letters, offset=traj.offset + tau, spec=traj.spec, seed=traj.seed
    )


def birkhoff_average(traj, observable, n: int) -> float:
    """(1/n) sum of observable(letter) over the first n positions."""
    if n < 1 or n - 1 > traj.horizon:
        raise OutOfHorizon(f"need {n} letters, horizon is {traj.horizon}")
    return math.fsum(observable(traj.letter(tau)) for tau in range(n)) / n


def trajectory_to_csv(traj: EnvironmentTrajectory, path) -> None:
    """Dump positions 0..horizon as rows (tau, param columns).  All letters
    must share one parameter schema."""
    names = traj.letter(0).names
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("tau",) + names)
        for tau in range(traj.horizon + 1):
            le = traj.letter(tau)
            if le.names != names:
                raise InvalidSpec("letters with mixed parameter schemas cannot be dumped")
            writer.writerow((tau,) + tuple(repr(le[k]) for k in names))


def trajectory_from_csv(path) -> EnvironmentTrajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "tau":
            raise InvalidSpec("trajectory CSV must start with a tau column")
        names = header[1:]
        cache: dict[tuple[float, ...], Letter] = {}
        letters = []
        for row in reader:
            values = tuple(float(v) for v in row[1:])
            if values not in cache:
                cache[values] = letter(**dict(zip(names, values)))
            letters.append(cache[values])
    if not letters:
        raise InvalidSpec("empty trajectory CSV")
    return EnvironmentTrajectory(letters=tuple(letters))
