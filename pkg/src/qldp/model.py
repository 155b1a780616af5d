"""Renewal models over environments: waiting laws, reward atoms, potentials.

A model attaches to each environment position a triple (p, lambda, v): a
waiting-time law on {1..s_max} with an explicit mass at infinity, a finitely
supported reward law on R^d, and a potential v(s).  The one-step weight

    w_tau(s) = p(s) * exp(v(s)) * sum_atoms mass * exp(phi . x)

is the kernel of every exact solver downstream, so it is exposed both as an
exact scalar (gibbs_weight) and as vectorized log-space rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.special import logsumexp

from .env import EnvironmentTrajectory, Letter
from .errors import DimensionMismatch, InvalidSpec

_SUM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class WaitingLaw:
    """Distribution of one waiting time: mass at s = 1..s_max plus mass at
    infinity (defective laws allowed).  probs[0] is a padding zero."""

    probs: np.ndarray
    p_inf: float

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or len(p) < 2 or p[0] != 0.0:
            raise InvalidSpec("waiting law needs masses at s = 1..s_max")
        if np.any(p < 0) or self.p_inf < 0:
            raise InvalidSpec("waiting-law masses must be nonnegative")
        if abs(p.sum() + self.p_inf - 1.0) > _SUM_TOL:
            raise InvalidSpec("waiting-law masses must sum to 1 within 1e-12")
        object.__setattr__(self, "probs", p)
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "_log_probs", np.log(p))
        # suffix sums keep small tail masses accurate
        tails = np.zeros(len(p))
        tails[:-1] = np.cumsum(p[::-1])[::-1][1:]
        object.__setattr__(self, "_tails", tails + self.p_inf)

    @property
    def s_max(self) -> int:
        return len(self.probs) - 1

    @property
    def log_probs(self) -> np.ndarray:
        return self._log_probs

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    def tail(self, s: int) -> float:
        """P[S > s]; equals p_inf for s >= s_max and 1 at s = 0."""
        if s < 0:
            raise InvalidSpec("tail index must be nonnegative")
        if s >= self.s_max:
            return self.p_inf
        return float(self._tails[s])


def waiting_law(probs, p_inf: float | None = None) -> WaitingLaw:
    """Build a WaitingLaw from {s: mass} or a sequence of masses at s=1,2,...

    When p_inf is omitted it absorbs any missing mass.
    """
    if isinstance(probs, dict):
        if not probs:
            raise InvalidSpec("waiting law needs at least one support point")
        s_max = max(probs)
        vec = np.zeros(s_max + 1)
        for s, mass in probs.items():
            if not (isinstance(s, (int, np.integer)) and s >= 1):
                raise InvalidSpec(f"waiting-time support must be integers >= 1, got {s}")
            vec[s] = mass
    else:
        vec = np.concatenate([[0.0], np.asarray(probs, dtype=float)])
    if p_inf is None:
        # rounding residue must not turn a proper law defective
        p_inf = max(0.0, 1.0 - float(vec.sum()))
        if p_inf <= _SUM_TOL:
            p_inf = 0.0
    return WaitingLaw(probs=vec, p_inf=float(p_inf))


@dataclass(frozen=True, eq=False)
class RewardLaw:
    """Finitely supported reward law on R^d, possibly varying with the
    waiting time: per_s overrides apply at specific s, default elsewhere."""

    dim: int
    default: tuple[np.ndarray, np.ndarray] | None
    per_s: dict[int, tuple[np.ndarray, np.ndarray]]

    def atoms(self, s: int) -> tuple[np.ndarray, np.ndarray]:
        got = self.per_s.get(s, self.default)
        if got is None:
            raise InvalidSpec(f"reward law has no atoms at s={s}")
        return got

    @staticmethod
    def _log_mgf_atoms(pair, phi: np.ndarray) -> float:
        # scipy's logsumexp costs ~100us of dispatch per call; rows touch
        # every s, so keep this hand-rolled
        points, masses = pair
        if len(masses) == 1:
            m = masses[0]
            if m <= 0.0:
                return -np.inf
            return float(np.log(m) + points[0] @ phi)
        with np.errstate(divide="ignore"):
            vals = np.log(masses) + points @ phi
        top = vals.max()
        if top == -np.inf:
            return -np.inf
        return float(top + np.log(np.exp(vals - top).sum()))

    def log_mgf(self, phi: np.ndarray, s: int) -> float:
        return self._log_mgf_atoms(self.atoms(s), phi)

    def log_mgf_row(self, phi: np.ndarray, s_max: int) -> np.ndarray:
        """log E[e^{phi.X} | S=s] for s = 1..s_max as a vector."""
        row = np.empty(s_max)
        if self.default is not None:
            row.fill(self._log_mgf_atoms(self.default, phi))
        else:
            row.fill(-np.inf)
        for s, pair in self.per_s.items():
            if 1 <= s <= s_max:
                row[s - 1] = self._log_mgf_atoms(pair, phi)
        return row

    def norm_bound(self) -> float:
        """Largest Euclidean norm over all stored atom points."""
        best = 0.0
        laws = list(self.per_s.values())
        if self.default is not None:
            laws.append(self.default)
        for points, _ in laws:
            if len(points):
                best = max(best, float(np.linalg.norm(points, axis=1).max()))
        return best


def _pack_atoms(atoms, dim: int) -> tuple[np.ndarray, np.ndarray]:
    rows = [np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in atoms]
    if any(r.shape != (dim,) for r in rows):
        raise DimensionMismatch(f"reward atoms must live in dimension {dim}")
    points = np.array(rows)
    masses = np.array([m for _, m in atoms], dtype=float)
    if np.any(masses < 0) or abs(masses.sum() - 1.0) > _SUM_TOL:
        raise InvalidSpec("reward atom masses must be nonnegative and sum to 1 within 1e-12")
    return points, masses


def reward_law(atoms=None, per_s=None, dim: int | None = None) -> RewardLaw:
    """Build a RewardLaw.  atoms: [(point, mass), ...] used for every s;
    per_s: {s: [(point, mass), ...]} overrides."""
    if atoms is None and not per_s:
        raise InvalidSpec("reward law needs atoms")
    if dim is None:
        probe = atoms if atoms is not None else next(iter(per_s.values()))
        dim = np.atleast_1d(np.asarray(probe[0][0], dtype=float)).size
    default = _pack_atoms(atoms, dim) if atoms is not None else None
    packed = {int(s): _pack_atoms(a, dim) for s, a in (per_s or {}).items()}
    return RewardLaw(dim=dim, default=default, per_s=packed)


def delta_reward(point, dim: int | None = None) -> RewardLaw:
    """Deterministic reward: a single unit-mass atom."""
    return reward_law(atoms=[(point, 1.0)], dim=dim)


@dataclass(frozen=True, eq=False)
class RenewalModel:
    """Immutable bundle of position-indexed laws.  Accessors take (traj, tau)
    so laws may read letters beyond the current position (product-form waiting
    laws, potentials keyed to the landing site).  Letter-local models cache
    weight rows per (letter, phi)."""

    s_max: int
    dim: int
    waiting_at: object = field(repr=False)
    reward_at: object = field(repr=False)
    potential_row_at: object = field(repr=False)
    letter_maps: tuple | None = field(default=None, repr=False)
    label: str = ""
    _row_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def letter_local(self) -> bool:
        return self.letter_maps is not None

    def waiting_law(self, traj: EnvironmentTrajectory, tau: int) -> WaitingLaw:
        return self.waiting_at(traj, tau)

    def reward_law(self, traj: EnvironmentTrajectory, tau: int) -> RewardLaw:
        return self.reward_at(traj, tau)

    def potential_row(self, traj: EnvironmentTrajectory, tau: int) -> np.ndarray:
        """v(s) for s = 1..s_max as a vector."""
        return self.potential_row_at(traj, tau)

    def potential(self, traj: EnvironmentTrajectory, tau: int, s: int) -> float:
        if not 1 <= s <= self.s_max:
            raise InvalidSpec(f"s={s} outside 1..{self.s_max}")
        return float(self.potential_row_at(traj, tau)[s - 1])

    def _phi_vec(self, phi) -> np.ndarray:
        vec = np.atleast_1d(np.asarray(phi, dtype=float))
        if vec.shape != (self.dim,):
            raise DimensionMismatch(
                f"phi has dimension {vec.size}, reward dimension is {self.dim}"
            )
        return vec

    def log_weight_row(self, traj, tau: int, phi, zeta: float = 0.0) -> np.ndarray:
        """log w_tau(s) for s = 1..s_max with w_tau(s) =
        p(s) e^{v(s)} E[e^{phi.X}|S=s] e^{-zeta s}; -inf where p(s) = 0."""
        phi = self._phi_vec(phi)
        if self.letter_local:
            key = (traj.letter(tau), phi.tobytes())
            row = self._row_cache.get(key)
            if row is None:
                row = self._build_row(traj, tau, phi)
                if len(self._row_cache) > 4096:
                    self._row_cache.clear()
                self._row_cache[key] = row
        else:
            row = self._build_row(traj, tau, phi)
        if zeta != 0.0:
            return row - zeta * np.arange(1, self.s_max + 1)
        return row

    def _build_row(self, traj, tau: int, phi: np.ndarray) -> np.ndarray:
        law = self.waiting_at(traj, tau)
        if law.s_max > self.s_max:
            raise InvalidSpec("waiting law support exceeds model s_max")
        row = np.full(self.s_max, -np.inf)
        n = law.s_max
        logs = law.log_probs[1:]
        mgf = self.reward_at(traj, tau).log_mgf_row(phi, n)
        v = self.potential_row_at(traj, tau)[:n]
        np.add(logs, mgf, out=mgf)
        np.add(mgf, v, out=mgf)
        row[:n] = mgf
        row[:n][law.probs[1:] == 0] = -np.inf
        return row


def letter_local_model(
    waiting, reward, potential=None, *, s_max: int, dim: int = 1, label: str = ""
) -> RenewalModel:
    """Model whose laws depend only on the letter at the current position.

    waiting: Letter -> WaitingLaw (or a constant WaitingLaw);
    reward: Letter -> RewardLaw (or a constant RewardLaw);
    potential: (Letter, s) -> real, omitted means 0.
    """
    wait_fn = waiting if callable(waiting) else (lambda le: waiting)
    reward_fn = reward if callable(reward) else (lambda le: reward)
    pot_fn = potential if potential is not None else (lambda le, s: 0.0)
    row_cache: dict[Letter, np.ndarray] = {}

    def pot_row(traj, tau):
        le = traj.letter(tau)
        row = row_cache.get(le)
        if row is None:
            row = np.array([float(pot_fn(le, s)) for s in range(1, s_max + 1)])
            row_cache[le] = row
        return row

    return RenewalModel(
        s_max=s_max,
        dim=dim,
        waiting_at=lambda traj, tau: wait_fn(traj.letter(tau)),
        reward_at=lambda traj, tau: reward_fn(traj.letter(tau)),
        potential_row_at=pot_row,
        letter_maps=(wait_fn, reward_fn, pot_fn),
        label=label,
    )


def site_model(
    waiting, reward, potential_row=None, *, s_max: int, dim: int = 1, label: str = ""
) -> RenewalModel:
    """Model whose laws may read the whole trajectory window.

    waiting: (traj, tau) -> WaitingLaw; reward: (traj, tau) -> RewardLaw;
    potential_row: (traj, tau) -> vector of v(s) at s = 1..s_max, omitted
    means 0.
    """
    reward_fn = reward if callable(reward) else (lambda traj, tau: reward)
    zero = np.zeros(s_max)
    pot_fn = potential_row if potential_row is not None else (lambda traj, tau: zero)
    return RenewalModel(
        s_max=s_max,
        dim=dim,
        waiting_at=waiting,
        reward_at=reward_fn,
        potential_row_at=pot_fn,
        letter_maps=None,
        label=label,
    )


def gibbs_weight(model: RenewalModel, le: Letter, phi, s: int) -> float:
    """Exact one-step weight p(s) e^{v(s)} sum_atoms mass e^{phi.x} for a
    letter-local model; 0 where p(s) = 0."""
    if not model.letter_local:
        raise InvalidSpec("gibbs_weight by letter requires a letter-local model")
    if not 1 <= s <= model.s_max:
        raise InvalidSpec(f"s={s} outside 1..{model.s_max}")
    phi = model._phi_vec(phi)
    wait_fn, reward_fn, pot_fn = model.letter_maps
    law = wait_fn(le)
    p = float(law.probs[s]) if s <= law.s_max else 0.0
    if p == 0.0:
        return 0.0
    points, masses = reward_fn(le).atoms(s)
    mgf = float(masses @ np.exp(points @ phi))
    return p * np.exp(float(pot_fn(le, s))) * mgf


def tail_probability(model: RenewalModel, traj, tau: int, s: int) -> float:
    """P[S_1 > s] under the waiting law at position tau; 1 at s = 0 and the
    mass at infinity once s passes the support."""
    return model.waiting_law(traj, tau).tail(s)


@dataclass(frozen=True)
class ValidationReport:
    """Structural diagnostics over the first positions of a trajectory."""

    support_gcd: int
    aperiodic_ok: bool
    common_support: tuple[int, ...]
    eta: float
    potential_bound: float
    reward_norm_bound: float
    proper: bool
    p_inf_max: float
    flags: tuple[str, ...]
    positions_checked: int


def validate(model: RenewalModel, traj, n_letters: int, eta: float = 0.0) -> ValidationReport:
    """Check renewal-structure health over positions 0..n_letters-1:

    (a) the gcd of the union of waiting supports, with a pass only when the
        gcd is 1 and every support point carries positive mass at every
        checked position (coprime common renewal times);
    (b) bounds on reward atom norms and on v(s) - eta*s;
    (c) proper versus defective mass budget.
    """
    if n_letters < 1:
        raise InvalidSpec("need at least one position to validate")
    union: set[int] = set()
    supports = []
    p_inf_max = 0.0
    pot_bound = 0.0
    reward_bound = 0.0
    s_grid = np.arange(1, model.s_max + 1)
    for tau in range(n_letters):
        law = model.waiting_law(traj, tau)
        sup = set(int(s) for s in law.support)
        supports.append(sup)
        union |= sup
        p_inf_max = max(p_inf_max, law.p_inf)
        v = model.potential_row(traj, tau)[: law.s_max]
        on = law.probs[1:] > 0
        if on.any():
            dev = np.abs(v[on] - eta * s_grid[: law.s_max][on])
            pot_bound = max(pot_bound, float(dev.max()))
        reward_bound = max(reward_bound, model.reward_law(traj, tau).norm_bound())
    common = set.intersection(*supports)
    g = gcd(*union) if union else 0
    flags = []
    if g != 1:
        flags.append(f"aperiodicity violated (periodic support, gcd {g})")
    elif common != union:
        flags.append("aperiodicity unverified (no common support point set)")
    proper = p_inf_max <= _SUM_TOL
    return ValidationReport(
        support_gcd=g,
        aperiodic_ok=(g == 1 and common == union),
        common_support=tuple(sorted(common)),
        eta=eta,
        potential_bound=pot_bound,
        reward_norm_bound=reward_bound,
        proper=proper,
        p_inf_max=p_inf_max,
        flags=tuple(flags),
        positions_checked=n_letters,
    )
