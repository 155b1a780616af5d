"""Three concrete renewal-reward families and their closed-form oracles.

compound_poisson_model: arrival of customers with letter-dependent arrival
probability; the waiting law at position tau is the survival product over
the letters at tau+1..tau+s and the reward law reads the arrival letter.

pinning_model: heavy-tailed waiting law p(s) proportional to s^-(alpha+1)
truncated to 1..s_max, potential h + beta * omega at the arrival site,
observable either the number of contacts (scalar unit rewards) or the
per-size excursion counts (one-hot rewards in R^s_max).

markov_return_model: returns of a Markov chain in a dynamic environment to
a distinguished state; waiting and reward laws come from exact
subset-augmented path enumeration, the reward being the number of distinct
states visited during an excursion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import zeta as _hurwitz_zeta

from .env import IidSequence, MarkovShift, Periodic, letter
from .errors import CapExceeded, InvalidRho, InvalidSpec, TooManyStates
from .model import (
    RenewalModel,
    RewardLaw,
    WaitingLaw,
    delta_reward,
    letter_local_model,
    reward_law,
    site_model,
)

__all__ = [
    "PinningSpec",
    "MarkovReturnSpec",
    "compound_poisson_model",
    "compound_poisson_truncation_mass",
    "compound_poisson_ell",
    "pinning_model",
    "pinning_environment",
    "pinning_waiting_law",
    "pinning_truncation_mass",
    "pinning_free_energy_homogeneous",
    "pinning_contact_fraction_u",
    "markov_return_model",
    "GAUSS_HERMITE_POINTS",
]

_CACHE_CAP = 8192

# quadrature order for discretizing standard Gaussian disorder
GAUSS_HERMITE_POINTS = 21


# ---------------------------------------------------------------------------
# compound Poisson in a random environment


def compound_poisson_model(
    rho, F, *, s_max: int, overflow: str = "p_inf", label: str = "compound_poisson"
) -> RenewalModel:
    """Renewal-reward model of customer arrivals with spending rewards.

    rho: Letter -> arrival probability in (0, 1), or a constant; F: Letter ->
    reward atoms [(amount, mass), ...], or a constant list.  The waiting law
    at position tau puts p(s) = prod_{i=1}^{s-1}(1 - rho_{tau+i}) rho_{tau+s}
    on s = 1..s_max; the survival mass beyond s_max goes to p_inf
    (overflow='p_inf') or is folded into p(s_max) (overflow='fold', proper
    law).  The reward law at (tau, s) reads the letter at the arrival site
    tau + s.  The potential is zero.
    """
    if overflow not in ("p_inf", "fold"):
        raise InvalidSpec(f"overflow must be 'p_inf' or 'fold', got {overflow!r}")
    if s_max < 1:
        raise InvalidSpec("s_max must be >= 1")
    rho_fn = rho if callable(rho) else (lambda le: rho)
    f_fn = F if callable(F) else (lambda le: F)
    rho_cache: dict = {}
    atom_cache: dict = {}

    def rho_at(le):
        r = rho_cache.get(le)
        if r is None:
            r = float(rho_fn(le))
            if not 0.0 < r < 1.0:
                raise InvalidRho(f"arrival probability must lie in (0, 1), got {r}")
            rho_cache[le] = r
        return r

    def atoms_at(le):
        got = atom_cache.get(le)
        if got is None:
            got = reward_law(atoms=list(f_fn(le)), dim=1).default
            atom_cache[le] = got
        return got

    law_cache: dict = {}

    def laws(traj, tau):
        win = traj.window(tau + 1, tau + s_max + 1)
        got = law_cache.get(win)
        if got is None:
            rates = np.array([rho_at(le) for le in win])
            surv = np.cumprod(1.0 - rates)
            probs = np.zeros(s_max + 1)
            probs[1] = rates[0]
            probs[2:] = surv[:-1] * rates[1:]
            residual = float(surv[-1])
            if overflow == "fold":
                probs[s_max] += residual
                wl = WaitingLaw(probs=probs, p_inf=0.0)
            else:
                wl = WaitingLaw(probs=probs, p_inf=residual)
            per_s = {s: atoms_at(win[s - 1]) for s in range(1, s_max + 1)}
            rl = RewardLaw(dim=1, default=None, per_s=per_s)
            if len(law_cache) > _CACHE_CAP:
                law_cache.clear()
            got = (wl, rl)
            law_cache[win] = got
        return got

    return site_model(
        waiting=lambda traj, tau: laws(traj, tau)[0],
        reward=lambda traj, tau: laws(traj, tau)[1],
        s_max=s_max,
        dim=1,
        label=label,
    )


def compound_poisson_truncation_mass(rho, traj, tau: int, s_max: int) -> float:
    """Survival mass prod_{i=1}^{s_max}(1 - rho_{tau+i}) that truncation at
    s_max sends to p_inf (or folds into the top bucket)."""
    rho_fn = rho if callable(rho) else (lambda le: rho)
    out = 1.0
    for le in traj.window(tau + 1, tau + s_max + 1):
        r = float(rho_fn(le))
        if not 0.0 < r < 1.0:
            raise InvalidRho(f"arrival probability must lie in (0, 1), got {r}")
        out *= 1.0 - r
    return out


def compound_poisson_ell(rho, env_spec) -> float:
    """Expected log survival factor E[log(1 - rho)] under the stationary
    letter law: the decay constant of the waiting-time tails."""
    rho_fn = rho if callable(rho) else (lambda le: rho)

    def term(le):
        r = float(rho_fn(le))
        if not 0.0 < r < 1.0:
            raise InvalidRho(f"arrival probability must lie in (0, 1), got {r}")
        return math.log1p(-r)

    if isinstance(env_spec, Periodic):
        return math.fsum(term(le) for le in env_spec.states) / len(env_spec.states)
    if isinstance(env_spec, IidSequence):
        return math.fsum(
            w * term(le) for le, w in zip(env_spec.letters, env_spec.weights)
        )
    if isinstance(env_spec, MarkovShift):
        P = np.asarray(env_spec.transition, dtype=float)
        n = P.shape[0]
        # stationary law: solve pi P = pi with sum(pi) = 1
        A = np.vstack([P.T - np.eye(n), np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        return float(np.dot(pi, [term(le) for le in env_spec.letters]))
    raise InvalidSpec(f"unknown environment spec {type(env_spec).__name__}")


# ---------------------------------------------------------------------------
# polymer pinning with disorder


@dataclass(frozen=True)
class PinningSpec:
    """Parameters of the disordered pinning model.

    disorder is either the string 'gaussian' (standard Gaussian, discretized
    by Gauss-Hermite quadrature) or a sequence of (value, weight) pairs.
    observable selects scalar contact counting or one-hot excursion-size
    counting rewards.
    """

    alpha: float
    h: float
    beta: float
    disorder: object
    s_max: int
    observable: str = "contacts"


def _disorder_atoms(disorder) -> tuple[tuple[float, float], ...]:
    if isinstance(disorder, str):
        if disorder != "gaussian":
            raise InvalidSpec(f"unknown disorder law {disorder!r}")
        nodes, weights = np.polynomial.hermite_e.hermegauss(GAUSS_HERMITE_POINTS)
        weights = weights / weights.sum()
        return tuple((float(x), float(w)) for x, w in zip(nodes, weights))
    pairs = tuple((float(v), float(w)) for v, w in disorder)
    if not pairs:
        raise InvalidSpec("discrete disorder needs at least one atom")
    if any(w < 0 for _, w in pairs) or abs(sum(w for _, w in pairs) - 1.0) > 1e-12:
        raise InvalidSpec("disorder weights must be nonnegative and sum to 1 within 1e-12")
    return pairs


def pinning_environment(spec: PinningSpec) -> IidSequence:
    """Letter law of the disorder sequence; each letter carries the binding
    field under the name 'omega'."""
    pairs = _disorder_atoms(spec.disorder)
    return IidSequence(
        letters=tuple(letter(omega=v) for v, _ in pairs),
        weights=tuple(w for _, w in pairs),
    )


def pinning_waiting_law(alpha: float, s_max: int) -> WaitingLaw:
    """Power-law waiting times s^-(alpha+1) renormalized on 1..s_max."""
    if alpha < 0:
        raise InvalidSpec("alpha must be >= 0")
    if s_max < 1:
        raise InvalidSpec("s_max must be >= 1")
    grid = np.arange(1, s_max + 1, dtype=float)
    weights = grid ** -(alpha + 1.0)
    probs = np.concatenate([[0.0], weights / weights.sum()])
    return WaitingLaw(probs=probs, p_inf=0.0)


def pinning_truncation_mass(alpha: float, s_max: int) -> float:
    """Mass of the untruncated power-law waiting law beyond s_max; infinite
    at alpha = 0 where the untruncated law is not normalizable."""
    if alpha <= 0:
        return math.inf
    grid = np.arange(1, s_max + 1, dtype=float)
    kept = float(np.sum(grid ** -(alpha + 1.0)))
    tail = float(_hurwitz_zeta(alpha + 1.0, s_max + 1))
    return tail / (kept + tail)


def pinning_model(
    spec: PinningSpec,
    *,
    tail_cap: float | None = None,
    dim_cap: int = 64,
    label: str = "pinning",
) -> RenewalModel:
    """Disordered pinning model with potential h + beta * omega read at the
    arrival site.  With beta = 0 the model is letter-local (homogeneous in
    the waiting and reward laws); otherwise weights depend on the letters
    ahead of the current position.

    tail_cap bounds the truncated-tail mass of the ideal power law;
    dim_cap bounds the reward dimension of the excursion observable.
    """
    if spec.s_max < 2:
        raise InvalidSpec("pinning needs s_max >= 2")
    if spec.observable not in ("contacts", "excursions"):
        raise InvalidSpec(f"observable must be 'contacts' or 'excursions', got {spec.observable!r}")
    if tail_cap is not None:
        mass = pinning_truncation_mass(spec.alpha, spec.s_max)
        if mass > tail_cap:
            raise CapExceeded(f"truncated-tail mass {mass:.3e} exceeds cap {tail_cap:.3e}")
    law = pinning_waiting_law(spec.alpha, spec.s_max)
    if spec.observable == "contacts":
        rl = delta_reward(1.0)
        dim = 1
    else:
        if spec.s_max > dim_cap:
            raise CapExceeded(f"excursion reward dimension {spec.s_max} exceeds cap {dim_cap}")
        dim = spec.s_max
        eye = np.eye(dim)
        rl = reward_law(per_s={s: [(eye[s - 1], 1.0)] for s in range(1, dim + 1)}, dim=dim)
    if spec.beta == 0.0:
        return letter_local_model(
            waiting=law,
            reward=rl,
            potential=lambda le, s: spec.h,
            s_max=spec.s_max,
            dim=dim,
            label=label,
        )
    row_cache: dict = {}

    def pot_row(traj, tau):
        win = traj.window(tau + 1, tau + spec.s_max + 1)
        row = row_cache.get(win)
        if row is None:
            row = spec.h + spec.beta * np.array([le["omega"] for le in win])
            if len(row_cache) > _CACHE_CAP:
                row_cache.clear()
            row_cache[win] = row
        return row

    return site_model(
        waiting=lambda traj, tau: law,
        reward=rl,
        potential_row=pot_row,
        s_max=spec.s_max,
        dim=dim,
        label=label,
    )


def pinning_free_energy_homogeneous(p: WaitingLaw, h: float) -> float:
    """Homogeneous pinning free energy F(h): zero up to the critical point
    h_c = -log sum_s p(s), beyond it the unique positive root of
    sum_s p(s) e^{-F s} = e^{-h}, located by bisection to width 1e-12."""
    if p.p_inf > 1e-12:
        raise InvalidSpec("free energy formula needs a proper waiting law")
    total = float(p.probs.sum())
    h_c = -math.log(total)
    if h <= h_c:
        return 0.0
    grid = np.arange(len(p.probs), dtype=float)

    def gap(F: float) -> float:
        return float(np.dot(p.probs, np.exp(-F * grid))) - math.exp(-h)

    lo, hi = 0.0, max(h - h_c, 1e-12)
    for _ in range(200):
        if hi - lo <= 1e-12:
            break
        mid = 0.5 * (lo + hi)
        if gap(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def pinning_contact_fraction_u(p: WaitingLaw) -> float:
    """End of the affine stretch of the contact-fraction rate function:
    sum_s p(s) / sum_s s p(s); zero when the mean waiting time is infinite
    (mass at infinity)."""
    if p.p_inf > 0.0:
        return 0.0
    grid = np.arange(len(p.probs), dtype=float)
    return float(p.probs.sum() / np.dot(grid, p.probs))


# ---------------------------------------------------------------------------
# returns of a Markov chain in a dynamic environment


@dataclass(frozen=True)
class MarkovReturnSpec:
    """Returns to the distinguished state c of a Markov chain whose
    transition matrix K (indexed like `states`) is read off the current
    letter; K may be a constant matrix or a callable Letter -> matrix."""

    states: tuple
    c: object
    K: object
    s_max: int


def markov_return_model(
    spec: MarkovReturnSpec, *, require_positive: bool = False, label: str = "markov_return"
) -> RenewalModel:
    """Exact waiting and reward laws of the return process.

    The waiting law sums products of transition entries over excursion
    paths avoiding c; the reward at s is the number of distinct states
    visited during the excursion (including c), obtained by augmenting the
    path state with the visited subset.  p_inf carries the exact mass of
    excursions not yet closed at s_max.
    """
    n = len(spec.states)
    if n > 5:
        raise TooManyStates("at most 5 chain states (subset augmentation grows as 2^|C|)")
    if n < 1:
        raise InvalidSpec("state set must be non-empty")
    if spec.c not in spec.states:
        raise InvalidSpec("distinguished state missing from state set")
    if spec.s_max < 1:
        raise InvalidSpec("s_max must be >= 1")
    k_fn = spec.K if callable(spec.K) else (lambda le: spec.K)
    c_idx = spec.states.index(spec.c)
    off = [i for i in range(n) if i != c_idx]
    k = len(off)
    n_masks = 1 << k
    popcount = np.array([bin(v).count("1") for v in range(n_masks)], dtype=np.int64)
    or_maps = [np.arange(n_masks) | (1 << j) for j in range(k)]
    mat_cache: dict = {}

    def k_at(le):
        M = mat_cache.get(le)
        if M is None:
            M = np.asarray(k_fn(le), dtype=float)
            if M.shape != (n, n):
                raise InvalidSpec(f"transition matrix must be {n}x{n}")
            if np.any(M < 0) or np.any(np.abs(M.sum(axis=1) - 1.0) > 1e-12):
                raise InvalidSpec("transition rows must sum to 1 within 1e-12")
            if require_positive and np.any(M <= 0):
                raise InvalidSpec("strictly positive transition entries required")
            mat_cache[le] = M
        return M

    law_cache: dict = {}

    def laws(traj, tau):
        win = traj.window(tau, tau + spec.s_max)
        got = law_cache.get(win)
        if got is not None:
            return got
        probs = np.zeros(spec.s_max + 1)
        by_count: dict[int, np.ndarray] = {}
        M0 = k_at(win[0])
        probs[1] = M0[c_idx, c_idx]
        # cur[j, V]: mass of excursion prefixes at off-state j having
        # visited exactly the subset V of off-states
        cur = np.zeros((k, n_masks))
        for j, a in enumerate(off):
            cur[j, 1 << j] = M0[c_idx, a]
        for s in range(2, spec.s_max + 1):
            Ms = k_at(win[s - 1])
            closing = cur * Ms[off, c_idx][:, None]
            mass = float(closing.sum())
            if mass > 0.0:
                probs[s] = mass
                buckets = np.zeros(k + 2)
                np.add.at(buckets, popcount + 1, closing.sum(axis=0))
                by_count[s] = buckets
            stay = Ms[np.ix_(off, off)]
            moved = stay.T @ cur
            nxt = np.zeros_like(cur)
            for j in range(k):
                np.add.at(nxt[j], or_maps[j], moved[j])
            cur = nxt
        p_inf = float(cur.sum())
        wl = WaitingLaw(probs=probs, p_inf=p_inf)
        per_s: dict[int, list] = {}
        for s in range(1, spec.s_max + 1):
            if probs[s] == 0.0:
                per_s[s] = [(0.0, 1.0)]
            elif s == 1:
                per_s[s] = [(1.0, 1.0)]
            else:
                buckets = by_count[s]
                per_s[s] = [
                    (float(count), m / probs[s]) for count, m in enumerate(buckets) if m > 0
                ]
        rl = reward_law(per_s=per_s, dim=1)
        if len(law_cache) > _CACHE_CAP:
            law_cache.clear()
        got = (wl, rl)
        law_cache[win] = got
        return got

    return site_model(
        waiting=lambda traj, tau: laws(traj, tau)[0],
        reward=lambda traj, tau: laws(traj, tau)[1],
        s_max=spec.s_max,
        dim=1,
        label=label,
    )
