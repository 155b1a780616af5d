"""Corrector-based evaluation of the growth rate on periodic environments.

For a period-n environment the essential supremum over disorder is a finite
max over cycle states, so the variational quantity

    Upsilon(zeta) = inf_R max_i log sum_s w_i(s) e^{-zeta s + R[(i+s) mod n] - R[i]}

is a convex min-max in the corrector vector R.  It is solved by subgradient
descent plus an epigraph polish, certified against an independent Perron-root
oracle, and the growth rate z(phi) is the root of zeta -> Upsilon(zeta),
located by bisection (Upsilon is strictly decreasing: every term carries
e^{-zeta s} with s >= 1).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse
import scipy.sparse.csgraph
from scipy.special import logsumexp, softmax

from .env import Periodic, realize
from .errors import BracketFailure, Diverged, NotPeriodic
from .model import RenewalModel


@dataclass(frozen=True)
class CorrectorSolution:
    """Solved corrector problem at one (phi, zeta): the corrector vector R
    over cycle states (min component normalized to 1; only differences
    matter), the achieved min-max value, and the certified optimality gap."""

    R: np.ndarray
    zeta: float
    upsilon: float
    iterations: int
    gap: float


def _require_periodic(spec) -> Periodic:
    if not isinstance(spec, Periodic):
        raise NotPeriodic("corrector evaluation needs a Periodic environment")
    return spec


def _cycle_rows(model: RenewalModel, spec: Periodic, phi, zeta: float):
    """Stack log w_i(s) - zeta*s for cycle states i and the landing-state
    index table (i + s) mod n."""
    n = spec.period
    traj = realize(spec, None, horizon=n + model.s_max + 2)
    rows = np.stack(
        [model.log_weight_row(traj, i, phi, zeta=zeta) for i in range(n)]
    )
    s_grid = np.arange(1, model.s_max + 1)
    targets = (np.arange(n)[:, None] + s_grid[None, :]) % n
    return rows, targets


def _objective_rows(rows, targets, R: np.ndarray) -> np.ndarray:
    terms = rows + R[targets] - R[:, None]
    return logsumexp(terms, axis=1)


def corrector_objective(model, periodic_spec, phi, zeta: float, R) -> float:
    """max_i log sum_s w_i(s) e^{-zeta s + R[(i+s) mod n] - R[i]} at a given
    corrector vector; exposed so tests can probe the landscape directly."""
    spec = _require_periodic(periodic_spec)
    R = np.asarray(R, dtype=float)
    if R.shape != (spec.period,):
        raise Diverged(f"corrector must have one entry per cycle state ({spec.period})")
    rows, targets = _cycle_rows(model, spec, phi, zeta)
    return float(np.max(_objective_rows(rows, targets, R)))


def perron_upsilon(model: RenewalModel, periodic_spec, phi, zeta: float) -> float:
    """Independent oracle for the min-max value: the log spectral radius of
    A[i][j] = sum_{s = j-i mod n} w_i(s) e^{-zeta s}, by power iteration
    with two-sided Rayleigh bounds.  Reducible systems fall back to the max
    of the diagonal-block roots, with a warning."""
    spec = _require_periodic(periodic_spec)
    n = spec.period
    rows, targets = _cycle_rows(model, spec, phi, zeta)
    log_A = np.full((n, n), -np.inf)
    for i in range(n):
        for j in range(n):
            vals = rows[i][targets[i] == j]
            if len(vals):
                log_A[i, j] = logsumexp(vals)
    if not np.any(np.isfinite(log_A)):
        return -math.inf
    scale = float(np.max(log_A[np.isfinite(log_A)]))
    A = np.exp(log_A - scale)
    support = scipy.sparse.csr_matrix(A > 0)
    n_comp, labels = scipy.sparse.csgraph.connected_components(support, connection="strong")
    if n_comp == 1:
        return scale + math.log(_power_radius(A))
    warnings.warn(
        "weight matrix is reducible; returning the max of the diagonal-block roots",
        RuntimeWarning,
        stacklevel=2,
    )
    best = 0.0
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        block = A[np.ix_(idx, idx)]
        if len(idx) == 1:
            best = max(best, float(block[0, 0]))
        else:
            best = max(best, _power_radius(block))
    return scale + math.log(best) if best > 0 else -math.inf


def _power_radius(A: np.ndarray, rel_tol: float = 1e-13, max_iter: int = 200_000) -> float:
    """Spectral radius of an irreducible nonnegative matrix.  Iterates on
    A + I (primitive, same eigenvectors) so cyclic structure cannot stall the
    two-sided bounds min_i (Bv)_i/v_i <= rho(B) <= max_i (Bv)_i/v_i."""
    n = A.shape[0]
    B = A + np.eye(n)
    v = np.full(n, 1.0 / n)
    lo, hi = 0.0, math.inf
    for _ in range(max_iter):
        w = B @ v
        ratios = w / v
        lo, hi = float(ratios.min()), float(ratios.max())
        if hi - lo <= rel_tol * hi:
            break
        v = w / w.sum()
    return 0.5 * (lo + hi) - 1.0


def upsilon(
    model: RenewalModel,
    periodic_spec,
    phi,
    zeta: float,
    max_iter: int = 80,
    tol: float = 1e-10,
) -> CorrectorSolution:
    """Minimize the corrector objective.  Subgradient phase with step c/sqrt(k)
    and best-iterate tracking, then an epigraph polish (SLSQP on min u s.t.
    every state objective <= u); the certified gap is measured against the
    Perron oracle."""
    spec = _require_periodic(periodic_spec)
    n = spec.period
    rows, targets = _cycle_rows(model, spec, phi, zeta)
    dead = ~np.any(np.isfinite(rows), axis=1)
    if np.any(dead):
        raise Diverged(
            f"states {np.flatnonzero(dead).tolist()} carry no one-step weight; "
            "objective unbounded below"
        )
    certificate = perron_upsilon(model, periodic_spec, phi, zeta)

    if n == 1:
        value = float(_objective_rows(rows, targets, np.zeros(1))[0])
        return CorrectorSolution(
            R=np.ones(1), zeta=zeta, upsilon=value, iterations=0,
            gap=max(value - certificate, 0.0),
        )

    def full_objective(R):
        return _objective_rows(rows, targets, R)

    # subgradient phase over x = R[1:], R[0] pinned at 0
    x = np.zeros(n - 1)
    best_x = x.copy()
    best_val = float(np.max(full_objective(np.concatenate([[0.0], x]))))
    iters = 0
    step0 = 1.0
    for k in range(1, max_iter + 1):
        iters = k
        R = np.concatenate([[0.0], x])
        per_state = full_objective(R)
        i_star = int(np.argmax(per_state))
        val = float(per_state[i_star])
        if val < best_val:
            best_val = val
            best_x = x.copy()
        if best_val - certificate <= tol:
            break
        terms = rows[i_star] + R[targets[i_star]] - R[i_star]
        pi = softmax(terms)
        g_full = np.bincount(targets[i_star], weights=pi, minlength=n)
        g_full[i_star] -= 1.0
        x = x - (step0 / math.sqrt(k)) * g_full[1:]

    # epigraph polish: min u subject to per-state objectives <= u
    def split(y):
        return np.concatenate([[0.0], y[:-1]]), y[-1]

    def cons_fun(y):
        R, u = split(y)
        return u - full_objective(R)

    def cons_jac(y):
        R, _ = split(y)
        terms = rows + R[targets] - R[:, None]
        jac = np.zeros((n, n))
        for i in range(n):
            pi = softmax(terms[i])
            np.add.at(jac[i], targets[i], pi)
            jac[i, i] -= 1.0
        out = np.hstack([-jac[:, 1:], np.ones((n, 1))])
        return out

    y0 = np.concatenate([best_x, [best_val]])
    res = scipy.optimize.minimize(
        fun=lambda y: y[-1],
        x0=y0,
        jac=lambda y: np.concatenate([np.zeros(n - 1), [1.0]]),
        constraints=[{"type": "ineq", "fun": cons_fun, "jac": cons_jac}],
        method="SLSQP",
        options={"maxiter": 200, "ftol": 1e-14},
    )
    iters += int(res.nit)
    x_polished = res.x[:-1]
    val_polished = float(np.max(full_objective(np.concatenate([[0.0], x_polished]))))
    if val_polished < best_val:
        best_val, best_x = val_polished, x_polished

    R_full = np.concatenate([[0.0], best_x])
    R_norm = R_full - R_full.min() + 1.0
    value = float(np.max(full_objective(R_norm)))
    return CorrectorSolution(
        R=R_norm,
        zeta=zeta,
        upsilon=value,
        iterations=iters,
        gap=max(value - certificate, 0.0),
    )


@dataclass(frozen=True)
class VariationalZ:
    """Root of zeta -> Upsilon(zeta).  lower_edge marks the degenerate case
    where the user-supplied bracket already starts below the root."""

    z: float
    lower_edge: bool
    evaluations: int
    bracket: tuple[float, float]

    def __float__(self) -> float:
        return self.z


def free_energy_variational(
    model: RenewalModel,
    periodic_spec,
    phi,
    bracket: tuple[float, float] | None = None,
    tol: float = 1e-10,
    solver_tol: float = 1e-10,
    max_expand: int = 60,
) -> VariationalZ:
    """z(phi) = inf{zeta : Upsilon_phi(zeta) <= 0} by bisection.

    The default bracket is [min over states of the smallest log weight - 1,
    max over states of log sum_s w_i(s) + 1], expanded geometrically until it
    straddles the sign change."""
    spec = _require_periodic(periodic_spec)
    n = spec.period
    rows0, _ = _cycle_rows(model, spec, phi, 0.0)
    if not np.any(np.isfinite(rows0)):
        raise Diverged("model carries no one-step weight on this cycle")
    s_grid = np.arange(1, model.s_max + 1)
    evaluations = 0

    def upsilon_at(zeta: float) -> float:
        nonlocal evaluations
        evaluations += 1
        if n == 1:
            return float(logsumexp(rows0[0] - zeta * s_grid))
        return upsilon(model, spec, phi, zeta, tol=solver_tol).upsilon

    user_bracket = bracket is not None
    if bracket is None:
        finite = rows0[np.isfinite(rows0)]
        lo = float(finite.min()) - 1.0
        hi = float(max(logsumexp(rows0[i]) for i in range(n))) + 1.0
    else:
        lo, hi = float(bracket[0]), float(bracket[1])

    up_lo = upsilon_at(lo)
    if up_lo <= 0.0:
        if user_bracket:
            return VariationalZ(z=lo, lower_edge=True, evaluations=evaluations, bracket=(lo, hi))
        grow = 1.0
        for _ in range(max_expand):
            lo -= grow
            grow *= 2.0
            up_lo = upsilon_at(lo)
            if up_lo > 0.0:
                break
        else:
            raise BracketFailure("no zeta with positive Upsilon found while expanding down")
    up_hi = upsilon_at(hi)
    if up_hi > 0.0:
        grow = 1.0
        for _ in range(max_expand):
            hi += grow
            grow *= 2.0
            up_hi = upsilon_at(hi)
            if up_hi <= 0.0:
                break
        else:
            raise BracketFailure("no zeta with nonpositive Upsilon found while expanding up")

    init = (lo, hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if upsilon_at(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return VariationalZ(
        z=0.5 * (lo + hi), lower_edge=False, evaluations=evaluations, bracket=init
    )


def corrector_to_csv(sol: CorrectorSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("zeta", "upsilon", "gap", "iterations"))
        writer.writerow((repr(sol.zeta), repr(sol.upsilon), repr(sol.gap), sol.iterations))
        writer.writerow(("state_index", "R"))
        for i, r in enumerate(sol.R):
            writer.writerow((i, repr(float(r))))
