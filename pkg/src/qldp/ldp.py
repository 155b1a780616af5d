"""Legendre transforms, tail constants, and assembled rate curves.

The growth rate phi -> z(phi) is sampled on a grid (from either the DP route
or the corrector route), optionally clipped from below by the waiting-tail
constant ell, and conjugated:

    J(w)    = sup_phi { phi.w - z(phi) }          (endpoint-constrained)
    I_ell(w) = sup_phi { phi.w - max(z, ell) }    (unconstrained)

Rates are reported together with the normalization z(0) (or max(z(0), ell))
that turns them into the rate function of the mass-normalized model.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .env import EnvironmentTrajectory, Periodic, realize
from .errors import (
    DimensionMismatch,
    InvalidSpec,
    NonConvexCurve,
    NotPeriodic,
    OutOfHorizon,
)
from .model import RenewalModel
from .partition import constrained_partition, default_t_list, kingman_cgf_estimate
from .variational import free_energy_variational


class _MinusInfinity:
    """Typed stand-in for ell = -infinity; clipping with it is the identity.
    Kept distinct from float('-inf') so arithmetic cannot pick it up."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MINUS_INFINITY"


MINUS_INFINITY = _MinusInfinity()

_CONVEX_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class CgfCurve:
    """Sampled growth-rate curve.  points: (phi, z, source) with source one
    of {kingman, variational, perron}; ell: None, a float <= 0, or the
    MINUS_INFINITY sentinel."""

    dim: int
    points: tuple[tuple[tuple[float, ...], float, str], ...]
    ell: object
    convex_ok: bool
    violations: tuple[int, ...]
    z0: float


def cgf_curve(points, ell=None, dim: int | None = None) -> CgfCurve:
    """Assemble and vet a curve.  Convexity violations are recorded and the
    curve is then rejected by the transform, not silently smoothed."""
    pts = []
    for phi, z, source in points:
        vec = tuple(float(x) for x in np.atleast_1d(np.asarray(phi, dtype=float)))
        if source not in ("kingman", "variational", "perron"):
            raise InvalidSpec(f"unknown source tag {source!r}")
        pts.append((vec, float(z), source))
    if not pts:
        raise InvalidSpec("curve needs at least one point")
    if dim is None:
        dim = len(pts[0][0])
    if any(len(p[0]) != dim for p in pts):
        raise DimensionMismatch("mixed phi dimensions in curve")
    if dim == 1:
        pts.sort(key=lambda p: p[0][0])
    zeros = [p for p in pts if all(abs(x) <= 1e-12 for x in p[0])]
    if not zeros or not math.isfinite(zeros[0][1]):
        raise InvalidSpec("curve must sample phi = 0 with a finite value")
    if ell is not None and ell is not MINUS_INFINITY:
        ell = float(ell)
        if ell > 0:
            raise InvalidSpec("ell must be <= 0")
    violations = _convexity_violations(pts, dim)
    return CgfCurve(
        dim=dim,
        points=tuple(pts),
        ell=ell,
        convex_ok=not violations,
        violations=tuple(violations),
        z0=zeros[0][1],
    )


def _convexity_violations(pts, dim: int) -> list[int]:
    bad: list[int] = []
    if dim > 2:
        return bad
    if dim == 1:
        phis = np.array([p[0][0] for p in pts])
        zs = np.array([p[1] for p in pts])
        for i in range(1, len(pts) - 1):
            a, b, c = phis[i - 1], phis[i], phis[i + 1]
            if c - a <= 0:
                continue
            chord = ((c - b) * zs[i - 1] + (b - a) * zs[i + 1]) / (c - a)
            if zs[i] > chord + _CONVEX_TOL:
                bad.append(i)
        return bad
    # small curves only: test every collinear triple against its chord
    n = len(pts)
    P = np.array([p[0] for p in pts])
    Z = np.array([p[1] for p in pts])
    for i in range(n):
        for j in range(i + 1, n):
            d = P[j] - P[i]
            seg = np.linalg.norm(d)
            if seg == 0:
                continue
            for k in range(n):
                if k in (i, j):
                    continue
                r = P[k] - P[i]
                cross = abs(d[0] * r[1] - d[1] * r[0])
                lam = float(r @ d) / (seg * seg)
                if cross > 1e-10 * seg or not 0.0 < lam < 1.0:
                    continue
                chord = (1 - lam) * Z[i] + lam * Z[j]
                if Z[k] > chord + _CONVEX_TOL:
                    bad.append(k)
    return sorted(set(bad))


@dataclass(frozen=True)
class LegendreValue:
    """Conjugate value at one w.  boundary means the maximizer sat on the
    phi-grid edge, so the true rate may be larger (possibly infinite)."""

    value: float
    boundary: bool
    phi_at_max: tuple[float, ...]

    def __float__(self) -> float:
        return float(self.value)


def _effective_z(zs: np.ndarray, clip) -> np.ndarray:
    if clip is None or clip is MINUS_INFINITY:
        return zs
    return np.maximum(zs, float(clip))


def legendre(curve: CgfCurve, w, clip=None) -> LegendreValue:
    """sup over the grid of phi.w - max(z, clip), refined along the winning
    segment by golden-section search on the piecewise-linear interpolant."""
    if not curve.convex_ok:
        raise NonConvexCurve(f"curve fails convexity at point indices {curve.violations}")
    if curve.dim > 2:
        raise DimensionMismatch("transforms support reward dimension <= 2")
    w_vec = np.atleast_1d(np.asarray(w, dtype=float))
    if w_vec.shape != (curve.dim,):
        raise DimensionMismatch(f"w has dimension {w_vec.size}, curve has {curve.dim}")
    P = np.array([p[0] for p in curve.points])
    Z = _effective_z(np.array([p[1] for p in curve.points]), clip)
    vals = P @ w_vec - Z
    best = float(vals.max())
    attain = np.flatnonzero(vals >= best - 1e-12)
    i_star = int(attain[0])

    if curve.dim == 1:
        edge = {0, len(curve.points) - 1}
        boundary = all(int(i) in edge for i in attain)
        phis = P[:, 0]
        lo = phis[max(i_star - 1, 0)]
        hi = phis[min(i_star + 1, len(phis) - 1)]
        refined, phi_best = _golden_max(
            lambda x: x * w_vec[0] - float(np.interp(x, phis, Z)), lo, hi
        )
        if refined > best:
            best = refined
            best_phi = (phi_best,)
        else:
            best_phi = tuple(P[i_star])
    else:
        mins, maxs = P.min(axis=0), P.max(axis=0)
        boundary = all(
            bool(np.any(np.isclose(P[i], mins)) or np.any(np.isclose(P[i], maxs)))
            for i in attain
        )
        best_phi = tuple(P[i_star])
    return LegendreValue(value=best, boundary=boundary, phi_at_max=best_phi)


def _golden_max(fn, lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    inv = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if b - a < 1e-14:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = fn(d)
    x = c if fc >= fd else d
    return (max(fc, fd), x)


@dataclass(frozen=True)
class TailConstant:
    """Estimated waiting-tail decay rate with the bracketing diagnostics.
    ell is a float, or MINUS_INFINITY when the tail vanishes outright."""

    ell: object
    upper: float
    lower: float
    agreed: bool
    flags: tuple[str, ...]
    brackets: dict


def tail_constant(
    model: RenewalModel,
    traj: EnvironmentTrajectory,
    s_list=None,
    t_probe_list=None,
    eps_schedule=(0.1, 0.05, 0.01),
    agree_tol: float = 0.1,
    zero_floor: float = -50.0,
) -> TailConstant:
    """Probe (1/s) log P_t[S > s] over a grid of depths s and positions t,
    with the +-eps*t/s slack of the defining double limit.  The report
    carries, per (eps, s), the sup/inf brackets over t."""
    horizon = traj.horizon
    if s_list is None:
        s_list = [s for s in (4, 8, 16, 32, 64, 128, 256, 512) if s <= max(horizon // 4, 4)]
    s_list = sorted(int(s) for s in s_list)
    if t_probe_list is None:
        cap = max(horizon // 2, 1)
        t_probe_list = sorted({0} | {int(x) for x in np.geomspace(1, cap, num=8)})
    t_probe_list = sorted(int(t) for t in t_probe_list)
    if t_probe_list[-1] > horizon:
        raise OutOfHorizon(f"probe position {t_probe_list[-1]} outside horizon {horizon}")
    if not s_list:
        raise InvalidSpec("empty depth list")

    laws = {t: model.waiting_law(traj, t) for t in t_probe_list}
    y = {}
    for t in t_probe_list:
        for s in s_list:
            tail = laws[t].tail(s)
            y[(t, s)] = math.log(tail) / s if tail > 0 else -math.inf

    brackets = {}
    for eps in eps_schedule:
        for s in s_list:
            ups = [y[(t, s)] - eps * t / s for t in t_probe_list]
            lows = [y[(t, s)] + eps * t / s for t in t_probe_list if y[(t, s)] > -math.inf]
            brackets[(eps, s)] = (
                max(ups),
                min(lows) if lows else math.inf,
            )

    eps_min = min(eps_schedule)
    s_top = s_list[-1]
    upper, lower = brackets[(eps_min, s_top)]
    flags: list[str] = []
    if upper <= zero_floor:
        return TailConstant(
            ell=MINUS_INFINITY, upper=upper, lower=lower, agreed=True,
            flags=("tail vanishes within the support bound",), brackets=brackets,
        )
    agreed = math.isfinite(lower) and abs(upper - lower) <= agree_tol
    if len(s_list) >= 2:
        prev_upper = brackets[(eps_min, s_list[-2])][0]
        if upper > -0.05 and abs(upper) <= 0.75 * abs(prev_upper):
            flags.append("polynomial tail => ell = 0")
    ell = 0.5 * (upper + lower) if agreed else upper
    return TailConstant(
        ell=ell, upper=upper, lower=lower, agreed=agreed,
        flags=tuple(flags), brackets=brackets,
    )


@dataclass(frozen=True, eq=False)
class RateCurve:
    """Rate-function samples over w_grid.  kind constrained_J pairs with
    normalization z(0); free_I_ell pairs with max(z(0), ell)."""

    kind: str
    w_points: tuple[tuple[float, ...], ...]
    rates: tuple[float, ...]
    boundary: tuple[bool, ...]
    normalization: float
    cgf: CgfCurve
    ell: object

    @property
    def points(self):
        return tuple(zip(self.w_points, self.rates))

    def normalized_rates(self) -> tuple[float, ...]:
        return tuple(r + self.normalization for r in self.rates)


def rate_curve(
    model: RenewalModel,
    env,
    phi_grid,
    w_grid,
    kind: str = "constrained",
    route: str = "variational",
    *,
    seed: int | None = 0,
    t: int = 400,
    ell=None,
    tail_opts: dict | None = None,
) -> RateCurve:
    """Assemble a rate curve end to end: sample z over phi_grid via the
    chosen route, estimate or accept ell when kind=free, conjugate over
    w_grid, and attach the matching normalization."""
    if kind not in ("constrained", "free"):
        raise InvalidSpec(f"unknown kind {kind!r}")
    if route not in ("kingman", "variational"):
        raise InvalidSpec(f"unknown route {route!r}")

    if route == "variational":
        if isinstance(env, EnvironmentTrajectory):
            env = env.spec
        if not isinstance(env, Periodic):
            raise NotPeriodic("variational route needs a Periodic environment")
        points = [
            (phi, free_energy_variational(model, env, phi).z, "variational")
            for phi in phi_grid
        ]
        traj = realize(env, None, horizon=4 * t + model.s_max + 2)
    else:
        if isinstance(env, EnvironmentTrajectory):
            traj = env
        else:
            traj = realize(env, seed, horizon=4 * t + model.s_max + 2)
        t_list = default_t_list(t, traj.horizon)
        points = [
            (phi, kingman_cgf_estimate(model, traj, phi, t_list).estimate, "kingman")
            for phi in phi_grid
        ]

    if kind == "free" and ell is None:
        ell = tail_constant(model, traj, **(tail_opts or {})).ell
    curve = cgf_curve(points, ell=ell if kind == "free" else None, dim=model.dim)

    clip = curve.ell if kind == "free" else None
    transforms = [legendre(curve, w, clip=clip) for w in w_grid]
    if kind == "free" and clip is not None and clip is not MINUS_INFINITY:
        normalization = max(curve.z0, float(clip))
        label = "free_I_ell"
    elif kind == "free":
        normalization = curve.z0
        label = "free_I_ell"
    else:
        normalization = curve.z0
        label = "constrained_J"
    return RateCurve(
        kind=label,
        w_points=tuple(
            tuple(float(x) for x in np.atleast_1d(np.asarray(w, dtype=float))) for w in w_grid
        ),
        rates=tuple(tv.value for tv in transforms),
        boundary=tuple(tv.boundary for tv in transforms),
        normalization=normalization,
        cgf=curve,
        ell=clip,
    )


def cgf_to_csv(curve: CgfCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(tuple(f"phi_{j + 1}" for j in range(curve.dim)) + ("z", "source"))
        for phi, z, source in curve.points:
            writer.writerow(tuple(repr(x) for x in phi) + (repr(z), source))


def rate_curve_to_csv(curve: RateCurve, path) -> None:
    dim = len(curve.w_points[0]) if curve.w_points else 1
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            tuple(f"w_{j + 1}" for j in range(dim))
            + ("rate", "normalized_rate", "boundary_flag")
        )
        for w, rate, flag in zip(curve.w_points, curve.rates, curve.boundary):
            writer.writerow(
                tuple(repr(x) for x in w)
                + (repr(rate), repr(rate + curve.normalization), int(flag))
            )
