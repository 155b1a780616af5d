"""Numbered end-to-end verification criteria.

Each criterion builds its fixtures from scratch, measures the certified
quantities, and reports measured-versus-expected strings so the margin can
be audited.  run_all executes a subset (default: all ten); the verify
command exits nonzero when any criterion fails.
"""

from __future__ import annotations

import filecmp
import math
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ldp, montecarlo, partition, variational
from .env import IidSequence, Periodic, letter, realize
from .examples import (
    MarkovReturnSpec,
    compound_poisson_model,
    markov_return_model,
    pinning_free_energy_homogeneous,
)
from .model import delta_reward, letter_local_model, reward_law, waiting_law

__all__ = ["CriterionResult", "run_all", "report_lines", "GEOMETRIC_HALF_F1"]

# positive root of sum_s 2^-s e^{-F s} = e^{-1}: 1 + log((1 + 1/e)/2)
GEOMETRIC_HALF_F1 = 0.6201145069582775

LOG_HALF = math.log(0.5)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: str
    expected: str
    runtime: float

    def line(self) -> str:
        word = "PASS" if self.passed else "FAIL"
        return (
            f"criterion {self.number} {self.name}: {word} "
            f"[{self.measured}; expected {self.expected}] ({self.runtime:.1f}s)"
        )


def _flat_env():
    return Periodic(states=(letter(name=0.0),))


def _dev(a: float, b: float) -> float:
    """Absolute deviation treating a shared -inf as exact agreement."""
    if a == b:
        return 0.0
    return abs(a - b)


# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    """Renewal-equation DP against exhaustive enumeration on random small
    models: both partition kinds, relative 1e-12."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        s_max = int(rng.integers(1, 5))
        n_letters = int(rng.integers(1, 3))
        letters = tuple(
            letter(idx=float(i), u=float(rng.uniform(-1, 1))) for i in range(n_letters)
        )
        laws, rewards, pots = {}, {}, {}
        for le in letters:
            support = 1 + np.flatnonzero(rng.random(s_max) < 0.8)
            if support.size == 0:
                support = np.array([1])
            masses = rng.uniform(0.1, 1.0, size=support.size)
            p_inf = float(rng.uniform(0.0, 0.3)) if rng.random() < 0.4 else 0.0
            masses = masses / masses.sum() * (1.0 - p_inf)
            laws[le] = waiting_law(
                {int(s): float(m) for s, m in zip(support, masses)}, p_inf=p_inf
            )
            n_atoms = int(rng.integers(1, 4))
            pts = rng.uniform(-1.0, 1.0, size=n_atoms)
            ws = rng.uniform(0.1, 1.0, size=n_atoms)
            ws = ws / ws.sum()
            rewards[le] = reward_law(
                atoms=[(float(p), float(m)) for p, m in zip(pts, ws)]
            )
            pots[le] = rng.uniform(-0.5, 0.5, size=s_max)
        model = letter_local_model(
            waiting=lambda le: laws[le],
            reward=lambda le: rewards[le],
            potential=lambda le, s: float(pots[le][s - 1]),
            s_max=s_max,
        )
        if n_letters == 1:
            env = Periodic(states=letters)
        else:
            w = rng.uniform(0.2, 1.0, size=n_letters)
            env = IidSequence(
                letters=letters, weights=tuple(float(x) for x in w / w.sum())
            )
        t = int(rng.integers(6, 13))
        traj = realize(env, int(rng.integers(1 << 31)), horizon=t + s_max + 2)
        for phi in (0.0, 0.5, -0.5):
            dp_c = float(partition.constrained_partition(model, traj, t, phi).values[t])
            bf_c = partition.brute_force_partition(model, traj, t, phi, constrained=True)
            dp_f = partition.free_partition(model, traj, t, phi)
            bf_f = partition.brute_force_partition(model, traj, t, phi, constrained=False)
            for dp, bf in ((dp_c, bf_c), (dp_f, bf_f)):
                worst = max(worst, _dev(dp, bf) / max(1.0, abs(bf)))
    return CriterionResult(
        1,
        "renewal-equation oracle",
        worst <= 1e-12,
        f"max relative deviation {worst:.2e} over 20 models x 3 tilts x 2 kinds",
        "<= 1e-12",
        time.perf_counter() - start,
    )


def criterion_2() -> CriterionResult:
    """Homogeneous free energy of geometric(1/2) waits at field 1 from both
    routes against the closed form."""
    start = time.perf_counter()
    law = waiting_law({s: 0.5**s for s in range(1, 61)})
    model = letter_local_model(
        waiting=law,
        reward=delta_reward(1.0),
        potential=lambda le, s: 1.0,
        s_max=60,
    )
    env = _flat_env()
    var = variational.free_energy_variational(model, env, 0.0).z
    traj = realize(env, None, horizon=4064)
    king = partition.kingman_cgf_estimate(model, traj, 0.0, (1000, 2000, 4000)).estimate
    dev_var = abs(var - GEOMETRIC_HALF_F1)
    dev_king = abs(king - GEOMETRIC_HALF_F1)
    return CriterionResult(
        2,
        "homogeneous free energy",
        dev_var <= 1e-5 and dev_king <= 1e-3,
        f"variational dev {dev_var:.2e}, growth-limit dev at t=4000 {dev_king:.2e}",
        "<= 1e-5 and <= 1e-3 from 0.6201145069582775",
        time.perf_counter() - start,
    )


def _period_models():
    one = (
        letter_local_model(
            waiting=waiting_law({1: 0.6, 2: 0.4}),
            reward=delta_reward(1.0),
            potential=lambda le, s: 0.2,
            s_max=2,
        ),
        _flat_env(),
    )
    l20 = letter(idx=0.0, v=0.2)
    l21 = letter(idx=1.0, v=-0.3)
    waits2 = {l20: waiting_law({1: 0.5, 2: 0.5}), l21: waiting_law({1: 0.3, 2: 0.2, 3: 0.5})}
    rewards2 = {l20: delta_reward(1.0), l21: reward_law(atoms=[(0.0, 0.5), (2.0, 0.5)])}
    two = (
        letter_local_model(
            waiting=lambda le: waits2[le],
            reward=lambda le: rewards2[le],
            potential=lambda le, s: le["v"],
            s_max=3,
        ),
        Periodic(states=(l20, l21)),
    )
    l30 = letter(idx=0.0, v=0.1)
    l31 = letter(idx=1.0, v=-0.2)
    l32 = letter(idx=2.0, v=0.3)
    waits3 = {
        l30: waiting_law({1: 0.4, 2: 0.6}),
        l31: waiting_law({1: 0.7, 3: 0.3}),
        l32: waiting_law({2: 0.5, 3: 0.5}),
    }
    rewards3 = {
        l30: delta_reward(1.0),
        l31: reward_law(atoms=[(0.0, 0.5), (2.0, 0.5)]),
        l32: delta_reward(1.0),
    }
    three = (
        letter_local_model(
            waiting=lambda le: waits3[le],
            reward=lambda le: rewards3[le],
            potential=lambda le, s: le["v"],
            s_max=3,
        ),
        Periodic(states=(l30, l31, l32)),
    )
    return (one, two, three)


def criterion_3() -> CriterionResult:
    """Corrector min-max against the spectral-radius oracle over a (phi,
    zeta) grid on periods 1, 2, 3."""
    start = time.perf_counter()
    worst = 0.0
    for model, env in _period_models():
        for phi in np.linspace(-1.0, 1.0, 5):
            for zeta in np.linspace(-0.5, 1.5, 5):
                got = variational.upsilon(model, env, float(phi), float(zeta)).upsilon
                want = variational.perron_upsilon(model, env, float(phi), float(zeta))
                worst = max(worst, abs(got - want))
    return CriterionResult(
        3,
        "min-max vs spectral radius",
        worst <= 1e-8,
        f"max |gap| {worst:.2e} over 75 grid points",
        "<= 1e-8",
        time.perf_counter() - start,
    )


def criterion_4() -> CriterionResult:
    """Supermultiplicativity of the constrained partition function along
    the orbit for all splits t + t' <= 200."""
    start = time.perf_counter()
    T = 200
    homog = (
        letter_local_model(
            waiting=waiting_law({1: 0.5, 2: 0.3, 3: 0.2}),
            reward=delta_reward(1.0),
            potential=lambda le, s: 0.25,
            s_max=3,
        ),
        (letter(name=0.0),),
    )
    l0 = letter(idx=0.0, v=0.2)
    l1 = letter(idx=1.0, v=-0.3)
    waits = {l0: waiting_law({1: 0.5, 2: 0.5}), l1: waiting_law({1: 0.3, 2: 0.2, 3: 0.5})}
    period2 = (
        letter_local_model(
            waiting=lambda le: waits[le],
            reward=delta_reward(1.0),
            potential=lambda le, s: le["v"],
            s_max=3,
        ),
        (l0, l1),
    )
    margin = math.inf
    for model, states in (homog, period2):
        n = len(states)
        for phi in (0.0, 0.3):
            tables = []
            for p in range(n):
                rotated = states[p:] + states[:p]
                trajp = realize(Periodic(states=rotated), None, horizon=T + model.s_max + 2)
                tables.append(
                    np.asarray(partition.constrained_partition(model, trajp, T, phi).values)
                )
            base = tables[0]
            for t in range(T + 1):
                shift = tables[t % n][: T + 1 - t]
                margin = min(margin, float((base[t:] - base[t] - shift).min()))
    return CriterionResult(
        4,
        "supermultiplicativity",
        margin >= -1e-9,
        f"min log Z_(t+t') - log Z_t - log Z_t' = {margin:.2e} over all splits",
        ">= -1e-9",
        time.perf_counter() - start,
    )


def criterion_5() -> CriterionResult:
    """Tail decay constant of the constant-rate arrival model and the
    clipped free growth rate max{z, ell}.

    For geometric tails the clip never binds strictly: z(phi) =
    log((1 + e^phi)/2) sits above ell = log(1/2) at every finite phi with
    gap log(1 + e^phi), so the free rate is checked against the clipped
    closed form at phi = -2 (gap 0.127) and against ell itself at
    phi = -5 where the gap 0.0067 falls inside the 2e-2 window.  Probes
    run at t = 1000 with s_max = 1024: for t <= s_max the truncation fold
    is invisible (tail sums telescope to exactly 0.5^m) and every tail is
    still representable in float64."""
    start = time.perf_counter()
    model = compound_poisson_model(0.5, [(1.0, 1.0)], s_max=1024)
    traj = realize(_flat_env(), None, horizon=4096)
    tc = ldp.tail_constant(model, traj)
    dev_ell = abs(float(tc.ell) - LOG_HALF)
    t = 1000
    dev_clip = 0.0
    for phi in (-2.0, -5.0):
        rate = partition.free_partition(model, traj, t, phi) / t
        clip = max(math.log((1.0 + math.exp(phi)) / 2.0), LOG_HALF)
        dev_clip = max(dev_clip, abs(rate - clip))
        if phi == -5.0:
            dev_near = abs(rate - LOG_HALF)
    passed = dev_ell <= 1e-3 and dev_clip <= 2e-2 and dev_near <= 2e-2
    return CriterionResult(
        5,
        "free-growth clipping at the tail constant",
        passed,
        f"tail-constant dev {dev_ell:.2e}; free rate vs max(z, ell) dev {dev_clip:.2e} "
        f"at phi in (-2, -5), t={t}; dev from ell at phi=-5 {dev_near:.2e}",
        "<= 1e-3, <= 2e-2, <= 2e-2",
        time.perf_counter() - start,
    )


def criterion_6() -> CriterionResult:
    """Conjugate-transform correctness on closed-form curves: quadratic
    conjugate, clipped linear conjugate, and biconjugation."""
    start = time.perf_counter()
    phis = np.arange(-3.0, 3.0 + 1e-9, 0.01)
    quad = ldp.cgf_curve([(float(p), float(p) ** 2 / 2.0, "perron") for p in phis])
    j1 = float(ldp.legendre(quad, 1.0))
    lin = ldp.cgf_curve([(float(p), float(p), "perron") for p in phis])
    i_half = float(ldp.legendre(lin, 0.5, clip=-1.0))
    ws = np.arange(-1.5, 1.5 + 1e-9, 0.01)
    j_vals = [(float(w), float(ldp.legendre(quad, float(w))), "perron") for w in ws]
    bicurve = ldp.cgf_curve(j_vals)
    probe = np.arange(-1.2, 1.2 + 1e-9, 0.05)
    bidev = max(abs(float(ldp.legendre(bicurve, float(p))) - p * p / 2.0) for p in probe)
    dev_q = abs(j1 - 0.5)
    dev_l = abs(i_half - 0.5)
    return CriterionResult(
        6,
        "conjugate transform",
        dev_q <= 1e-3 and dev_l <= 1e-3 and bidev <= 1e-3,
        f"quadratic J(1) dev {dev_q:.2e}; clipped I(1/2) dev {dev_l:.2e}; "
        f"biconjugation dev {bidev:.2e}",
        "each <= 1e-3",
        time.perf_counter() - start,
    )


def criterion_7() -> CriterionResult:
    """Ball-mass decay overlay on the 0.6/0.4 contact model: exact lattice
    atom at full occupation, the conjugate-side rate, and the sampling
    estimator against the exact window masses."""
    start = time.perf_counter()
    model = letter_local_model(
        waiting=waiting_law({1: 0.6, 2: 0.4}), reward=delta_reward(1.0), s_max=2
    )
    env = _flat_env()
    traj = realize(env, None, horizon=900)
    log06 = math.log(0.6)
    atom = partition.constrained_measure(model, traj, 400, 1.0).log_mass_window(1.0, 1e-9) / 400
    dev_atom = abs(atom - log06)
    phis = np.arange(-2.0, 8.0 + 1e-9, 0.05)
    rc = ldp.rate_curve(model, env, phis, [1.0], kind="constrained", route="variational")
    dev_rate = abs(rc.normalized_rates()[0] - (-log06))
    t = 200
    meas = partition.constrained_measure(model, traj, t, 1.0)
    stat_ok = True
    stat_note = []
    for w in (0.7, 0.85):
        rec = montecarlo.empirical_ball_mass(
            model, traj, t, w, 0.05, 100_000, seed=2, kind="constrained", n_chunks=16
        )
        exact = meas.log_mass_window(w, 0.05) / t
        pull = abs(rec.log_mass_per_t - exact) / rec.std_error
        stat_ok = stat_ok and pull <= 3.0
        stat_note.append(f"w={w}: {pull:.2f} SE ({rec.hits} hits)")
    rec1 = montecarlo.empirical_ball_mass(
        model, traj, t, 1.0, 0.05, 100_000, seed=2, kind="constrained", n_chunks=16
    )
    exact1 = meas.log_mass_window(1.0, 0.05)
    # window mass ~ e^-60: with 1e5 samples a hit is impossible; demand the
    # zero-hit sentinel and that the exact mass confirms expected hits << 1
    sentinel_ok = rec1.hits == 0 and (exact1 + math.log(100_000)) < -5.0
    passed = dev_atom <= 5e-3 and dev_rate <= 5e-3 and stat_ok and sentinel_ok
    return CriterionResult(
        7,
        "ball-mass decay overlay",
        passed,
        f"atom dev {dev_atom:.2e}; conjugate dev {dev_rate:.2e}; "
        + "; ".join(stat_note)
        + f"; w=1.0 hits={rec1.hits} with exact window log-mass {exact1:.1f}",
        "atom and conjugate <= 5e-3 of log 0.6; scans within 3 SE; zero hits at w=1",
        time.perf_counter() - start,
    )


def criterion_8() -> CriterionResult:
    """Affine-then-convex shape of the contact-fraction rate for geometric
    waits at the critical field.

    The affine stretch on (0, u] comes from the depinned-phase floor of
    the homogeneous free energy (F = 0 at and below the critical field),
    an s_max -> infinity property no finite renewal DP reproduces, so the
    curve is built from the free-energy solver that carries the floor and
    conjugated on the transform side."""
    start = time.perf_counter()
    law = waiting_law({s: 0.5**s for s in range(1, 61)})
    phis = np.arange(-2.0, 4.0 + 1e-9, 0.01)
    curve = ldp.cgf_curve(
        [
            (float(p), pinning_free_energy_homogeneous(law, float(p)), "perron")
            for p in phis
        ]
    )
    ws = np.arange(0.05, 0.95 + 1e-9, 0.05)
    rates = np.array([float(ldp.legendre(curve, float(w))) for w in ws])
    flat = rates[:10]
    slope_max = float(np.max(np.abs(np.diff(flat)))) / 0.05
    seg = rates[10:]
    second = seg[2:] - 2.0 * seg[1:-1] + seg[:-2]
    second_min = float(second.min())
    passed = slope_max <= 1e-3 and second_min >= 1e-3
    return CriterionResult(
        8,
        "affine stretch of the contact rate",
        passed,
        f"max |slope| {slope_max:.2e} on (0, 0.5]; min second difference "
        f"{second_min:.2e} on [0.55, 0.95]",
        "<= 1e-3 and >= 1e-3",
        time.perf_counter() - start,
    )


def criterion_9() -> CriterionResult:
    """Return-time law of the two-state chain: tail constant and exact
    waiting masses against the path-sum oracle."""
    start = time.perf_counter()
    spec = MarkovReturnSpec(
        states=("c", "b"), c="c", K=[[0.5, 0.5], [0.3, 0.7]], s_max=600
    )
    model = markov_return_model(spec)
    traj = realize(_flat_env(), None, horizon=4096)
    tc = ldp.tail_constant(model, traj)
    dev_ell = abs(float(tc.ell) - math.log(0.7))
    law = model.waiting_law(traj, 0)
    worst = abs(law.probs[1] - 0.5)
    for s in range(2, 7):
        path_sum = 0.5
        for _ in range(s - 2):
            path_sum *= 0.7
        path_sum *= 0.3
        worst = max(worst, abs(law.probs[s] - path_sum))
    passed = dev_ell <= 1e-3 and worst <= 1e-12
    return CriterionResult(
        9,
        "chain return-time law",
        passed,
        f"tail-constant dev {dev_ell:.2e} from log 0.7; max waiting-mass dev {worst:.2e}",
        "<= 1e-3 and <= 1e-12",
        time.perf_counter() - start,
    )


_DETERMINISM_CONFIG = """\
horizon = 900
seed = 11
t_list = [200]
output_dir = "{out}"

[environment]
type = "periodic"

[[environment.letters]]
name = 0.0

[model]
builder = "inline"
waiting_probs = [0.6, 0.4]
reward_atoms = [[1.0, 1.0]]
potential = 0.0

[phi_grid]
min = -1.0
max = 2.0
step = 0.1

[w_grid]
min = 0.6
max = 1.0
step = 0.05

[mc]
n_samples = 20000
delta = 0.05
batch_partition = 8
"""


def criterion_10() -> CriterionResult:
    """Byte-identical command outputs across reruns and worker counts."""
    from . import cli

    start = time.perf_counter()
    notes = []
    passed = True
    saved = os.environ.get("QLDP_THREADS")
    try:
        with tempfile.TemporaryDirectory() as td:
            root = Path(td)
            outs = {}
            for tag, threads in (("a", "1"), ("b", "1"), ("c", "4")):
                out = root / tag
                out.mkdir()
                cfg = root / f"cfg_{tag}.toml"
                cfg.write_text(_DETERMINISM_CONFIG.format(out=out.as_posix()))
                os.environ["QLDP_THREADS"] = threads
                for cmd in ("cgf", "rate", "simulate"):
                    code = cli.main([cmd, "--config", str(cfg)])
                    if code != 0:
                        passed = False
                        notes.append(f"{cmd} exited {code}")
                outs[tag] = out
            for name in ("cgf.csv", "rate.csv", "scan.csv"):
                same_rerun = filecmp.cmp(outs["a"] / name, outs["b"] / name, shallow=False)
                same_threads = filecmp.cmp(outs["a"] / name, outs["c"] / name, shallow=False)
                if not (same_rerun and same_threads):
                    passed = False
                notes.append(
                    f"{name}: rerun {'==' if same_rerun else '!='}, "
                    f"threads 1 vs 4 {'==' if same_threads else '!='}"
                )
    finally:
        if saved is None:
            os.environ.pop("QLDP_THREADS", None)
        else:
            os.environ["QLDP_THREADS"] = saved
    return CriterionResult(
        10,
        "command determinism",
        passed,
        "; ".join(notes),
        "byte-identical cgf/rate/scan CSVs across reruns and QLDP_THREADS",
        time.perf_counter() - start,
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_all(numbers=None) -> tuple[CriterionResult, ...]:
    picked = sorted(CRITERIA) if numbers is None else sorted(set(int(n) for n in numbers))
    out = []
    for n in picked:
        if n not in CRITERIA:
            raise KeyError(f"no criterion {n}")
        out.append(CRITERIA[n]())
    return tuple(out)


def report_lines(results) -> list[str]:
    lines = [r.line() for r in results]
    failed = [r.number for r in results if not r.passed]
    if failed:
        lines.append(f"FAILED criteria: {failed}")
    else:
        lines.append(f"all {len(results)} criteria passed")
    return lines
