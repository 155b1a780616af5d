"""Command-line front end: config ingestion, experiment orchestration, CSV
emission, and the verification suite runner.

Config files are TOML with the field names of ExperimentConfig; see the
README for the schema.  Exit codes: 0 success, 1 numerical-tolerance
failure, 2 invalid input, 3 resource cap.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from . import acceptance, ldp, montecarlo, partition, variational
from .env import IidSequence, MarkovShift, Periodic, letter, realize
from .errors import (
    CapExceeded,
    DimensionMismatch,
    InvalidRho,
    InvalidSpec,
    MemoryCap,
    NotPeriodic,
    OffLattice,
    OutOfHorizon,
    TooLarge,
    TooManyStates,
)
from .examples import (
    MarkovReturnSpec,
    PinningSpec,
    compound_poisson_model,
    markov_return_model,
    pinning_environment,
    pinning_model,
)
from .model import RenewalModel, letter_local_model, reward_law, waiting_law

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_INVALID = 2
EXIT_CAP = 3

_INVALID_ERRORS = (
    InvalidSpec,
    InvalidRho,
    NotPeriodic,
    OutOfHorizon,
    DimensionMismatch,
    OffLattice,
    TooLarge,
    FileNotFoundError,
    IsADirectoryError,
    tomllib.TOMLDecodeError,
    KeyError,
    TypeError,
    ValueError,
)
_CAP_ERRORS = (MemoryCap, CapExceeded, TooManyStates)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated experiment description."""

    environment: object
    model: RenewalModel
    horizon: int
    seed: int
    phi_grid: tuple
    w_grid: tuple
    t_list: tuple[int, ...]
    mc: dict
    output_dir: str
    tolerances: dict


# ---------------------------------------------------------------------------
# config parsing


def _letters(items) -> tuple:
    if not items:
        raise InvalidSpec("environment needs at least one letter table")
    return tuple(letter(**{k: float(v) for k, v in tbl.items()}) for tbl in items)


def build_environment(table):
    kind = table.get("type")
    if kind == "periodic":
        return Periodic(states=_letters(table.get("letters")))
    if kind == "iid":
        return IidSequence(
            letters=_letters(table.get("letters")),
            weights=tuple(float(x) for x in table["weights"]),
        )
    if kind == "markov":
        return MarkovShift(
            letters=_letters(table.get("letters")),
            transition=tuple(tuple(float(x) for x in row) for row in table["transition"]),
            initial=tuple(float(x) for x in table["initial"]),
        )
    raise InvalidSpec(f"unknown environment type {kind!r}")


def _reward_atoms(rows):
    atoms = []
    for row in rows:
        if len(row) < 2:
            raise InvalidSpec("reward atom rows are [point..., mass]")
        point = float(row[0]) if len(row) == 2 else tuple(float(x) for x in row[:-1])
        atoms.append((point, float(row[-1])))
    return atoms


def build_model(table) -> tuple[RenewalModel, PinningSpec | None]:
    """Build the model named by the config; returns the pinning spec too so
    a missing environment section can fall back to its disorder law."""
    builder = table.get("builder")
    if builder == "inline":
        probs = [float(x) for x in table.get("waiting_probs", [])]
        if not probs:
            raise InvalidSpec("inline model needs waiting_probs")
        p_inf = float(table["waiting_p_inf"]) if "waiting_p_inf" in table else None
        law = waiting_law({i + 1: p for i, p in enumerate(probs) if p > 0}, p_inf=p_inf)
        rl = reward_law(atoms=_reward_atoms(table.get("reward_atoms", [])))
        h = float(table.get("potential", 0.0))
        model = letter_local_model(
            waiting=law,
            reward=rl,
            potential=lambda le, s: h,
            s_max=law.s_max,
            dim=rl.dim,
        )
        return model, None
    if builder == "compound_poisson":
        rho_spec = table["rho"]
        if isinstance(rho_spec, str):
            rho = lambda le: le[rho_spec]
        else:
            rho = float(rho_spec)
        atoms = _reward_atoms(table["reward_atoms"])
        model = compound_poisson_model(
            rho,
            atoms,
            s_max=int(table["s_max"]),
            overflow=table.get("overflow", "p_inf"),
        )
        return model, None
    if builder == "pinning":
        disorder = table.get("disorder", "gaussian")
        if not isinstance(disorder, str):
            disorder = tuple((float(v), float(w)) for v, w in disorder)
        spec = PinningSpec(
            alpha=float(table["alpha"]),
            h=float(table["h"]),
            beta=float(table["beta"]),
            disorder=disorder,
            s_max=int(table["s_max"]),
            observable=table.get("observable", "contacts"),
        )
        tail_cap = float(table["tail_cap"]) if "tail_cap" in table else None
        model = pinning_model(spec, tail_cap=tail_cap, dim_cap=int(table.get("dim_cap", 64)))
        return model, spec
    if builder == "markov_return":
        spec = MarkovReturnSpec(
            states=tuple(table["states"]),
            c=table["c"],
            K=[[float(x) for x in row] for row in table["K"]],
            s_max=int(table["s_max"]),
        )
        return markov_return_model(spec), None
    raise InvalidSpec(f"unknown model builder {builder!r}")


def _axis(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise InvalidSpec("grid step must be positive")
    if hi < lo:
        raise InvalidSpec("grid max must be >= min")
    return np.arange(lo, hi + step * 1e-9, step)


def build_grid(table, name: str) -> tuple:
    if table is None:
        raise InvalidSpec(f"config missing {name}")
    lo, hi, step = table.get("min"), table.get("max"), table.get("step")
    if any(v is None for v in (lo, hi, step)):
        raise InvalidSpec(f"{name} needs min, max, step")
    if all(isinstance(v, (int, float)) for v in (lo, hi, step)):
        axes = [_axis(float(lo), float(hi), float(step))]
    else:
        axes = [_axis(float(a), float(b), float(c)) for a, b, c in zip(lo, hi, step)]
    if len(axes) == 1:
        points = tuple(float(x) for x in axes[0])
    else:
        points = tuple(
            tuple(float(x) for x in row) for row in itertools.product(*axes)
        )
    if not points:
        raise InvalidSpec(f"{name} is empty")
    return points


def parse_config(path, seed_override=None, out_override=None) -> ExperimentConfig:
    raw = tomllib.loads(Path(path).read_text())
    model, pin_spec = build_model(raw.get("model") or {})
    env_table = raw.get("environment")
    if env_table:
        env = build_environment(env_table)
    elif pin_spec is not None:
        env = pinning_environment(pin_spec)
    else:
        raise InvalidSpec("config missing environment")
    horizon = int(raw["horizon"])
    t_list = tuple(sorted(set(int(t) for t in raw["t_list"])))
    if not t_list or t_list[0] < 1:
        raise InvalidSpec("t_list needs positive entries")
    if horizon < t_list[-1]:
        raise InvalidSpec(f"horizon {horizon} < max(t_list) {t_list[-1]}")
    mc_raw = raw.get("mc", {})
    mc = {
        "n_samples": int(mc_raw.get("n_samples", 10_000)),
        "delta": float(mc_raw.get("delta", 0.05)),
        "batch_partition": int(mc_raw.get("batch_partition", 1)),
    }
    if mc["n_samples"] < 1 or mc["batch_partition"] < 1 or mc["delta"] <= 0:
        raise InvalidSpec("mc table needs n_samples >= 1, batch_partition >= 1, delta > 0")
    tol_raw = raw.get("tolerances", {})
    tolerances = {"route_gap": float(tol_raw.get("route_gap", 0.01))}
    seed = int(seed_override) if seed_override is not None else int(raw.get("seed", 0))
    out_dir = str(out_override) if out_override is not None else str(raw.get("output_dir", "."))
    return ExperimentConfig(
        environment=env,
        model=model,
        horizon=horizon,
        seed=seed,
        phi_grid=build_grid(raw.get("phi_grid"), "phi_grid"),
        w_grid=build_grid(raw.get("w_grid"), "w_grid"),
        t_list=t_list,
        mc=mc,
        output_dir=out_dir,
        tolerances=tolerances,
    )


# ---------------------------------------------------------------------------
# commands


def _worker_pool():
    n = int(os.environ.get("QLDP_THREADS", "1") or "1")
    if n > 1:
        return ThreadPoolExecutor(max_workers=n)
    return None


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_cgf(cfg: ExperimentConfig, route: str = "both") -> int:
    """Sample z over the phi grid via the growth-limit route and, on
    periodic environments, the corrector route; emit both with their gap."""
    periodic = isinstance(cfg.environment, Periodic)
    if route == "variational" and not periodic:
        raise NotPeriodic("variational route needs a Periodic environment")
    do_king = route in ("kingman", "both")
    do_var = route in ("variational", "both") and periodic
    traj = realize(cfg.environment, cfg.seed, horizon=cfg.horizon)
    phis = cfg.phi_grid
    pool = _worker_pool()
    try:
        mapper = pool.map if pool is not None else map
        king = (
            list(
                mapper(
                    lambda p: partition.kingman_cgf_estimate(
                        cfg.model, traj, p, cfg.t_list
                    ).estimate,
                    phis,
                )
            )
            if do_king
            else None
        )
        var = (
            list(
                mapper(
                    lambda p: variational.free_energy_variational(
                        cfg.model, cfg.environment, p
                    ).z,
                    phis,
                )
            )
            if do_var
            else None
        )
    finally:
        if pool is not None:
            pool.shutdown()
    rows = []
    worst_gap = 0.0
    for i, p in enumerate(phis):
        vec = np.atleast_1d(np.asarray(p, dtype=float))
        gap = (king[i] - var[i]) if (do_king and do_var) else math.nan
        if do_king and do_var:
            worst_gap = max(worst_gap, abs(gap))
        if do_king:
            rows.append((vec, king[i], "kingman", gap))
        if do_var:
            rows.append((vec, var[i], "variational", gap))
    path = _out_dir(cfg) / "cgf.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            tuple(f"phi_{j + 1}" for j in range(cfg.model.dim)) + ("z", "source", "gap")
        )
        for vec, z, source, gap in rows:
            writer.writerow(
                tuple(repr(float(x)) for x in vec)
                + (repr(float(z)), source, repr(float(gap)))
            )
    if do_king and do_var and worst_gap > cfg.tolerances["route_gap"]:
        print(
            f"route gap {worst_gap:.3e} exceeds tolerance {cfg.tolerances['route_gap']:.3e}",
            file=sys.stderr,
        )
        return EXIT_TOLERANCE
    return EXIT_OK


def cmd_rate(cfg: ExperimentConfig, route: str = "variational", kind: str = "constrained") -> int:
    """Full pipeline to the rate curve over the w grid."""
    if route not in ("kingman", "variational"):
        raise InvalidSpec("rate needs a single route (kingman or variational)")
    curve = ldp.rate_curve(
        cfg.model,
        cfg.environment,
        cfg.phi_grid,
        cfg.w_grid,
        kind=kind,
        route=route,
        seed=cfg.seed,
        t=cfg.t_list[-1],
    )
    ldp.rate_curve_to_csv(curve, _out_dir(cfg) / "rate.csv")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, kind: str = "constrained") -> int:
    """Hit-or-miss ball-mass scan over the w grid at each t."""
    traj = realize(cfg.environment, cfg.seed, horizon=cfg.horizon)
    records = []
    pool = _worker_pool()
    try:
        for t in cfg.t_list:
            records.extend(
                montecarlo.empirical_rate_scan(
                    cfg.model,
                    traj,
                    t,
                    cfg.w_grid,
                    cfg.mc["delta"],
                    cfg.mc["n_samples"],
                    cfg.seed,
                    kind=kind,
                    n_chunks=cfg.mc["batch_partition"],
                    executor=pool,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    montecarlo.scan_to_csv(records, _out_dir(cfg) / "scan.csv")
    return EXIT_OK


def cmd_verify(out_dir=None, criteria=None) -> int:
    """Run the numbered verification criteria and report each outcome."""
    results = acceptance.run_all(criteria)
    for line in acceptance.report_lines(results):
        print(line)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "verify.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ("number", "name", "passed", "measured", "expected", "runtime_s")
            )
            for r in results:
                writer.writerow(
                    (r.number, r.name, int(r.passed), r.measured, r.expected, f"{r.runtime:.3f}")
                )
    return EXIT_OK if all(r.passed for r in results) else EXIT_TOLERANCE


# ---------------------------------------------------------------------------
# argument surface


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qldp",
        description="Quenched growth rates and rate functions of renewal-reward processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--seed", type=int, default=None, help="seed override")

    p_cgf = sub.add_parser("cgf", help="growth-rate curve over the phi grid")
    common(p_cgf)
    p_cgf.add_argument(
        "--route", choices=("kingman", "variational", "both"), default="both"
    )

    p_rate = sub.add_parser("rate", help="rate-function curve over the w grid")
    common(p_rate)
    p_rate.add_argument(
        "--route", choices=("kingman", "variational"), default="variational"
    )
    p_rate.add_argument("--kind", choices=("constrained", "free"), default="constrained")

    p_sim = sub.add_parser("simulate", help="Monte Carlo ball-mass scan")
    common(p_sim)
    p_sim.add_argument("--kind", choices=("constrained", "free"), default="constrained")

    p_ver = sub.add_parser("verify", help="run the verification criteria")
    p_ver.add_argument("--config", default=None, help="ignored; criteria are self-contained")
    p_ver.add_argument("--out", default=None, help="directory for verify.csv")
    p_ver.add_argument(
        "--criteria",
        default=None,
        help="comma-separated criterion numbers (default: all)",
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            numbers = (
                [int(x) for x in args.criteria.split(",")] if args.criteria else None
            )
            return cmd_verify(out_dir=args.out, criteria=numbers)
        cfg = parse_config(args.config, seed_override=args.seed, out_override=args.out)
        if args.command == "cgf":
            return cmd_cgf(cfg, route=args.route)
        if args.command == "rate":
            return cmd_rate(cfg, route=args.route, kind=args.kind)
        if args.command == "simulate":
            return cmd_simulate(cfg, kind=args.kind)
        raise InvalidSpec(f"unknown command {args.command!r}")
    except _CAP_ERRORS as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_CAP
    except _INVALID_ERRORS as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
