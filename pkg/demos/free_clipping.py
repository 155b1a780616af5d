"""Where the unconstrained growth rate follows the renewal root, and where
it sticks at the waiting-tail decay constant.

The unconstrained partition sums constrained blocks against survival
tails, so its exponential growth rate is the renewal root z(phi) when the
tilted kernel has one, and the tail constant ell = lim (1/s) log P[S > s]
when it does not: the limit is max(z, ell) with z read as -inf when no
root exists.

Two waiting laws make both regimes visible.  Pure geometric tails give a
kernel that diverges at the tail radius, so a root exists at every tilt
and the clip never binds (the rate only creeps toward ell as phi drops).
Dividing the same tails by s^2 keeps ell unchanged but makes the kernel
finite at the radius, so below a critical tilt the root disappears and
the rate sticks at ell exactly.
"""

import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import spence

from qldp import (
    Periodic,
    compound_poisson_model,
    constrained_partition,
    free_partition,
    letter,
    letter_local_model,
    realize,
    reward_law,
    tail_constant,
    waiting_law,
)

ELL = -math.log(2.0)


def geometric_part():
    model = compound_poisson_model(0.5, [(1.0, 1.0)], s_max=1024)
    traj = realize(Periodic(states=(letter(name=0.0),)), None, horizon=4096)
    tc = tail_constant(model, traj)
    t = 600
    print("geometric(1/2) waits, unit reward per renewal")
    print(f"tail constant ell = {float(tc.ell):.6f} (log 1/2 = {ELL:.6f})")
    print(f"{'phi':>6} {'free rate':>12} {'root z(phi)':>12} {'|gap|':>9} {'z - ell':>9}")
    for phi in (1.0, 0.0, -1.0, -2.0, -5.0):
        rate = free_partition(model, traj, t, phi) / t
        z = math.log((1.0 + math.exp(phi)) / 2.0)
        print(f"{phi:6.1f} {rate:12.8f} {z:12.8f} {abs(rate - z):9.1e} {z - ELL:9.2e}")
    print("a root exists at every tilt here: the kernel blows up at the tail")
    print("radius, so max(z, ell) = z and the clip never binds\n")


def li2(x: float) -> float:
    # scipy's spence(z) is the dilogarithm at 1 - z
    return float(spence(1.0 - x))


def corrected_part():
    s_max = 1500
    norm = li2(0.5)
    probs = {s: 0.5**s / (s * s) / norm for s in range(1, s_max + 1)}
    model = letter_local_model(
        waiting_law(probs),
        reward_law([(1.0, 1.0)]),
        s_max=s_max,
        label="geometric_over_s2",
    )
    traj = realize(Periodic(states=(letter(name=0.0),)), None, horizon=1024)
    phi_c = math.log(norm) - math.log(li2(1.0))
    print("same tails divided by s^2: p(s) = 2^-s / s^2 / Li2(1/2)")
    print(f"critical tilt phi_c = log(Li2(1/2)/Li2(1)) = {phi_c:.6f}")
    print(f"{'phi':>6} {'limit':>12} {'t=250':>10} {'t=500':>10} {'t=1000':>10} {'constr':>10}")
    for phi in (0.0, -0.6, -1.0, -1.5, -2.5):
        table = constrained_partition(model, traj, 1000, phi)

        def psi_minus_one(z, phi=phi):
            return math.exp(phi) * li2(math.exp(-z) / 2.0) / norm - 1.0

        if psi_minus_one(ELL) > 0.0:
            limit = brentq(psi_minus_one, ELL, 8.0, xtol=1e-13)
            tag = f"{limit:12.8f}"
        else:
            limit = ELL
            tag = f"{'ell':>12}"
        rates = [free_partition(model, traj, t, phi, table=table) / t for t in (250, 500, 1000)]
        constr = float(table.values[1000]) / 1000
        print(f"{phi:6.1f} {tag} {rates[0]:10.6f} {rates[1]:10.6f} {rates[2]:10.6f} {constr:10.6f}")
    print("above phi_c the finite-t rates close in on the root; below it both")
    print("the free and the constrained rates drift to ell, the free one held")
    print("up by a single long excursion's survival tail")


def main():
    geometric_part()
    corrected_part()


if __name__ == "__main__":
    main()
