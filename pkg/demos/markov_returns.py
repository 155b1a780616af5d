"""Returns to a marked state of a two-state chain, and what excursions see.

The return times of a Markov chain to a marked state form a renewal
process; with the chain's transition matrix varying along an environment
orbit the waiting law becomes position-dependent.  This script builds the
constant-matrix case (closed-form return law), checks it against hand
path sums, reads the tail constant off deep survival probabilities, and
then switches the reward to the number of distinct states visited per
excursion on a letter-modulated three-state chain.
"""

import math

import numpy as np

from qldp import (
    MarkovReturnSpec,
    Periodic,
    letter,
    markov_return_model,
    realize,
    simulate_trajectory,
    tail_constant,
)


def constant_chain():
    spec = MarkovReturnSpec(states=("c", "b"), c="c", K=[[0.5, 0.5], [0.3, 0.7]], s_max=600)
    model = markov_return_model(spec)
    traj = realize(Periodic(states=(letter(name=0.0),)), None, horizon=4096)
    law = model.waiting_law(traj, 0)
    print("constant K = [[0.5, 0.5], [0.3, 0.7]], marked state c")
    print(f"{'s':>3} {'p(s)':>12} {'path sum':>12}")
    for s in range(1, 7):
        hand = 0.5 if s == 1 else 0.5 * 0.7 ** (s - 2) * 0.3
        print(f"{s:3d} {law.probs[s]:12.9f} {hand:12.9f}")
    tc = tail_constant(model, traj)
    print(f"tail constant: {float(tc.ell):.6f} vs log 0.7 = {math.log(0.7):.6f}")
    print(f"survival mass beyond s_max: {law.p_inf:.3e} (0.5 * 0.7^599 = cut tail)\n")


def modulated_chain():
    a = letter(name=0.0)
    b = letter(name=1.0)
    ka = [[0.6, 0.2, 0.2], [0.5, 0.25, 0.25], [0.4, 0.3, 0.3]]
    kb = [[0.2, 0.4, 0.4], [0.3, 0.4, 0.3], [0.3, 0.3, 0.4]]

    def k_at(le):
        return ka if le["name"] == 0.0 else kb

    spec = MarkovReturnSpec(states=("c", "x", "y"), c="c", K=k_at, s_max=24)
    model = markov_return_model(spec)
    env = Periodic(states=(a, b))
    traj = realize(env, None, horizon=6000)
    law = model.waiting_law(traj, 0)
    print("letter-modulated three-state chain, reward = distinct states per excursion")
    print(f"{'s':>3} {'p(s)':>10}  atoms (distinct states: mass)")
    for s in range(1, 6):
        pts, masses = model.reward_law(traj, 0).atoms(s)
        stars = ", ".join(f"{int(p[0])}: {m:.4f}" for p, m in zip(pts, masses))
        print(f"{s:3d} {law.probs[s]:10.6f}  {stars}")
    sim = simulate_trajectory(model, traj, 5000, seed=7)
    mean_reward = sim.W_t[0] / sim.N_t if sim.N_t else float("nan")
    print(
        f"\nsimulated 5000 steps: {sim.N_t} excursions, "
        f"mean distinct states per excursion {mean_reward:.4f}"
    )


def main():
    constant_chain()
    modulated_chain()


if __name__ == "__main__":
    main()
