"""Compare trained AC critics with exact solutions on small open grids."""

import argparse

import numpy as np

from multicritic.ac import AcConfig, train
from multicritic.gridworld import GridScenario, compile_scenario
from multicritic.oracle import greedy_path_length, policy_evaluation, shortest_path_steps, value_iteration


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sides", type=int, nargs="+", default=[3, 4, 5])
    parser.add_argument("--episodes", type=int, default=3000)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    for side in args.sides:
        sc = GridScenario(f"open{side}", side, (0, 0), (side - 1, side - 1))
        mdp = compile_scenario(sc)
        res = train(mdp, AcConfig(episodes=args.episodes, seed=args.seed, exploring_starts=True))
        gap = np.max(np.abs(res.values - policy_evaluation(mdp, res.policy)))
        sets = value_iteration(mdp).optimal_action_sets
        agree = sum(int(res.policy[s].argmax()) in sets[s] for s in range(mdp.num_states))
        print(f"{sc.name}: critic vs exact {gap:.3f}, greedy actions optimal at {agree}/{mdp.num_states} states, "
              f"greedy path {greedy_path_length(mdp, res.policy, 0)} (shortest {shortest_path_steps(sc)})")


if __name__ == "__main__":
    main()
