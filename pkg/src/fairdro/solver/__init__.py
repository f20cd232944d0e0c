from .lp import Constraint, LpInstance, LpSolution, solve_lp
from .subgradient import ConvexProblem, ConvergenceReport, minimize_convex
from .knapsack import KnapsackInstance, greedy_knapsack

__all__ = [
    "Constraint",
    "LpInstance",
    "LpSolution",
    "solve_lp",
    "ConvexProblem",
    "ConvergenceReport",
    "minimize_convex",
    "KnapsackInstance",
    "greedy_knapsack",
]
