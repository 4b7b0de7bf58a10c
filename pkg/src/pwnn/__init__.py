"""Helmholtz solvers: plane-wave activation networks, tanh/sin PINNs and plane-wave PUM."""

from .evaluation import EvalGrid, accuracy, direction_report, evaluate_solution
from .lbfgs import LbfgsConfig, minimize
from .network import NetParams, NetSpec, Objective, forward, init_params
from .problems import HelmholtzProblem, kd_problem, random_directions, sample, ud_problem
from .pwpum import solve_pwpum, solve_wt, uniform_basis

__version__ = "0.1.0"

__all__ = [
    "EvalGrid",
    "HelmholtzProblem",
    "LbfgsConfig",
    "NetParams",
    "NetSpec",
    "Objective",
    "accuracy",
    "direction_report",
    "evaluate_solution",
    "forward",
    "init_params",
    "kd_problem",
    "minimize",
    "random_directions",
    "sample",
    "solve_pwpum",
    "solve_wt",
    "ud_problem",
    "uniform_basis",
]
