from src.sdp.problem import LmiConstraint, SdpProblem, SdpSolution, SdpStatus, max_constraint_eigenvalue
from src.sdp.solvers import available_solvers, get_solver, solve

__all__ = [
    "LmiConstraint",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "available_solvers",
    "get_solver",
    "max_constraint_eigenvalue",
    "solve",
]
