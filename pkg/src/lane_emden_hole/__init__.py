"""Numerical laboratory for the critical Lane-Emden system on a ball with a
small spherical hole."""

__version__ = "0.1.0"

from .ground_state import CriticalPair, GroundState, critical_pair, solve_limit_system  # noqa: E402
from .greens import PuncturedBall, KernelValue, gamma_tilde, h_tilde_center  # noqa: E402

__all__ = [
    "CriticalPair",
    "GroundState",
    "KernelValue",
    "PuncturedBall",
    "critical_pair",
    "gamma_tilde",
    "h_tilde_center",
    "solve_limit_system",
]
