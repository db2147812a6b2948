"""Auto-conditioned Frank-Wolfe: line-search-free closed-loop steps for projection-free methods."""

from .core import SolverConfig, Trace, run, solve

__all__ = ["SolverConfig", "Trace", "run", "solve"]
__version__ = "0.1.0"
