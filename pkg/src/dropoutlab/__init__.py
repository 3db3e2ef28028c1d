"""dropoutlab: a desk-scale MOOC dropout-prediction lab.

Synthesizes per-day clickstream courses, extracts cumulative feature
matrices, trains logistic-regression and feed-forward classifiers under
several training paradigms (including in-situ proxy labels and cross-course
hyperplane averaging), grows networks with function-preserving operators,
and evaluates everything with weekly rank-based AUC reports.
"""

from .errors import DropoutLabError

__version__ = "0.1.0"

__all__ = ["DropoutLabError", "__version__"]
