"""
Exception hierarchy for the robust min-max toolkit
"""
from typing import Optional


class RobustMinMaxError(Exception):
    """Base class for every error raised by the toolkit"""


class ContractViolation(RobustMinMaxError, ValueError):
    """A precondition of an operation does not hold"""


class EvaluationError(RobustMinMaxError):
    """A cost function produced a value that cannot be ranked"""

    def __init__(self, index: Optional[int], message: str):
        self.index = index
        super().__init__(message if index is None else f"function {index}: {message}")


class BudgetExceededError(RobustMinMaxError):
    """A solver would need more evaluations or cells than it is allowed"""

    def __init__(self, required: int, budget: int, what: str = "grid evaluations"):
        self.required = required
        self.budget = budget
        super().__init__(f"{what} required: {required}, budget: {budget}")


class ScenarioError(RobustMinMaxError):
    """A scenario file could not be parsed or validated"""

    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        self.line = line
        self.source = source
        prefix = source or "scenario"
        if line is not None:
            prefix = f"{prefix}:{line}"
        super().__init__(f"{prefix}: {message}")
