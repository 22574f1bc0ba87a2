"""
Exception hierarchy for the graph Fujita toolkit.

Every error carries a ``category`` string; the CLI maps categories to exit
codes through ``Config.EXIT_CODES``.
"""
from typing import Any, Dict, List, Optional


class ToolkitError(Exception):
    category = 'internal'

    def to_dict(self) -> Dict[str, Any]:
        return {'category': self.category, 'message': str(self)}


class ConfigParseError(ToolkitError):
    category = 'config-parse'

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class UnknownKeyError(ToolkitError):
    category = 'unknown-key'


class InvalidParameterError(ToolkitError, ValueError):
    category = 'invalid-parameter'


class GraphValidationError(ToolkitError, ValueError):
    category = 'graph-validation'


class GraphParseError(GraphValidationError):
    pass


class AsymmetricWeightsError(GraphValidationError):
    pass


class NonPositiveMeasureError(GraphValidationError):
    pass


class DisconnectedGraphError(GraphValidationError):
    pass


class IsolatedVertexError(GraphValidationError):
    pass


class UnknownVertexError(GraphValidationError, IndexError):
    pass


class NumericalError(ToolkitError):
    category = 'numerical'


class DegenerateFitError(NumericalError):
    pass


class GraphTooLargeError(NumericalError):
    pass


class EigenSolverError(NumericalError):
    pass


class TruncationInsufficientError(NumericalError):
    def __init__(self, message: str, bound: float, order: int):
        super().__init__(message)
        self.bound = bound
        self.order = order


class SingularEvaluationError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class SpecMismatchError(NumericalError):
    pass


class PicardDivergenceError(NumericalError):
    def __init__(self, message: str, norms: List[float], diff_norms: List[float]):
        super().__init__(message)
        self.norms = list(norms)
        self.diff_norms = list(diff_norms)


class MalformedInputError(ToolkitError):
    category = 'malformed-input'
