"""Exception types raised across the planner."""


class InvalidArgumentError(ValueError):
    pass


class OutOfBoundsError(ValueError):
    """A query point lies outside the signed distance grid."""


class GraphStructureError(ValueError):
    """A factor connects non-consecutive states."""


class NumericalError(ArithmeticError):
    def __init__(self, message, node=None):
        if node is not None:
            message = f"node {node}: {message}"
        super().__init__(message)
        self.node = node


class ScenarioError(ValueError):
    """Scenario file could not be parsed or failed validation."""

    def __init__(self, message, field=None, line=None):
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        prefix = ", ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.field = field
        self.line = line
