# -*- coding: utf-8 -*-
"""Error hierarchy shared by every module of the package."""


class DesignError(Exception):
    """Root of all errors raised by the design pipeline."""


class ValidationError(DesignError):
    """Configuration or input fault. The CLI maps it to exit status 2."""


class TaskFileError(ValidationError):
    """A task file could not be parsed or violates the schema."""

    def __init__(self, message, path=None, line=None, column=None, field=None):
        self.path = str(path) if path is not None else None
        self.line = line
        self.column = column
        self.field = field
        location = []
        if self.path:
            location.append(self.path)
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column {column}")
        if field:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")


class ZeroTargetError(ValidationError):
    """Relative error requested against a target of exactly zero."""


class MissingPropertyError(ValidationError):
    def __init__(self, property_id):
        self.property_id = property_id
        super().__init__(f"Property '{property_id}' is missing from the property vector")


class PipelineTransitionError(ValidationError):
    def __init__(self, current, requested):
        self.current = current
        self.requested = requested
        super().__init__(f"Illegal pipeline transition from '{current}' on '{requested}'")


class SimulationError(DesignError):
    """Physics fault. Degrades a candidate, never aborts a run."""


class ConvergenceError(SimulationError):
    def __init__(self, message, iterations=None, residual=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})"
                         if residual is not None else message)


class DegenerateMaterialError(SimulationError):
    pass


class SingularTensorError(SimulationError):
    def __init__(self, condition_number):
        self.condition_number = condition_number
        super().__init__(f"Elastic tensor is singular (condition number {condition_number:.3e})")


class PlasticityError(SimulationError):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Return mapping did not converge after {iterations} Newton iterations "
                         f"(residual={residual:.3e})")


class ReturnMappingFault(DesignError):
    """Negative plastic increment. A programming fault that must abort."""
