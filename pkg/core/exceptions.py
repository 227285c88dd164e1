# GrateWave/core/exceptions.py

"""Error types raised by the simulation core and the configuration layer."""

from typing import Dict, Optional


class GrateWaveError(Exception):
    """Base class for every error raised by GrateWave."""
    pass


class SpecialFunctionDomainError(GrateWaveError, ValueError):
    """Argument outside the domain of a special function."""
    pass


class GeometryError(GrateWaveError, ValueError):
    """Point on or outside the room boundary where an interior point is required."""
    pass


class IncidenceAngleError(GrateWaveError, ValueError):
    """Incidence angle outside [0, pi/2)."""
    pass


class SingularityError(GrateWaveError):
    """Observation point coincides with a source or a retained image."""
    pass


class ConfigurationError(GrateWaveError):
    """Parameter combination the engine refuses to run (Nyquist, branch cap, ...)."""
    pass


class ExtrapolationError(GrateWaveError):
    """Coefficient table lookup outside the tabulated angle range."""
    pass


class CoefficientValidationError(GrateWaveError):
    """Grating coefficient table violates passivity or format rules."""
    pass


class FieldShapeError(GrateWaveError, ValueError):
    """Two field grids that must be congruent are not."""
    pass


class EmptyEnsembleError(GrateWaveError):
    """No usable samples for a fading ensemble."""
    pass


class FitConvergenceError(GrateWaveError):
    """Maximum-likelihood search did not converge within the sweep cap."""

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ScenarioParseError(GrateWaveError):
    """Scenario file is not valid JSON, has a malformed field, or uses an unknown tag."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None,
                 field: Optional[str] = None):
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}, column {column}")
        super().__init__(f"{' at '.join(location)}: {message}" if location else message)
        self.line = line
        self.column = column
        self.field = field


class ScenarioValidationError(GrateWaveError):
    """Scenario parsed but violates a named constraint."""

    def __init__(self, constraint: str, message: str):
        super().__init__(f"{constraint}: {message}")
        self.constraint = constraint


class ExportError(GrateWaveError):
    """An artifact could not be written."""
    pass
