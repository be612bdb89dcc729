"""Exception hierarchy.  The CLI maps these onto exit codes."""


class SteadyELError(Exception):
    """Base class for all package errors."""


class ValidationError(SteadyELError, ValueError):
    """Invalid user input (parameters, grids, stencil settings)."""


class InvalidGrid(ValidationError):
    pass


class InvalidParameter(ValidationError):
    pass


class NonUnitDirector(ValidationError):
    pass


class UnsupportedDimension(ValidationError):
    pass


class DegeneratePole(ValidationError):
    pass


class StencilHitsOrigin(ValidationError):
    pass


class SolverError(SteadyELError):
    """Failure of the periodic-profile solver."""


class NoExistence(SolverError):
    pass


class NewtonDivergence(SolverError):
    pass


class DegenerateAtBoundary(SolverError):
    pass


class NonPeriodicOrbit(SolverError):
    pass


class StepTooCoarse(SolverError):
    pass


class PreconditionError(SteadyELError):
    """A computation requires a verified solution and did not get one."""


class NotASolution(PreconditionError):
    pass


class NotSelfSimilar(PreconditionError):
    pass


class IncompatibleField(PreconditionError):
    pass


class DivergentEnergy(PreconditionError):
    pass


class Unclassifiable(SteadyELError):
    pass
