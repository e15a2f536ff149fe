"""Exception types shared across the toolkit."""


class NodalContactError(Exception):
    """Base class for all toolkit errors."""


class InvalidSurfaceError(NodalContactError):
    """The face complex or edge-length metric is not a valid discrete surface."""


class SizeGuardError(NodalContactError):
    """A requested construction exceeds the built-in size guard."""


class DiscRemovalError(NodalContactError):
    """Geodesic disc removal failed (radius too large, touches boundary, ...)."""


class GluingError(NodalContactError):
    """Boundary rings are incompatible for gluing."""


class PerturbationError(NodalContactError):
    """A metric perturbation broke the triangle inequality; retry with a
    smaller amplitude or a different seed."""


class SolverError(NodalContactError):
    """The eigensolver failed to converge or was given invalid parameters."""


class ContactConditionError(NodalContactError):
    """The induced 1-form vanishes somewhere (singular nodal set)."""
