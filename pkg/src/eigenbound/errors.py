"""Exception hierarchy shared by the solver modules."""


class DomainError(ValueError):
    """Argument outside the domain where a function is defined."""


class ValidationError(ValueError):
    """A model problem leaves the comparison regime.

    ``factor`` is the index of the offending weight factor, ``curvature`` its
    curvature parameter and ``location`` the first point where it vanishes.
    """

    def __init__(self, message, factor=None, curvature=None, location=None):
        super().__init__(message)
        self.factor = factor
        self.curvature = curvature
        self.location = location


class SolverError(RuntimeError):
    """Base class for numerical failures; carries a diagnostics dict."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class StepFailure(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class NoConvergence(SolverError):
    pass


class StabilityError(SolverError):
    pass
