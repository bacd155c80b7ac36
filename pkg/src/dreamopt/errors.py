"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and the process exit
status the command-line front end uses for it.
"""


class DreamError(Exception):
    code = "error"
    exit_status = 1


class InvalidParameterError(DreamError, ValueError):
    code = "invalid-parameter"
    exit_status = 4


class ConstructionError(DreamError):
    """A mixing matrix failed validation after it was built."""

    code = "construction-failure"
    exit_status = 4

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DegenerateTopologyError(DreamError):
    code = "degenerate-topology"
    exit_status = 4


class DimensionError(DreamError, ValueError):
    code = "dimension"
    exit_status = 4


class ModeError(DreamError):
    """Operation not available for an online (unbounded-sample) problem."""

    code = "mode"
    exit_status = 4


class ParseError(DreamError, ValueError):
    code = "parse-error"
    exit_status = 3

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class ConvergenceError(DreamError):
    """Inner maximization did not reach its tolerance within the cap."""

    code = "diagnostics"
    exit_status = 6

    def __init__(self, message, residual):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


class DivergenceError(DreamError):
    code = "divergence"
    exit_status = 5

    def __init__(self, iteration, history=None, where="state"):
        super().__init__(f"non-finite {where} at iteration {iteration}")
        self.iteration = iteration
        self.history = list(history) if history is not None else []
