"""Exception types raised by the library."""


class ConfigurationError(ValueError):
    """Invalid user-facing configuration (domain tag, level, degree...)."""


class AssemblyError(RuntimeError):
    """A discrete operator came out malformed, usually a basis bug."""


class SetupError(RuntimeError):
    """Multigrid setup failed, e.g. the spectral radius estimate did not settle."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConvergenceError(RuntimeError):
    """An iteration did not reach its target; carries the history."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])
