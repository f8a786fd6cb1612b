"""Exception types raised by the link simulator."""


class AliasingError(ValueError):
    """A resampling step would fold signal content above the new Nyquist rate."""


class SyncError(RuntimeError):
    """The synchronization preamble could not be located reliably."""


class DivergenceError(ArithmeticError):
    """An adaptive filter produced non-finite values."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
