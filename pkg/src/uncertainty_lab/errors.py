"""Exception types raised across the package."""


class AliasingError(ValueError):
    """A frequency cannot be represented on the sampling grid without aliasing."""


class ContainmentError(ValueError):
    """A ball of an equidistributed sequence leaves its lattice cell."""

    def __init__(self, index, message=None):
        self.index = tuple(index)
        super().__init__(message or f"ball at lattice index {self.index} leaves its cell")


class SeparationError(ValueError):
    """Frequency boxes are not separated enough for the spectral decomposition."""


class ConfigError(ValueError):
    """Invalid experiment configuration; `path` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")
