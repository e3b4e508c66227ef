"""Exception types shared across the package."""


class DimensionError(ValueError):
    """An array does not match the length of the spectral basis."""


class DegenerateStateError(ValueError):
    """The accumulated statistic has no identified components."""
