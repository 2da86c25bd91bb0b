"""Exception types shared across the package."""


class NumericsError(RuntimeError):
    """A numerical condition that invalidates the requested computation.

    Raised for things like an aliasing-coarse signal grid, a rank-deficient
    design solved without regularization, or a phase integration that never
    finds a usable starting point.
    """


class ManifestError(ValueError):
    """A run description or input file is missing, malformed, or inconsistent."""
