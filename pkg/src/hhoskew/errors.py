"""Exception types shared across the package."""


class HHOError(Exception):
    """Base class for all package-specific errors."""


class MeshFormatError(HHOError):
    """A mesh file could not be parsed under the requested format."""


class MeshValidationError(HHOError):
    """A mesh violates a structural or geometric invariant."""


class ConfigError(HHOError):
    """A case configuration is inconsistent or incomplete."""


class SolverError(HHOError):
    """Linear algebra failure: non-SPD system, factorization or CG breakdown."""
