"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid run configuration, geometry or boundary specification."""


class ContractError(ValueError):
    """An input violated a documented precondition (e.g. non-symmetric strain)."""


class SolverError(RuntimeError):
    """Numerical failure: NaN residual, zero Jacobi diagonal, unbracketed root."""
