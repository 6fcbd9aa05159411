"""Exception types. All derive from ``EnvkitError`` (a ``ValueError``)."""


class EnvkitError(ValueError):
    """Base class for every validation or contract failure raised by envkit."""


class SchemaError(EnvkitError):
    pass


class GridError(EnvkitError):
    pass


class GridOverflowError(GridError):
    pass


class NonFiniteValueError(EnvkitError):
    pass


class DomainError(EnvkitError):
    pass


class CatalogError(EnvkitError):
    pass


class NonUniformAxisError(EnvkitError):
    """Raised by the separable kernel on an axis without constant spacing.

    Callers are expected to catch it and fall back to the naive path.
    """


class SandwichError(EnvkitError):
    pass
