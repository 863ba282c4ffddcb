"""Exception types shared across the package."""


class ModelFormatError(ValueError):
    """The portable model file violates the schema or an invariant."""


class TreeStructureError(ValueError):
    """A tree or node reference is structurally invalid."""


class NumericFailure(RuntimeError):
    """A numeric computation produced non-finite values or lost definiteness."""
