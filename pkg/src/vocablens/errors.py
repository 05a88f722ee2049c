class ValidationError(ValueError):
    """Input violates a documented invariant (bad shapes, ids, flags, formats)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite intermediates."""
