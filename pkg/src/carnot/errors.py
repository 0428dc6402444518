"""Shared exception types."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NotFoundError(KeyError):
    """A lookup referenced an id that does not exist."""
