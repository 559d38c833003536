"""
Errors - exception hierarchy shared by every shapecomp module
"""


class ShapeCompError(Exception):
    """Base class for all shapecomp failures."""


class InputError(ShapeCompError, ValueError):
    """Invalid arguments or data: off-grid masks, degenerate measures, bad files."""


class DictionaryError(InputError):
    """A dictionary document failed to parse or validate.

    ``messages`` holds one line-numbered message per problem found.
    """

    def __init__(self, messages: list[str]):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages) or "invalid dictionary")


class CompositionError(InputError):
    """A composition is redundant, non-basic, or has invalid index sets."""


class CertificationError(ShapeCompError):
    """A certificate precondition failed (in-band beta, singular system, search exhausted)."""


class SolverError(ShapeCompError):
    """An internal LP or solver step failed on input that should be valid."""
