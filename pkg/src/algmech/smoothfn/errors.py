"""Error types shared by the expression language and the jet arithmetic."""


class ExprError(Exception):
    """Base class for expression-language failures."""


class ParseError(ExprError):
    """Malformed source text.  ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)


class ExprSyntaxError(ParseError):
    pass


class UnknownIdentifier(ParseError):
    pass


class ArityError(ParseError):
    pass


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message: str, node=None):
        self.node = node
        if node is not None:
            from .expr import to_source

            message = f"{message} in '{to_source(node)}'"
        super().__init__(message)
