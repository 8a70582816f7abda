"""Smooth functions: expression language, truncated Taylor jets, smooth maps."""

from .errors import (
    ArityError,
    DomainError,
    ExprError,
    ExprSyntaxError,
    ParseError,
    UnknownIdentifier,
)
from .expr import (
    Binary,
    Const,
    Num,
    Unary,
    Var,
    compile_node,
    default_variables,
    evaluate,
    parse_expression,
    to_source,
)
from .jet import Jet, JetBasis, get_basis
from .maps import (
    ConstantMap,
    DerivedMap,
    ExprMap,
    FuncMap,
    IdentityMap,
    SmoothMap,
    compose,
    eval_jet,
    fd_oracle_check,
    substitute,
)

# Order <= 2 jets are what most callers want; keep the familiar name.
JetScalar = Jet

__all__ = [
    "ArityError", "Binary", "Const", "ConstantMap", "DerivedMap", "DomainError",
    "ExprError", "ExprMap", "ExprSyntaxError", "FuncMap", "IdentityMap", "Jet",
    "JetBasis", "JetScalar", "Num", "ParseError", "SmoothMap", "Unary",
    "UnknownIdentifier", "Var", "compile_node", "compose", "default_variables",
    "eval_jet", "evaluate", "fd_oracle_check", "get_basis", "parse_expression",
    "substitute", "to_source",
]
