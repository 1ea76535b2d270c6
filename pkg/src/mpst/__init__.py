"""Session-typed core language: checker, interpreter, deadlock analysis."""

from .parser import ParseError, parse_expr, parse_program, parse_stype, parse_type
from .pretty import pretty
from .typecheck import TypeCheckError, typecheck_program

__all__ = [
    "ParseError",
    "TypeCheckError",
    "parse_expr",
    "parse_program",
    "parse_stype",
    "parse_type",
    "pretty",
    "typecheck_program",
]
