"""Lexing, parsing and pretty printing of ConPro-style source text."""
from . import ast
from .lexer import Token, tokenize, untokenize
from .parser import ParseError, parse_module, parse_source
from .printer import expr_str, print_module, print_stmts

__all__ = ["ast", "Token", "tokenize", "untokenize", "ParseError", "parse_module",
           "parse_source", "print_module", "print_stmts", "expr_str"]
