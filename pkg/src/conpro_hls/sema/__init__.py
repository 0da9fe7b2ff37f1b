"""Semantic analysis: symbols, types, normalization and constant folding."""
from .analyzer import analyze, collect_accesses
from .folding import fold_constants
from .symbols import ProcessInfo, Symbol, TypedModule
from .types import BOOL, CHAR, INT, LOGIC, DataType, T

__all__ = ["analyze", "collect_accesses", "fold_constants", "ProcessInfo", "Symbol",
           "TypedModule", "DataType", "T", "INT", "LOGIC", "BOOL", "CHAR"]
