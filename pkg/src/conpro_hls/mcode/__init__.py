"""Microcode: lowering, compaction and the assembler text format."""
from .asmtext import MCodeSyntaxError, emit_text, parse_text
from .compact import compact
from .instr import END, Decl, Instr, MProgram, Operand, check_program, groups, step_count
from .lower import FLAT, lower_module, lower_process, parse_alu

__all__ = ["MCodeSyntaxError", "emit_text", "parse_text", "compact", "END", "Decl", "Instr",
           "MProgram", "Operand", "check_program", "groups", "step_count", "FLAT",
           "lower_module", "lower_process", "parse_alu"]
