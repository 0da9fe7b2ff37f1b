"""Compilation pipeline shared by the command line, the demos and the tests."""
from __future__ import annotations

from dataclasses import dataclass, field

from . import bbsched, rsopt
from .frontend import parse_source
from .mcode import compact, lower_module, parse_alu
from .sema import analyze, fold_constants


@dataclass
class Options:
    rs: bool = False  # reference-stack optimization of process bodies
    bb: bool = False  # basic-block scheduling of the microcode
    fold: bool = True
    alu: str = "flat"
    max_par: int | None = None  # cap on steps merged into one group by bb
    bind_source: str = "explicit"  # "none" lowers bound blocks one statement per step
    compact: bool = True
    observe: object = None  # objects whose final values must survive folding


@dataclass
class Compiled:
    tm: object
    programs: dict
    rs_dump: list = field(default_factory=list)


def ram_map(tm):
    """Variable name -> RAM block, for every RAM-resident object."""
    out = {}
    syms = list(tm.symbols.values())
    for p in tm.processes:
        syms.extend(p.locals.values())
    for s in syms:
        if s.in_ram:
            out[s.name] = s.block
    return out


def analyze_source(text, filename="<input>", options: Options | None = None):
    options = options or Options()
    tm = analyze(parse_source(text, filename))
    if options.fold:
        tm = fold_constants(tm, options.observe)
    return tm


def compile_typed(tm, options: Options | None = None) -> Compiled:
    options = options or Options()
    dump = []
    if options.rs:
        rsopt.optimize_module(tm, dump)
    programs = lower_module(tm, options.alu, options.bind_source)
    if options.compact:
        programs = {k: compact(p) for k, p in programs.items()}
    if options.bb:
        model, k = parse_alu(options.alu)
        cap = k if model == "shared" else None
        ram = ram_map(tm)
        programs = {n: bbsched.optimize(p, options.max_par, ram, cap) for n, p in programs.items()}
    return Compiled(tm, programs, dump)


def compile_source(text, filename="<input>", options: Options | None = None) -> Compiled:
    return compile_typed(analyze_source(text, filename, options), options)
