"""Command-line driver: parse, analyze, optimize, lower, then emit or simulate."""
from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import dataclass, field

from .diagnostics import CompileError, InternalError, use_color
from .mcode.asmtext import emit_text
from .mcode.instr import step_count
from .mcode.lower import parse_alu
from .pipeline import Options, analyze_source, compile_typed
from .sim import SimLoadError

EXIT_OK = 0
EXIT_DIAGNOSTICS = 1
EXIT_IO = 2
EXIT_INTERNAL = 3
EXIT_DEADLOCK = 4
EXIT_CYCLE_LIMIT = 5
SIM_EXIT = {"all-ended": EXIT_OK, "deadlock": EXIT_DEADLOCK, "cycle-limit": EXIT_CYCLE_LIMIT}

EMIT_TARGETS = ("ast", "mcode", "rtl", "vhdl")
_INCLUDE = re.compile(r'^\s*include\s+"?([^";\s]+)"?\s*;\s*$', re.M)


@dataclass
class DriverConfig:
    inputs: list
    emit: set = field(default_factory=set)
    rs: bool = False
    bb: bool = False
    fold: bool = True
    alu: str = "flat"
    max_par: int | None = None
    dump: set = field(default_factory=set)
    sim: bool = False
    cycles: int = 100_000
    trace: str | None = None
    watch: list = field(default_factory=list)
    out_dir: str = "."
    schedulers: dict = field(default_factory=dict)
    randoms: dict = field(default_factory=dict)
    verbose: int = 0

    def options(self):
        return Options(rs=self.rs, bb=self.bb, fold=self.fold, alu=self.alu, max_par=self.max_par,
                       observe=self.watch or None)


def read_with_includes(path, seen=None):
    """Source text with every `include "file";` line replaced by that file's text."""
    seen = set() if seen is None else seen
    real = os.path.realpath(path)
    if real in seen:
        raise OSError(f"recursive include of {path}")
    seen.add(real)
    with open(path) as f:
        text = f.read()
    base = os.path.dirname(path)

    def inline(m):
        name = m.group(1)
        if not os.path.splitext(name)[1]:
            name += ".cp"
        return read_with_includes(os.path.join(base, name), seen)

    out = _INCLUDE.sub(inline, text)
    seen.discard(real)
    return out


def _pairs(items, what):
    out = {}
    for item in items:
        for part in item.split(","):
            if "=" not in part:
                raise SystemExit(f"hls: bad {what} '{part}', expected NAME=VALUE")
            k, v = part.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def _randoms(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise SystemExit(f"hls: bad --random '{item}', expected NAME=v1,v2,...")
        k, v = item.split("=", 1)
        out[k.strip()] = [int(x, 0) for x in v.split(",") if x.strip()]
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="hls", description=__doc__)
    ap.add_argument("inputs", nargs="+", metavar="FILE.cp")
    ap.add_argument("--emit", action="append", default=[],
                    help="comma list of ast, mcode, rtl, vhdl")
    ap.add_argument("--opt", action="append", default=[], help="comma list of rs, bb")
    ap.add_argument("--no-fold", action="store_true", help="disable constant folding")
    ap.add_argument("--alu", default="flat", help="flat or shared:K")
    ap.add_argument("--max-par", type=int, default=None)
    ap.add_argument("--dump", action="append", default=[], help="comma list of rs, ddg")
    ap.add_argument("--sim", action="store_true")
    ap.add_argument("--cycles", type=int, default=100_000)
    ap.add_argument("--trace", metavar="FILE")
    ap.add_argument("--watch", default="", help="comma list of objects to print after --sim")
    ap.add_argument("-o", "--out", default=".", metavar="DIR")
    ap.add_argument("--scheduler", action="append", default=[], metavar="OBJ=static|fifo")
    ap.add_argument("--random", action="append", default=[], metavar="NAME=v1,v2,...",
                    help="replace a random source by a fixed cyclic sequence (--sim only)")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def _split(values):
    return {v.strip() for item in values for v in item.split(",") if v.strip()}


def parse_args(argv) -> DriverConfig:
    ap = build_parser()
    a = ap.parse_args(argv)
    emit = _split(a.emit)
    opts = _split(a.opt)
    dump = _split(a.dump)
    bad = (emit - set(EMIT_TARGETS)) | (opts - {"rs", "bb"}) | (dump - {"rs", "ddg"})
    if bad:
        ap.error(f"unknown value(s): {', '.join(sorted(bad))}")
    if not emit and not a.sim:
        ap.error("nothing to do: give --emit and/or --sim")
    sched = _pairs(a.scheduler, "--scheduler")
    if any(v not in ("static", "fifo") for v in sched.values()):
        ap.error("scheduler policy must be static or fifo")
    if a.cycles < 1:
        ap.error("--cycles must be at least 1")
    try:
        parse_alu(a.alu)
    except ValueError as e:
        ap.error(str(e))
    return DriverConfig(
        inputs=a.inputs, emit=emit, rs="rs" in opts or "rs" in dump, bb="bb" in opts,
        fold=not a.no_fold, alu=a.alu,
        max_par=a.max_par, dump=dump, sim=a.sim, cycles=a.cycles, trace=a.trace,
        watch=[w for w in a.watch.split(",") if w], out_dir=a.out, schedulers=sched,
        randoms=_randoms(a.random), verbose=a.verbose)


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def _module_name(path):
    return os.path.splitext(os.path.basename(path))[0]


def run_file(path, cfg: DriverConfig, out=None):
    """Run the requested stages on one source file; returns the sim outcome or None."""
    from .frontend import parse_source, print_module

    out = out or sys.stdout
    text = read_with_includes(path)
    mod = _module_name(path)
    if "ast" in cfg.emit:
        _write(os.path.join(cfg.out_dir, f"{mod}.ast"), print_module(parse_source(text, path)))
    tm = analyze_source(text, path, cfg.options())
    compiled = compile_typed(tm, cfg.options())
    programs = compiled.programs
    if "rs" in cfg.dump:
        _write(os.path.join(cfg.out_dir, f"{mod}.rs.txt"), "\n".join(compiled.rs_dump) + "\n")
    if "ddg" in cfg.dump:
        from .bbsched import ddg_dot
        from .pipeline import ram_map
        for name, p in programs.items():
            _write(os.path.join(cfg.out_dir, f"{mod}_{name}.dot"), ddg_dot(p, ram_map(tm)))
    if "mcode" in cfg.emit:
        for name, p in programs.items():
            _write(os.path.join(cfg.out_dir, f"{mod}_{name}.uc"), emit_text(p))
    states = {}
    if cfg.emit & {"rtl", "vhdl"}:
        from .rtl import build_fsms, build_schedulers, emit_vhdl, validate_design
        fsms = build_fsms(programs, tm, mod)
        states = {n: len(f.states) for n, f in fsms.items()}
        if "rtl" in cfg.emit:
            for name, f in fsms.items():
                _write(os.path.join(cfg.out_dir, f"{mod}_{name}.rtl"), f.listing())
        if "vhdl" in cfg.emit:
            design = emit_vhdl(fsms, build_schedulers(tm, cfg.schedulers), tm, mod)
            validate_design(design)
            design.write(cfg.out_dir)
    result = None
    if cfg.sim:
        from .sim import load_system, run, write_trace
        system = load_system(tm, programs, {"schedulers": cfg.schedulers, "random": cfg.randoms,
                                            "trace": True})
        result = run(system, cfg.cycles)
        if cfg.trace:
            write_trace(result.trace, cfg.trace)
    ends = {}
    if result is not None:
        for e in result.trace:
            if e.kind == "end":
                ends[e.process] = e.cycle
    for name, p in programs.items():
        parts = [f"{mod}.{name}:", f"{step_count(p.code) + 2} states" if not states
                 else f"{states[name]} states", f"{len(p.code)} instructions"]
        if result is not None:
            parts.append(f"ended at cycle {ends[name]}" if name in ends else "not ended")
        print(" ".join(parts), file=out)
    if result is not None:
        print(f"{mod}: simulation {result.termination} after {result.cycles} cycles", file=out)
        if result.deadlock is not None:
            for line in str(result.deadlock).splitlines():
                print(f"  {line}", file=out)
        for w in cfg.watch:
            keys = [w] if w in result.stores else [k for k in result.stores if k.endswith("." + w)]
            for k in keys or [w]:
                print(f"  {k} = {result.stores.get(k, '<unknown>')}", file=out)
        return result.termination
    return None


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_args(argv)
    except SystemExit as e:
        if isinstance(e.code, str):
            print(e.code, file=sys.stderr)
            return EXIT_DIAGNOSTICS
        return e.code if isinstance(e.code, int) else EXIT_DIAGNOSTICS
    status = EXIT_OK
    color = use_color()
    for path in cfg.inputs:
        try:
            term = run_file(path, cfg)
        except CompileError as e:
            for d in e.diagnostics:
                print(d.format(color), file=sys.stderr)
            return EXIT_DIAGNOSTICS
        except SimLoadError as e:
            print(f"{path}: error: {e}", file=sys.stderr)
            return EXIT_DIAGNOSTICS
        except OSError as e:
            print(f"hls: {e}", file=sys.stderr)
            return EXIT_IO
        except InternalError as e:
            print(f"hls: internal error: {e}", file=sys.stderr)
            return EXIT_INTERNAL
        except Exception as e:  # any other failure is a compiler bug
            print(f"hls: internal error: {type(e).__name__}: {e}", file=sys.stderr)
            if cfg.verbose:
                raise
            return EXIT_INTERNAL
        if term is not None and SIM_EXIT[term] != EXIT_OK:
            status = max(status, SIM_EXIT[term])
    return status


if __name__ == "__main__":
    sys.exit(main())
