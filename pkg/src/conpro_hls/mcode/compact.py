"""State compaction: nop removal, label-chain merging and dead code after jumps."""
from __future__ import annotations

from .instr import END, Instr, MProgram, groups
from .lower import normalize_end


def _unconditional(instrs):
    return bool(instrs) and instrs[-1].op == "jump"


def compact(program: MProgram) -> MProgram:
    """Return a compacted copy; the input program is not modified.

    Nops inside bind groups stay, they keep the group's width as printed.
    """
    steps = []
    skipping = False
    for labels, instrs in groups(program.code):
        if labels:
            skipping = False
        if skipping:
            continue
        if len(instrs) == 1 and instrs[0].op == "nop":
            instrs = []
        steps.append((list(labels), list(instrs)))
        if _unconditional(instrs):
            skipping = True

    # merge adjacent labels, keeping the last one of each chain
    rename = {}
    code = []
    pending = []
    for labels, instrs in steps:
        pending.extend(labels)
        if instrs:
            code.extend(_emit_labels(pending, rename))
            pending = []
            code.extend(instrs)
    code.extend(_emit_labels(pending, rename))

    def target(t):
        while t in rename:
            t = rename[t]
        return t

    out = []
    for ins in code:
        t = ins.target
        if t is not None and t != END:
            ins = Instr(ins.op, ins.args[:-1] + (target(t),))
        out.append(ins)
    normalize_end(out)
    return MProgram(program.name, list(program.imports), list(program.data), out)


def _emit_labels(labels, rename):
    if not labels:
        return []
    keep = labels[-1]
    for lb in labels[:-1]:
        rename[lb] = keep
    return [Instr("label", (keep,))]
