"""Basic-block partitioning and dependency-level scheduling of microcode."""
from __future__ import annotations

from dataclasses import dataclass, field

from .mcode.instr import Instr, MProgram, groups, step_body
from .mcode.lower import normalize_end

ARITH = ("+", "-", "*", "/", "%")


@dataclass
class Node:
    """One schedulable unit: a data instruction or an existing data-only bind group."""
    instrs: list
    reads: set
    writes: set
    guarded: bool = False
    alu_ops: int = 0
    level: int = 1
    preds: list = field(default_factory=list)


@dataclass
class BasicBlock:
    nodes: list
    labels: list = field(default_factory=list)  # labels at the block entry


@dataclass
class Control:
    labels: list
    instrs: list  # one step, bind header included


class Classifier:
    """Which storage an instruction touches and whether it needs a guarded access."""

    def __init__(self, program: MProgram, ram=None):
        self.local = {d.name: d for d in program.data}
        self.imported = {d.name: d for d in program.imports}
        self.ram = ram or {}  # variable name -> RAM block

    def key(self, name):
        d = self.local.get(name) or self.imported.get(name)
        if d is not None and (d.kind == "variable" or (d.kind == "array" and d.detail == "variable")):
            return f"RAM:{self.ram.get(name, name)}"
        return name

    def guarded(self, ins: Instr):
        for op in _flat_operands(ins):
            if op.kind != "obj":
                continue
            d = self.imported.get(op.name) or self.local.get(op.name)
            if d is None:
                continue
            if d.kind in ("variable", "queue", "channel") or (
                    d.kind == "array" and d.detail == "variable"):
                return True
            if op.name in self.imported and d.kind in ("register", "array"):
                if ins.dst() is not None and ins.dst().name == op.name:
                    return True
        return False


def _flat_operands(ins):
    out = []
    for op in ins.operands():
        while op is not None:
            out.append(op)
            op = op.index
    return out


def _node(instrs, cls: Classifier):
    reads, writes = set(), set()
    guarded = False
    alu = 0
    for ins in instrs:
        if ins.op == "nop":
            continue
        internal = set()
        for k in ins.reads():
            if not k.startswith("$immed"):
                reads.add(cls.key(k))
        for k in ins.writes():
            if k.startswith("$immed"):
                internal.add(k)
            else:
                writes.add(cls.key(k))
        guarded = guarded or cls.guarded(ins)
        if ins.op == "expr" and len(ins.args) == 4 and ins.args[2] in ARITH:
            alu += 1
    return Node(list(instrs), reads, writes, guarded, alu)


def _is_data_step(instrs):
    return bool(instrs) and all(i.op in ("move", "expr", "nop", "bind") for i in instrs)


def partition(program: MProgram, ram=None):
    """Split code into basic blocks of data steps and pass-through control steps.

    Returns a list of BasicBlock and Control items in program order.
    """
    cls = Classifier(program, ram)
    # only jump targets end a block; other labels merely name steps
    targets = {i.target for i in program.code if i.target is not None}
    out = []
    cur = None
    for labels, instrs in groups(program.code):
        if cur is not None and any(lb in targets for lb in labels):
            out.append(cur)
            cur = None
        if _is_data_step(instrs):
            body = [i for i in step_body(instrs)]
            if cur is None:
                cur = BasicBlock([], list(labels))
            cur.nodes.append(_node(body, cls))
            continue
        if cur is not None:
            out.append(cur)
            cur = None
        out.append(Control(list(labels), list(instrs)))
    if cur is not None:
        out.append(cur)
    return out


def build_ddg(block: BasicBlock):
    """Dependency edges (RAW, WAR, WAW) between earlier and later nodes; sets levels."""
    edges = []
    for j, v in enumerate(block.nodes):
        v.preds = []
        for i in range(j):
            u = block.nodes[i]
            if (u.writes & v.reads) or (u.reads & v.writes) or (u.writes & v.writes):
                v.preds.append(i)
                edges.append((i, j))
        v.level = 1 + max((block.nodes[i].level for i in v.preds), default=0)
    return edges


def schedule_block(block: BasicBlock, c=None, alu=None):
    """Regroup one block by ascending level; returns a list of node groups."""
    build_ddg(block)
    out = []
    for level in sorted({n.level for n in block.nodes}):
        members = [n for n in block.nodes if n.level == level]
        plain = [n for n in members if not n.guarded and not _touches_ram(n)]
        single = [n for n in members if n.guarded or _touches_ram(n)]
        cur, ops = [], 0
        for n in plain:
            full = c is not None and len(cur) >= c
            over = alu is not None and cur and ops + n.alu_ops > alu
            if cur and (full or over):
                out.append(cur)
                cur, ops = [], 0
            cur.append(n)
            ops += n.alu_ops
        if cur:
            out.append(cur)
        out.extend([n] for n in single)
    return out


def _touches_ram(n):
    return any(k.startswith("RAM:") for k in n.reads | n.writes)


def _emit_group(group):
    instrs = [i for n in group for i in n.instrs]
    if len(instrs) > 1:
        return [Instr("bind", (len(instrs),))] + instrs
    return instrs


def schedule(blocks, c=None, program: MProgram | None = None, alu=None) -> MProgram:
    """Re-emit partitioned code with bind groups of independent data steps.

    c caps the number of steps merged into one group (None = unlimited); alu caps
    the arithmetic operations per group for the shared-ALU model.
    """
    code = []
    for item in blocks:
        for lb in item.labels:
            code.append(Instr("label", (lb,)))
        if isinstance(item, Control):
            code.extend(item.instrs)
            continue
        for group in schedule_block(item, c, alu):
            code.extend(_emit_group(group))
    normalize_end(code)
    if program is None:
        return MProgram("block", [], [], code)
    return MProgram(program.name, list(program.imports), list(program.data), code)


def optimize(program: MProgram, c=None, ram=None, alu=None) -> MProgram:
    return schedule(partition(program, ram), c, program, alu)


def ddg_dot(program: MProgram, ram=None):
    """The dependency graphs of all basic blocks as one DOT digraph."""
    from .mcode.asmtext import instr_text
    lines = [f'digraph "{program.name}" {{', "  node [shape=box];"]
    bno = 0
    for item in partition(program, ram):
        if not isinstance(item, BasicBlock):
            continue
        bno += 1
        edges = build_ddg(item)
        lines.append(f"  subgraph cluster_b{bno} {{")
        lines.append(f'    label="block {bno}";')
        for k, n in enumerate(item.nodes):
            text = "\\n".join(instr_text(i).replace('"', '\\"') for i in n.instrs)
            lines.append(f'    b{bno}n{k} [label="L{n.level}: {text}"];')
        lines.append("  }")
        for i, j in edges:
            lines.append(f"  b{bno}n{i} -> b{bno}n{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"
