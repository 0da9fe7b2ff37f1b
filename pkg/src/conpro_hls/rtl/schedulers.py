"""Access schedulers of shared objects: who may request what, and in which priority."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..sema.symbols import TypedModule

READ_OPS = {"read"}
# storage whose writes are serialized by the function lock instead of a scheduler
UNSCHEDULED_ROLES = ("arg", "ret", "exc")
ABSTRACT = ("semaphore", "mutex", "event", "barrier", "timer", "random", "queue", "channel",
            "process")


@dataclass
class SchedulerSpec:
    obj: str
    kind: str
    policy: str  # static | fifo
    accessors: list  # processes in declaration order
    ops: set = field(default_factory=set)


def policy_of(sym, overrides=None):
    pol = (overrides or {}).get(sym.name) or sym.params.get("scheduler") or sym.params.get("schedule")
    return "fifo" if pol == "fifo" else "static"


def build_schedulers(tm: TypedModule, overrides=None):
    """One spec per shared object that some process writes or operates on.

    Objects only ever read get none: concurrent reads need no arbitration.
    """
    out = []
    for name, sym in tm.symbols.items():
        if sym.kind in ("reg", "sig", "array", "var"):
            if sym.role in UNSCHEDULED_ROLES:
                continue
        elif sym.kind not in ABSTRACT:
            continue
        ops = tm.ops(name)
        if not ops or (ops <= READ_OPS and sym.kind not in ("queue", "channel", "random")):
            continue
        users = [p for p in tm.accessors(name)]
        if sym.kind in ("reg", "sig", "array", "var"):
            users = [p for p in users if tm.accesses[name][p] - READ_OPS]
        out.append(SchedulerSpec(name, sym.kind, policy_of(sym, overrides), users, set(ops)))
    return out
