"""Run-time state of shared objects and their access arbiters."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field


@dataclass
class Semaphore:
    count: int = 0
    depth: int = 8

    def available(self, op):
        if op == "down":
            return self.count > 0
        if op == "up":
            return self.count < self.depth
        return True

    def apply(self, op, args):
        if op == "down":
            self.count -= 1
        elif op == "up":
            self.count += 1
        elif op == "init":
            self.count = max(0, min(args[0] if args else 0, self.depth))


@dataclass
class Mutex:
    owner: str | None = None

    def available(self, op, who=None):
        return op != "lock" or self.owner is None

    def apply(self, op, who):
        if op == "lock":
            self.owner = who
        elif op == "unlock" and self.owner == who:
            self.owner = None
        elif op == "init":
            self.owner = None


@dataclass
class Event:
    latch: bool = False
    latched: bool = False
    waiters: list = field(default_factory=list)


@dataclass
class Barrier:
    n: int = 1
    waiters: list = field(default_factory=list)


@dataclass
class Timer:
    interval: int = 0
    mode: int = 0  # 0 periodic, 1 one-shot
    running: bool = False
    next_fire: int | None = None
    waiters: list = field(default_factory=list)

    def start(self, now):
        self.running = self.interval > 0
        self.next_fire = now + self.interval if self.running else None

    def stop(self):
        self.running = False
        self.next_fire = None

    def tick(self, now):
        """True when the timer fires at cycle now."""
        if not self.running or self.next_fire != now:
            return False
        if self.mode == 0:
            self.next_fire = now + self.interval
        else:
            self.stop()
        return True


@dataclass
class Fifo:
    """Queue, or a buffered channel (depth 1)."""
    depth: int = 8
    items: deque = field(default_factory=deque)

    def available(self, op):
        if op == "read":
            return len(self.items) > 0
        if op == "write":
            return len(self.items) < self.depth
        return True


@dataclass
class Rendezvous:
    """Unbuffered channel: a writer and a reader meet in the same cycle."""
    transfer: object = None


@dataclass
class Arbiter:
    """Grant bookkeeping of one guarded object.

    static: the request of the earliest declared process wins. fifo: the oldest
    request wins; requests are remembered in arrival order.
    """
    policy: str = "static"
    queue: list = field(default_factory=list)  # fifo arrival order of waiting processes

    def enqueue(self, who):
        if who not in self.queue:
            self.queue.append(who)

    def drop(self, who):
        if who in self.queue:
            self.queue.remove(who)
