"""Simulation: the cycle-level machine and the sequential reference interpreter."""
from .interp import InterpError, RandomSource, Store, interpret_ast, random_sources
from .machine import (DeadlockReport, RunResult, SimLoadError, SimSystem, TraceEvent,
                      load_system, run, step_cycle, write_trace)

__all__ = ["InterpError", "RandomSource", "Store", "interpret_ast", "random_sources",
           "DeadlockReport", "RunResult", "SimLoadError", "SimSystem", "TraceEvent",
           "load_system", "run", "step_cycle", "write_trace"]
