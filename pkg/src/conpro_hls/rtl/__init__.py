"""RTL model: FSM state lists, access schedulers and VHDL emission."""
from .naming import EntityView, Port, RtlError
from .schedulers import SchedulerSpec, build_schedulers
from .statelist import Branch, Data, Next, NextInstr, Select, StateEntry, build_state_list, successors
from .validate import ValidationError, validate_design, validate_text
from .vhdl import ProcessFsm, VhdlDesign, build_fsms, compile_design, emit_vhdl, entity_text, top_text

__all__ = [
    "Branch", "Data", "EntityView", "Next", "NextInstr", "Port", "ProcessFsm", "RtlError",
    "SchedulerSpec", "Select", "StateEntry", "ValidationError", "VhdlDesign", "build_fsms",
    "build_schedulers", "build_state_list", "compile_design", "emit_vhdl", "entity_text",
    "successors", "top_text", "validate_design", "validate_text",
]
