"""rtlfsim: batch RTL stuck-at fault simulator.

An event-driven logic simulation kernel for a synthesizable Verilog subset,
extended with concurrent batch fault simulation (shared good machine, sparse
per-net divergence store, per-fault behavioral instances) and a serial
single-fault mode that serves as the correctness oracle and performance
baseline.
"""

from .ast_nodes import Ast, dump
from .elaborate import Design, elaborate, list_wires
from .engine import (
    DEFAULT_W,
    allocate_bad_gates,
    classify_pair,
    run_batch,
    run_concurrent,
    run_good_only,
    run_serial,
)
from .errors import (
    ConfigError,
    DeltaLimitError,
    ElabError,
    KernelInvariantError,
    ParseError,
    SimulationError,
    SourceError,
    UnsupportedConstructError,
)
from .faults import (
    SA0,
    SA1,
    Fault,
    FaultBatch,
    filter_through_fault,
    generate_fault_list,
    load_fault_list,
    parse_fault_list,
)
from .kernel import SimTrace, Simulation, run
from .logic import (
    LogicBit,
    LogicError,
    LogicVector,
    PrimitiveKind,
    eval_primitive,
    resolve_drivers,
    result_width,
)
from .parser import SourceUnit, parse, parse_files
from .report import DetectionReport, FaultRecord
from .stimulus import StimulusProgram, load_stimulus, parse_stimulus

__version__ = "0.1.0"

__all__ = [
    "Ast", "ConfigError", "DEFAULT_W", "DeltaLimitError", "Design",
    "DetectionReport", "ElabError", "Fault", "FaultBatch", "FaultRecord",
    "KernelInvariantError", "LogicBit", "LogicError", "LogicVector",
    "ParseError", "PrimitiveKind", "SA0", "SA1", "SimTrace", "Simulation",
    "SimulationError", "SourceError", "SourceUnit", "StimulusProgram",
    "UnsupportedConstructError", "allocate_bad_gates", "classify_pair",
    "dump", "elaborate", "eval_primitive", "filter_through_fault",
    "generate_fault_list", "list_wires", "load_fault_list", "load_stimulus",
    "parse", "parse_fault_list", "parse_files", "parse_stimulus",
    "resolve_drivers", "result_width", "run", "run_batch", "run_concurrent",
    "run_good_only", "run_serial",
]
