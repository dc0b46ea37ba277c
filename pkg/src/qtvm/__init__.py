"""QtVM: a quantum virtual machine with a QtASM assembly front end.

State-vector execution engine, assembly compiler with macro preprocessor and
peephole optimizer, sector-paged memory backend, probability-tree debugger,
circuit generators, and quench analytics, all behind one ``qtvm`` CLI.
"""

from .errors import (
    CapacityError,
    CompileError,
    ExecutionError,
    MeasurementError,
    NoDqptError,
    QtvmError,
)
from .isa import Instruction, Program
from .compiler import compile_file, compile_source, emit, optimize, parse, preprocess
from .statevector import StateVector, dump_state, init_state, load_state
from .vm import Histogram, Machine, ShotResult, Snapshot, run_shot, run_shots

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "CompileError",
    "ExecutionError",
    "Histogram",
    "Instruction",
    "Machine",
    "MeasurementError",
    "NoDqptError",
    "Program",
    "QtvmError",
    "ShotResult",
    "Snapshot",
    "StateVector",
    "__version__",
    "compile_file",
    "compile_source",
    "dump_state",
    "emit",
    "init_state",
    "load_state",
    "optimize",
    "parse",
    "preprocess",
    "run_shot",
    "run_shots",
]
