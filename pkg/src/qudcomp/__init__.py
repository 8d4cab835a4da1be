"""Qudit circuit compiler: circuit IR, CSD and Solovay-Kitaev synthesis, retargeting, simulation."""

from .config import Tolerances, get_tolerances
from .errors import (
    BranchCutError,
    DimensionError,
    LinearityError,
    MeasuredQuditError,
    NotUnitaryError,
    NumericalError,
    QudcompError,
    SchemaError,
    SizeGuardError,
    SKConvergenceError,
)
from .gates import GateKind, GateRef
from .ir import Builder, Circuit, Measurement, Operation, builder_new, to_dag
from .linalg import dist, random_unitary
from .pipeline import CompileOptions, CompileReport, compile_circuit, compile_unitary, hybrid_compile, retarget_circuit
from .sim import contract_to_unitary, run_statevector, sample

__version__ = "0.1.0"

__all__ = [
    "Tolerances", "get_tolerances",
    "BranchCutError", "DimensionError", "LinearityError", "MeasuredQuditError", "NotUnitaryError",
    "NumericalError", "QudcompError", "SchemaError", "SizeGuardError", "SKConvergenceError",
    "GateKind", "GateRef",
    "Builder", "Circuit", "Measurement", "Operation", "builder_new", "to_dag",
    "dist", "random_unitary",
    "CompileOptions", "CompileReport", "compile_circuit", "compile_unitary", "hybrid_compile", "retarget_circuit",
    "contract_to_unitary", "run_statevector", "sample",
]
