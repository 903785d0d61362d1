from .compiled import GMIN, CompiledCircuit, compile_circuit
from .solve import (ConvergenceError, EngineError, SingularMatrixError,
                    TopologyError, solve_dense, solve_sparse)
from .dc import OperatingPoint, dc_operating_point
from .transient import (TransientError, WaveformSet, backend_name, transient)
from .ac import ACError, ACResult, ac_solve, ac_system, sin_source_phasor

__all__ = [
    "GMIN", "CompiledCircuit", "compile_circuit",
    "ConvergenceError", "EngineError", "SingularMatrixError", "TopologyError",
    "solve_dense", "solve_sparse",
    "OperatingPoint", "dc_operating_point",
    "TransientError", "WaveformSet", "backend_name", "transient",
    "ACError", "ACResult", "ac_solve", "ac_system", "sin_source_phasor",
]
