"""Small-signal AC analysis about a DC operating point."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ..netlist import Circuit
from .compiled import CompiledCircuit, compile_circuit
from .dc import OperatingPoint, assemble_dc
from .solve import EngineError, SingularMatrixError, solve_dense


class ACError(EngineError):
    pass


@dataclass
class ACResult:
    freqs: np.ndarray
    signals: dict[str, np.ndarray]    # complex phasors, x(t) = Re{X e^{jwt}}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.signals[name]


def ac_system(cc: CompiledCircuit, op: OperatingPoint, omega: float,
              zero_sources: bool = False,
              open_branches: frozenset | set = frozenset()):
    """Complex MNA matrix and excitation at a single angular frequency.

    The real part is the exact DC Jacobian at the operating point, so
    every nonlinear device appears through its analytic gm/gds (and the
    polynomial element through its local slope). `open_branches` forces
    the named branch currents to zero, which removes a voltage source
    from the small-signal network without touching the bias solution.
    """
    J, _ = assemble_dc(cc, op.x)
    A = J.astype(complex)

    for k in range(len(cc.cap_p)):
        y = 1j * omega * cc.cap_c[k]
        p, m = cc.cap_p[k], cc.cap_m[k]
        if p >= 0:
            A[p, p] += y
        if m >= 0:
            A[m, m] += y
        if p >= 0 and m >= 0:
            A[p, m] -= y
            A[m, p] -= y
    for k in range(len(cc.ind_br)):
        A[cc.ind_br[k], cc.ind_br[k]] -= 1j * omega * cc.ind_l[k]

    b = np.zeros(cc.n, dtype=complex)
    if not zero_sources:
        for k in range(len(cc.vs_br)):
            mag, phase = cc.vs_ac[k]
            b[cc.vs_br[k]] = mag * cmath.exp(1j * math.radians(phase))
        for k in range(len(cc.is_p)):
            mag, phase = cc.is_ac[k]
            cur = mag * cmath.exp(1j * math.radians(phase))
            if cc.is_p[k] >= 0:
                b[cc.is_p[k]] -= cur
            if cc.is_m[k] >= 0:
                b[cc.is_m[k]] += cur

    for name in open_branches:
        br = cc.branch_unknown(name)
        A[br, :] = 0.0
        A[br, br] = 1.0
        b[br] = 0.0
    return A, b


def ac_solve(circuit: Circuit | CompiledCircuit, op: OperatingPoint,
             freqs) -> ACResult:
    """One complex solve per frequency; excitation from netlist AC params."""
    cc = circuit if isinstance(circuit, CompiledCircuit) else \
        compile_circuit(circuit)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    if np.any(freqs <= 0):
        raise ACError("AC frequencies must be > 0")
    sol = np.empty((len(freqs), cc.n), dtype=complex)
    for i, f in enumerate(freqs):
        A, b = ac_system(cc, op, 2.0 * math.pi * f)
        try:
            sol[i] = solve_dense(A, b)
        except SingularMatrixError as exc:
            raise ACError(f"singular AC system at f = {f:.6e} Hz "
                          f"(unknown {exc.unknown_index})") from exc
    signals = {name: sol[:, j].copy()
               for j, name in enumerate(cc.unknown_names())}
    return ACResult(freqs=freqs, signals=signals)


def sin_source_phasor(amp: float, phase_deg: float = 0.0) -> complex:
    """Phasor of amp*sin(wt + phase) in the Re{X e^{jwt}} convention."""
    return amp * cmath.exp(1j * (math.radians(phase_deg) - math.pi / 2.0))
