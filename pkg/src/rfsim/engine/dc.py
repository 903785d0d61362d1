"""DC operating point: damped Newton with Gmin and source-stepping ladders."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import devices
from ..netlist import Circuit
from .compiled import CompiledCircuit, compile_circuit, dc_value
from .stamps import stamp_nonlinear
from .solve import ConvergenceError, SingularMatrixError, TopologyError, solve_dense

ABSTOL = 1e-9     # A, residual infinity norm
VNTOL = 1e-6      # V, Newton update infinity norm
MAX_ITER = 200
MAX_DAMPING = 8

GMIN_LADDER = [10.0 ** -k for k in range(3, 13)]     # 1e-3 .. 1e-12 S
SOURCE_LADDER = [0.1 * k for k in range(1, 11)]      # 10% .. 100%


@dataclass
class OperatingPoint:
    x: np.ndarray
    voltages: dict[str, float]
    currents: dict[str, float]
    regions: dict[str, str]
    residual: float
    iterations: int = 0

    def v(self, node: str) -> float:
        return self.voltages[node.lower()] if node.lower() not in ("0", "gnd") \
            else 0.0


def _mos_eval(cc: CompiledCircuit, k: int, x: np.ndarray):
    el, card, geom = cc.mos_elements[k]
    d, g, s = cc.mo_d[k], cc.mo_g[k], cc.mo_s[k]
    vd = x[d] if d >= 0 else 0.0
    vg = x[g] if g >= 0 else 0.0
    vs = x[s] if s >= 0 else 0.0
    return devices.mosfet_ids(card, geom, vg - vs, vd - vs)


def assemble_dc(cc: CompiledCircuit, x: np.ndarray, gmin_extra: float = 0.0,
                src_scale: float = 1.0):
    """Jacobian and residual of the nonlinear DC MNA equations.

    Residual rows: KCL (sum of currents leaving each node) followed by
    branch equations; the static linear part (resistors, gmin, branch
    incidence) lives in cc.G0.
    """
    n = cc.n
    J = cc.G0.copy()
    if gmin_extra:
        idx = np.arange(cc.n_nodes)
        J[idx, idx] += gmin_extra
    f = J @ x

    # independent sources
    for k in range(len(cc.vs_br)):
        f[cc.vs_br[k]] -= src_scale * dc_value(cc.vs_kind[k], cc.vs_wave[k])
    for k in range(len(cc.is_p)):
        cur = src_scale * dc_value(cc.is_kind[k], cc.is_wave[k])
        if cc.is_p[k] >= 0:
            f[cc.is_p[k]] += cur
        if cc.is_m[k] >= 0:
            f[cc.is_m[k]] -= cur

    stamp_nonlinear(cc, x, J, f)
    return J, f


def _newton(cc: CompiledCircuit, x0: np.ndarray, gmin_extra: float,
            src_scale: float, max_iter: int = MAX_ITER):
    x = x0.copy()
    J, f = assemble_dc(cc, x, gmin_extra, src_scale)
    fnorm = np.abs(f).max() if f.size else 0.0
    for it in range(max_iter):
        if fnorm < ABSTOL:
            return x, fnorm, it
        dx = solve_dense(J, -f)
        step = 1.0
        for _ in range(MAX_DAMPING + 1):
            x_new = x + step * dx
            J_new, f_new = assemble_dc(cc, x_new, gmin_extra, src_scale)
            fnorm_new = np.abs(f_new).max() if f_new.size else 0.0
            if fnorm_new <= fnorm or fnorm_new < ABSTOL:
                break
            step *= 0.5
        dv = np.abs(step * dx[:cc.n_nodes]).max() if cc.n_nodes else 0.0
        x, J, f, fnorm = x_new, J_new, f_new, fnorm_new
        if fnorm < ABSTOL and dv < VNTOL:
            return x, fnorm, it + 1
    raise ConvergenceError(f"Newton did not converge (residual {fnorm:.3e})",
                           worst_node=_worst_node(cc, f), residual=fnorm)


def _worst_node(cc: CompiledCircuit, f: np.ndarray):
    if cc.n_nodes == 0:
        return None
    k = int(np.abs(f[:cc.n_nodes]).argmax())
    return cc.node_names[k]


def _has_dc_path(cc: CompiledCircuit) -> bool:
    return bool(len(cc.mo_d) or len(cc.sw_p) or len(cc.ind_br)
                or len(cc.po_br)
                or any(el.kind == "resistor" for el in cc.circuit.elements))


def dc_operating_point(circuit: Circuit | CompiledCircuit) -> OperatingPoint:
    """Solve the nonlinear DC equations.

    Plain damped Newton first; on failure, Gmin stepping (1e-3 down to
    1e-12 S in decades), then source stepping (10% increments). Raises
    ConvergenceError naming the worst-residual node when the whole
    ladder fails, TopologyError for structurally unsolvable circuits.
    """
    cc = circuit if isinstance(circuit, CompiledCircuit) else \
        compile_circuit(circuit)
    if not _has_dc_path(cc):
        raise TopologyError(
            "circuit has no resistive path: only sources/capacitors present")

    x0 = np.zeros(cc.n)
    try:
        x, res, its = _newton(cc, x0, 0.0, 1.0)
    except (ConvergenceError, SingularMatrixError):
        x, res, its = _continuation(cc, x0)
    return _make_op(cc, x, res, its)


def _continuation(cc: CompiledCircuit, x0: np.ndarray):
    # Gmin stepping
    x = x0.copy()
    try:
        for g in GMIN_LADDER:
            x, res, its = _newton(cc, x, g, 1.0)
        x, res, its = _newton(cc, x, 0.0, 1.0)
        return x, res, its
    except (ConvergenceError, SingularMatrixError):
        pass
    # source stepping
    x = x0.copy()
    last_exc = None
    try:
        for alpha in SOURCE_LADDER:
            x, res, its = _newton(cc, x, 0.0, alpha)
        return x, res, its
    except SingularMatrixError as exc:
        raise TopologyError(f"structurally singular system: {exc}") from exc
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"operating point not found after Gmin and source stepping "
            f"(worst node {exc.worst_node}, residual {exc.residual:.3e})",
            worst_node=exc.worst_node, residual=exc.residual) from exc


def _make_op(cc: CompiledCircuit, x: np.ndarray, res: float,
             its: int) -> OperatingPoint:
    voltages = {nm: float(x[i]) for i, nm in enumerate(cc.node_names)}
    voltages["0"] = 0.0
    currents = {nm: float(x[cc.n_nodes + i])
                for i, nm in enumerate(cc.branch_names)}
    regions = {}
    for k, (el, card, geom) in enumerate(cc.mos_elements):
        regions[el.name] = _mos_eval(cc, k, x).region
    for k, (el, model) in enumerate(cc.sw_elements):
        cp, cm = cc.sw_cp[k], cc.sw_cm[k]
        vc = (x[cp] if cp >= 0 else 0.0) - (x[cm] if cm >= 0 else 0.0)
        regions[el.name] = "on" if vc >= model.vthresh else "off"
    return OperatingPoint(x=x, voltages=voltages, currents=currents,
                          regions=regions, residual=res, iterations=its)
