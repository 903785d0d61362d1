"""Fixed-step trapezoidal transient analysis.

The per-step Newton loop is the simulator's hot path; it exists twice
with identical semantics: a compiled Cython kernel (rfsim.engine._stepper)
and the pure-numpy reference in this module. The backend is chosen at
import time (see `backend_name`), overridable with RFSIM_BACKEND=python.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from ..netlist import Circuit
from .compiled import CompiledCircuit, compile_circuit, wave_value
from .dc import ABSTOL, MAX_DAMPING, VNTOL, OperatingPoint, dc_operating_point
from .solve import ConvergenceError, EngineError, solve_dense
from .stamps import stamp_nonlinear

MAX_STEP_ITER = 100


class TransientError(EngineError):
    def __init__(self, message: str, time: float = float("nan")):
        self.time = time
        super().__init__(message)


@dataclass
class WaveformSet:
    time: np.ndarray
    signals: dict[str, np.ndarray]

    def __getitem__(self, name: str) -> np.ndarray:
        return self.signals[name]

    def names(self) -> list[str]:
        return list(self.signals)


@dataclass
class StepperContext:
    cc: CompiledCircuit
    h: float
    A_base: np.ndarray
    cap_geq: np.ndarray
    ind_zeta: np.ndarray
    kappa: float = 1.0     # companion history weight: 1 = trapezoidal, 0 = BE


@dataclass
class StepperState:
    x: np.ndarray
    cap_v: np.ndarray
    cap_i: np.ndarray
    step: int = 0          # global step counter; time = step * h


def make_context(cc: CompiledCircuit, h: float,
                 backward_euler: bool = False) -> StepperContext:
    """Companion-model system matrix for one integration scheme.

    Trapezoidal by default; the backward-Euler variant is used for the
    first step of a fresh transient, where the capacitor-current history
    may be inconsistent with a source discontinuity at t = 0.
    """
    A = cc.G0.copy()
    weight = 1.0 if backward_euler else 2.0
    geq = weight * cc.cap_c / h
    for k in range(len(cc.cap_p)):
        p, m, g = cc.cap_p[k], cc.cap_m[k], geq[k]
        if p >= 0:
            A[p, p] += g
        if m >= 0:
            A[m, m] += g
        if p >= 0 and m >= 0:
            A[p, m] -= g
            A[m, p] -= g
    zeta = weight * cc.ind_l / h
    for k in range(len(cc.ind_br)):
        A[cc.ind_br[k], cc.ind_br[k]] -= zeta[k]
    return StepperContext(cc=cc, h=h, A_base=A, cap_geq=geq, ind_zeta=zeta,
                          kappa=0.0 if backward_euler else 1.0)


def initial_state(cc: CompiledCircuit, op: OperatingPoint | None) -> StepperState:
    x = np.zeros(cc.n) if op is None else op.x.copy()
    ncap = len(cc.cap_p)
    cap_v = np.zeros(ncap)
    for k in range(ncap):
        p, m = cc.cap_p[k], cc.cap_m[k]
        cap_v[k] = (x[p] if p >= 0 else 0.0) - (x[m] if m >= 0 else 0.0)
    return StepperState(x=x, cap_v=cap_v, cap_i=np.zeros(ncap), step=0)


def _run_steps_python(ctx: StepperContext, state: StepperState,
                      n_steps: int, out: np.ndarray) -> None:
    cc, h = ctx.cc, ctx.h
    n = cc.n
    x = state.x
    for i in range(n_steps):
        t1 = (state.step + 1) * h
        b = np.zeros(n)
        for k in range(len(cc.vs_br)):
            b[cc.vs_br[k]] = wave_value(cc.vs_kind[k], cc.vs_wave[k], t1)
        for k in range(len(cc.is_p)):
            cur = wave_value(cc.is_kind[k], cc.is_wave[k], t1)
            if cc.is_p[k] >= 0:
                b[cc.is_p[k]] -= cur
            if cc.is_m[k] >= 0:
                b[cc.is_m[k]] += cur
        for k in range(len(cc.cap_p)):
            ieq = ctx.cap_geq[k] * state.cap_v[k] + ctx.kappa * state.cap_i[k]
            p, m = cc.cap_p[k], cc.cap_m[k]
            if p >= 0:
                b[p] += ieq
            if m >= 0:
                b[m] -= ieq
        for k in range(len(cc.ind_br)):
            p, m, br = cc.ind_p[k], cc.ind_m[k], cc.ind_br[k]
            v_prev = (x[p] if p >= 0 else 0.0) - (x[m] if m >= 0 else 0.0)
            b[br] = -ctx.kappa * v_prev - ctx.ind_zeta[k] * x[br]

        xn = x.copy()
        converged = False
        J = ctx.A_base.copy()
        f = J @ xn - b
        stamp_nonlinear(cc, xn, J, f)
        fnorm = np.abs(f).max() if n else 0.0
        for _ in range(MAX_STEP_ITER):
            if fnorm < ABSTOL:
                converged = True
                break
            dx = solve_dense(J, -f)
            step_len = 1.0
            for _ in range(MAX_DAMPING + 1):
                x_try = xn + step_len * dx
                J_new = ctx.A_base.copy()
                f_new = J_new @ x_try - b
                stamp_nonlinear(cc, x_try, J_new, f_new)
                fnorm_new = np.abs(f_new).max() if n else 0.0
                if fnorm_new <= fnorm or fnorm_new < ABSTOL:
                    break
                step_len *= 0.5
            dv = np.abs(step_len * dx[:cc.n_nodes]).max() if cc.n_nodes else 0.0
            xn, J, f, fnorm = x_try, J_new, f_new, fnorm_new
            if fnorm < ABSTOL and dv < VNTOL:
                converged = True
                break
        if not converged:
            raise TransientError(
                f"Newton failed at t = {t1:.6e} s (residual {fnorm:.3e})",
                time=t1)

        for k in range(len(cc.cap_p)):
            p, m = cc.cap_p[k], cc.cap_m[k]
            v_new = (xn[p] if p >= 0 else 0.0) - (xn[m] if m >= 0 else 0.0)
            state.cap_i[k] = ctx.cap_geq[k] * (v_new - state.cap_v[k]) \
                - ctx.kappa * state.cap_i[k]
            state.cap_v[k] = v_new
        x[:] = xn
        out[i, :] = xn
        state.step += 1


def _load_backend():
    forced = os.environ.get("RFSIM_BACKEND", "").lower()
    if forced not in ("", "python", "cython"):
        raise ValueError(f"unknown RFSIM_BACKEND {forced!r}")
    if forced != "python":
        try:
            from . import _stepper
            return _stepper, "cython"
        except ImportError:
            if forced == "cython":
                raise
    return None, "python"


_impl, _backend = _load_backend()


def backend_name() -> str:
    return _backend


def run_steps(ctx: StepperContext, state: StepperState, n_steps: int,
              out: np.ndarray) -> None:
    """Advance the transient solution n_steps, recording every unknown."""
    if _impl is None:
        _run_steps_python(ctx, state, n_steps, out)
        return
    cc = ctx.cc
    status = _impl.run_steps(
        ctx.A_base, ctx.h, ctx.kappa, state.step, n_steps,
        state.x, state.cap_v, state.cap_i,
        cc.cap_p, cc.cap_m, ctx.cap_geq,
        cc.ind_br, cc.ind_p, cc.ind_m, ctx.ind_zeta,
        cc.vs_br, cc.vs_kind, cc.vs_wave,
        cc.is_p, cc.is_m, cc.is_kind, cc.is_wave,
        cc.mo_d, cc.mo_g, cc.mo_s, cc.mo_beta, cc.mo_vth, cc.mo_lam,
        cc.mo_sign,
        cc.sw_p, cc.sw_m, cc.sw_cp, cc.sw_cm, cc.sw_gon, cc.sw_goff,
        cc.sw_vt, cc.sw_eps,
        cc.po_br, cc.po_ip, cc.po_im, cc.po_a1, cc.po_a3,
        cc.n_nodes, ABSTOL, VNTOL, MAX_STEP_ITER, MAX_DAMPING,
        out)
    if status >= 0:
        raise TransientError(
            f"Newton failed at t = {(state.step + status + 1) * ctx.h:.6e} s",
            time=(state.step + status + 1) * ctx.h)
    state.step += n_steps


def transient(circuit: Circuit | CompiledCircuit, step: float, stop: float,
              initial: str | OperatingPoint = "op") -> WaveformSet:
    """Trapezoidal transient from t=0 to `stop` on a uniform grid.

    `initial` is "op" (solve the DC operating point first), "uic"
    (all-zero initial state) or an OperatingPoint.
    """
    if not (0 < step < stop):
        raise ValueError("require 0 < step < stop")
    cc = circuit if isinstance(circuit, CompiledCircuit) else \
        compile_circuit(circuit)
    if initial == "uic":
        op = None
    elif initial == "op":
        op = dc_operating_point(cc)
    else:
        op = initial
    n_steps = int(round(stop / step))
    state = initial_state(cc, op)
    out = np.empty((n_steps, cc.n))
    # one backward-Euler step absorbs any t=0 discontinuity, then trapezoidal
    run_steps(make_context(cc, step, backward_euler=True), state, 1, out[:1])
    if n_steps > 1:
        run_steps(make_context(cc, step), state, n_steps - 1, out[1:])

    time = np.arange(n_steps + 1) * step
    x0 = np.zeros(cc.n) if op is None else op.x
    signals = {}
    for j, name in enumerate(cc.unknown_names()):
        signals[name] = np.concatenate(([x0[j]], out[:, j]))
    return WaveformSet(time=time, signals=signals)
