"""Large-signal characterization: periodic steady state by settled
transient plus integer-period Fourier extraction, output power, DC
consumption and drain efficiency, zero-voltage-switching check, and
two-tone third-order intercept."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .engine.compiled import (WAVE_DC, WAVE_SIN, CompiledCircuit,
                              compile_circuit, wave_value)
from .engine.dc import OperatingPoint, dc_operating_point
from .engine.solve import EngineError
from .engine.transient import initial_state, make_context, run_steps
from .netlist import Circuit, switch_model

DBM_FLOOR = -160.0


class PssError(EngineError):
    pass


class NonSettlementError(PssError):
    def __init__(self, message: str, residual_trace):
        self.residual_trace = residual_trace
        super().__init__(message)


class ExtrapolationError(EngineError):
    pass


@dataclass
class SteadyStateResult:
    fundamental: float
    samples_per_period: int
    h: float
    cc: CompiledCircuit
    time: np.ndarray                    # final-period sample times
    samples: np.ndarray                 # (N, n) unknown samples
    bins: list[int]
    harmonics: dict[str, np.ndarray]    # per-signal phasors over `bins`
    periods_run: int
    residual: float

    def phasor(self, signal: str, k: int = 1) -> complex:
        return self.harmonics[signal][self.bins.index(k)]

    def node_phasor(self, plus: str, minus: str = "0", k: int = 1) -> complex:
        a = self.phasor(f"v({plus.lower()})", k) if plus.lower() not in ("0", "gnd") else 0.0
        b = self.phasor(f"v({minus.lower()})", k) if minus.lower() not in ("0", "gnd") else 0.0
        return a - b

    def waveform(self, signal: str) -> np.ndarray:
        j = self.cc.unknown_names().index(signal)
        return self.samples[:, j]


@dataclass
class PowerReport:
    pout_dbm: float
    pdc_w: float
    drain_eff: float
    pae: float
    zvs_residual_v: float | None = None

    def to_dict(self) -> dict:
        return {"pout_dbm": self.pout_dbm, "pdc_w": self.pdc_w,
                "drain_eff": self.drain_eff, "pae": self.pae,
                "zvs_residual_v": self.zvs_residual_v}


@dataclass
class Ip3Result:
    levels_dbm: list[float]
    p_fund_dbm: list[float]
    p_im3_dbm: list[float]
    iip3_dbm: float | None
    oip3_dbm: float | None
    single_point_iip3_dbm: list[float]
    immeasurably_linear: bool = False

    def to_dict(self) -> dict:
        return {"iip3_dbm": self.iip3_dbm, "oip3_dbm": self.oip3_dbm,
                "levels_dbm": self.levels_dbm,
                "p_fund_dbm": self.p_fund_dbm, "p_im3_dbm": self.p_im3_dbm,
                "single_point_iip3_dbm": self.single_point_iip3_dbm,
                "immeasurably_linear": self.immeasurably_linear}


def run_pss(circuit: Circuit | CompiledCircuit, f0: float,
            max_periods: int = 200, tol: float = 1e-3,
            samples_per_period: int = 256, harmonics: int = 10,
            bins: list[int] | None = None,
            op: OperatingPoint | None = None) -> SteadyStateResult:
    """Settled-transient periodic steady state.

    Integrates period by period at a fixed step 1/(f0*N); declares
    settlement when the worst node-voltage difference between successive
    periods drops below `tol`. Harmonic phasors (convention
    x(t) = Re{X_k e^{jk w0 t}}) come from a plain integer-period Fourier
    sum over the final period, no taper.
    """
    if f0 <= 0:
        raise PssError("fundamental must be > 0")
    if samples_per_period < 256:
        samples_per_period = 256
    cc = circuit if isinstance(circuit, CompiledCircuit) else \
        compile_circuit(circuit)
    if op is None:
        op = dc_operating_point(cc)
    N = samples_per_period
    h = 1.0 / (f0 * N)
    state = initial_state(cc, op)
    out = np.empty((N, cc.n))
    prev = None
    residuals = []
    ctx_trap = make_context(cc, h)
    # first step of the first period absorbs any t=0 source discontinuity
    run_steps(make_context(cc, h, backward_euler=True), state, 1, out[:1])
    run_steps(ctx_trap, state, N - 1, out[1:])
    periods = 1
    resid = math.inf
    while periods < max_periods:
        prev = out.copy()
        run_steps(ctx_trap, state, N, out)
        periods += 1
        resid = float(np.abs(out[:, :cc.n_nodes] - prev[:, :cc.n_nodes]).max()) \
            if cc.n_nodes else 0.0
        residuals.append(resid)
        if resid < tol:
            break
    else:
        raise NonSettlementError(
            f"no periodic steady state after {max_periods} periods "
            f"(residual {resid:.3e} V)", residuals)
    if periods == 1:
        resid = 0.0

    ks = list(bins) if bins is not None else list(range(0, max(harmonics, 5) + 1))
    phase = np.arange(1, N + 1) / N           # sample i sits at t = (i+1)h
    ems = {k: np.exp(-2j * math.pi * k * phase) for k in ks}
    names = cc.unknown_names()
    harm = {}
    for j, name in enumerate(names):
        col = out[:, j]
        vals = np.empty(len(ks), dtype=complex)
        for i, k in enumerate(ks):
            if k == 0:
                vals[i] = col.mean()
            else:
                vals[i] = 2.0 / N * np.dot(col, ems[k])
        harm[name] = vals
    t_final = ((state.step - N) + np.arange(1, N + 1)) * h
    return SteadyStateResult(
        fundamental=f0, samples_per_period=N, h=h, cc=cc, time=t_final,
        samples=out.copy(), bins=ks, harmonics=harm, periods_run=periods,
        residual=resid)


def power_dbm(p_watts: float) -> float:
    if p_watts <= 0.0:
        return -math.inf
    return 10.0 * math.log10(p_watts / 1e-3)


def output_power_dbm(ss: SteadyStateResult, load_nodes: tuple[str, str],
                     r_load: float, k: int = 1) -> float:
    """Power at harmonic k into a resistive load, dBm; -inf on zero phasor."""
    if r_load <= 0:
        raise ValueError("r_load must be > 0")
    v1 = ss.node_phasor(load_nodes[0], load_nodes[1], k)
    return power_dbm(abs(v1) ** 2 / (2.0 * r_load))


def efficiency(ss: SteadyStateResult, pout_w: float) -> dict:
    """DC consumption and efficiency from steady-state branch currents.

    DC supplies are the pure-DC voltage sources; the RF drive is every
    remaining voltage source, whose average delivered power defines pin
    for PAE.
    """
    cc = ss.cc
    pdc = 0.0
    pin = 0.0
    for k, name in enumerate(cc.vs_names):
        j = cc.vs_br[k]
        i_sam = ss.samples[:, j]
        if cc.vs_is_dc[k]:
            pdc += cc.vs_wave[k][0] * (-i_sam.mean())
        else:
            e = np.array([wave_value(cc.vs_kind[k], cc.vs_wave[k], t)
                          for t in ss.time])
            pin += float(np.mean(e * (-i_sam)))
    if pdc <= 0.0:
        raise EngineError(
            f"no net DC supply power measured (pdc = {pdc:.3e} W)")
    return {"pdc": pdc,
            "drain_eff": pout_w / pdc,
            "pae": (pout_w - max(pin, 0.0)) / pdc}


def _switch_waves(ss: SteadyStateResult, element_name: str):
    cc = ss.cc
    name = element_name.lower()
    x = ss.samples

    def nv(idx):
        return x[:, idx] if idx >= 0 else np.zeros(len(x))

    for k, (el, model) in enumerate(cc.sw_elements):
        if el.name == name:
            ctrl = nv(cc.sw_cp[k]) - nv(cc.sw_cm[k])
            vds = nv(cc.sw_p[k]) - nv(cc.sw_m[k])
            return ctrl, vds, model.vthresh
    for k, (el, card, geom) in enumerate(cc.mos_elements):
        if el.name == name:
            ctrl = nv(cc.mo_g[k]) - nv(cc.mo_s[k])
            vds = nv(cc.mo_d[k]) - nv(cc.mo_s[k])
            return ctrl, vds, card.vth
    raise KeyError(f"no switch or mosfet named {element_name!r}")


def zvs_residual(ss: SteadyStateResult, element_name: str) -> float:
    """|Vds| of the switching device at its turn-on instants, averaged
    over the final steady-state period."""
    ctrl, vds, vth = _switch_waves(ss, element_name)
    N = len(ctrl)
    values = []
    for i in range(N):
        a, b = ctrl[i], ctrl[(i + 1) % N]
        if a < vth <= b:
            alpha = (vth - a) / (b - a)
            va, vb = vds[i], vds[(i + 1) % N]
            values.append(abs(va + alpha * (vb - va)))
    if not values:
        raise EngineError(
            f"{element_name!r} never turns on in steady state")
    return float(np.mean(values))


def _beat_decomposition(f1: float, f2: float, max_den: int = 100000):
    frac = Fraction(f1 / f2).limit_denominator(max_den)
    k1, k2 = frac.numerator, frac.denominator
    if abs(f1 / f2 - k1 / k2) > 1e-9 * abs(f1 / f2):
        raise ValueError(
            f"tones f1={f1:g}, f2={f2:g} are not commensurate")
    return k1, k2, f1 / k1


def _set_tone(circuit: Circuit, tone: int, amp: float, freq: float):
    for el in circuit.elements:
        if el.kind == "vsource" and int(el.params.get("tone", 0)) == tone:
            offset = el.params.get("sin", (0.0,))[0]
            el.params["sin"] = (offset, amp, freq, 0.0)
            return
    raise KeyError(f"no voltage source tagged tone={tone}")


def two_tone_ip3(circuit: Circuit, f1: float, f2: float,
                 drive_levels_dbm, load_nodes: tuple[str, str],
                 r_load: float = 50.0, r_in: float = 50.0,
                 samples_budget: int = 1 << 16,
                 max_periods: int = 200, tol: float = 1e-3) -> Ip3Result:
    """Two-tone intermodulation intercept extraction.

    The tones must be commensurate (f1 = k1*fb, f2 = k2*fb); each drive
    level runs a PSS analysis at the beat fundamental and reads the
    powers at f1 and 2*f1-f2. Input power per tone is referred to r_in.
    """
    if f1 == f2:
        raise ValueError("two-tone analysis requires f1 != f2")
    k1, k2, fb = _beat_decomposition(f1, f2)
    k_im3 = abs(2 * k1 - k2)
    n_min = 8 * max(k1, k2, k_im3)
    N = 256
    while N < n_min:
        N *= 2
    if N > samples_budget:
        raise ValueError(
            f"tone spacing requires {N} samples/beat-period, over the "
            f"budget of {samples_budget}; choose closer-spaced integers")

    levels = list(drive_levels_dbm)
    p_fund, p_im3, single_point = [], [], []
    for pin_dbm in levels:
        amp = math.sqrt(2.0 * r_in * 1e-3 * 10 ** (pin_dbm / 10.0))
        work = copy.deepcopy(circuit)
        _set_tone(work, 1, amp, f1)
        _set_tone(work, 2, amp, f2)
        ss = run_pss(work, fb, max_periods=max_periods, tol=tol,
                     samples_per_period=N, bins=[k1, k_im3])
        pf = output_power_dbm(ss, load_nodes, r_load, k=k1)
        pim = output_power_dbm(ss, load_nodes, r_load, k=k_im3)
        p_fund.append(pf)
        p_im3.append(max(pim, DBM_FLOOR))
        single_point.append(pin_dbm + (pf - pim) / 2.0
                            if math.isfinite(pim) else math.inf)

    if all(p <= DBM_FLOOR for p in p_im3):
        return Ip3Result(levels, p_fund, p_im3, None, None, single_point,
                         immeasurably_linear=True)

    # keep only levels whose local slopes are near the ideal 1 and 3 dB/dB
    valid = set()
    for i in range(len(levels) - 1):
        dp = levels[i + 1] - levels[i]
        if dp == 0:
            continue
        s1 = (p_fund[i + 1] - p_fund[i]) / dp
        s3 = (p_im3[i + 1] - p_im3[i]) / dp
        if abs(s1 - 1.0) <= 0.3 and abs(s3 - 3.0) <= 0.3:
            valid.add(i)
            valid.add(i + 1)
    if not valid:
        raise ExtrapolationError(
            "no drive levels with near-ideal fundamental/IM3 slopes")
    idx = sorted(valid)
    c1 = float(np.mean([p_fund[i] - levels[i] for i in idx]))
    c3 = float(np.mean([p_im3[i] - 3.0 * levels[i] for i in idx]))
    iip3 = (c1 - c3) / 2.0
    return Ip3Result(levels, p_fund, p_im3, iip3, iip3 + c1, single_point)
