"""Nonlinear device models: square-law MOSFET and threshold-controlled switch.

All evaluation routines are pure functions of their value arguments and
return both the current and the analytic partial derivatives needed for
Newton stamping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Representative 0.18 um class defaults; overridable per .model card.
DEFAULT_VTH = 0.5        # V
DEFAULT_KP = 170e-6      # A/V^2
DEFAULT_LAMBDA = 0.05    # 1/V
DEFAULT_CGS = 1e-9       # F/m of effective width (1 fF/um)
DEFAULT_CGD = 0.3e-9     # F/m of effective width (0.3 fF/um)


@dataclass(frozen=True)
class ModelCard:
    """Square-law MOSFET parameter set."""

    name: str = "nch"
    polarity: str = "nmos"   # "nmos" | "pmos"
    vth: float = DEFAULT_VTH
    kp: float = DEFAULT_KP
    lam: float = DEFAULT_LAMBDA
    cgs_per_width: float = DEFAULT_CGS
    cgd_per_width: float = DEFAULT_CGD

    def __post_init__(self):
        if self.polarity not in ("nmos", "pmos"):
            raise ValueError("polarity must be 'nmos' or 'pmos'")
        if not (self.kp > 0):
            raise ValueError("kp must be > 0")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.cgs_per_width < 0 or self.cgd_per_width < 0:
            raise ValueError("capacitances must be >= 0")


@dataclass(frozen=True)
class MosGeometry:
    """Multi-finger geometry; effective width = w_finger * fingers * mult."""

    w_finger: float
    l: float
    fingers: int = 1
    mult: int = 1

    def __post_init__(self):
        if self.w_finger <= 0 or self.l <= 0 or self.fingers <= 0 or self.mult <= 0:
            raise ValueError("geometry values must be strictly positive")

    @property
    def w_eff(self) -> float:
        return self.w_finger * self.fingers * self.mult


@dataclass(frozen=True)
class SwitchModel:
    """Threshold-controlled resistive switch with a smooth on/off ramp."""

    ron: float = 5.0
    roff: float = 1e6
    vthresh: float = 0.5
    eps: float = 0.010       # ramp width around vthresh, V
    coff: float = 0.0        # fixed parallel capacitance, F

    def __post_init__(self):
        if not (0 < self.ron < self.roff):
            raise ValueError("require 0 < ron < roff")
        if self.eps <= 0:
            raise ValueError("ramp width must be > 0")
        if self.coff < 0:
            raise ValueError("coff must be >= 0")


@dataclass
class MosEval:
    ids: float
    gm: float
    gds: float
    region: str


def _nmos_core(beta: float, vth: float, lam: float, vgs: float, vds: float):
    """Square-law current and partials for vds >= 0."""
    vov = vgs - vth
    if vov <= 0.0:
        return 0.0, 0.0, 0.0, "cutoff"
    if vds < vov:
        m = 1.0 + lam * vds
        ids = beta * (vov * vds - 0.5 * vds * vds) * m
        gm = beta * vds * m
        gds = beta * ((vov - vds) * m + lam * (vov * vds - 0.5 * vds * vds))
        return ids, gm, gds, "triode"
    m = 1.0 + lam * vds
    ids = 0.5 * beta * vov * vov * m
    gm = beta * vov * m
    gds = 0.5 * beta * vov * vov * lam
    return ids, gm, gds, "saturation"


def mosfet_ids(model: ModelCard, geom: MosGeometry, vgs: float, vds: float) -> MosEval:
    """Drain current with analytic gm = dI/dVgs and gds = dI/dVds.

    PMOS is evaluated with negated terminal voltages and negated current;
    negative vds for either polarity is handled by the symmetric
    drain/source swap, keeping ids continuous through vds = 0.
    """
    beta = model.kp * geom.w_eff / geom.l
    sign = 1.0 if model.polarity == "nmos" else -1.0
    vgs_n = sign * vgs
    vds_n = sign * vds
    if vds_n >= 0.0:
        ids, gm, gds, region = _nmos_core(beta, model.vth, model.lam, vgs_n, vds_n)
        return MosEval(sign * ids, gm, gds, region)
    # source and drain exchange roles
    ids, gm_c, gds_c, region = _nmos_core(
        beta, model.vth, model.lam, vgs_n - vds_n, -vds_n)
    return MosEval(-sign * ids, -gm_c, gm_c + gds_c, region + "-reverse")


def mosfet_charges(model: ModelCard, geom: MosGeometry, vgs: float, vgd: float):
    """Linear overlap/intrinsic charges q = C*v, C proportional to w_eff."""
    qgs = model.cgs_per_width * geom.w_eff * vgs
    qgd = model.cgd_per_width * geom.w_eff * vgd
    return {"qgs": qgs, "qgd": qgd}


def switch_conductance(model: SwitchModel, vctrl: float) -> float:
    """Channel conductance as a function of the control voltage.

    Log-linear smoothstep between 1/roff and 1/ron over a window of
    width eps centred on vthresh; exactly the geometric mean of the two
    conductances at vctrl = vthresh.
    """
    g, _ = switch_conductance_and_slope(model, vctrl)
    return g


def switch_conductance_and_slope(model: SwitchModel, vctrl: float):
    """(g, dg/dvctrl) for Newton stamping."""
    lg_on = math.log(1.0 / model.ron)
    lg_off = math.log(1.0 / model.roff)
    t = (vctrl - model.vthresh) / model.eps + 0.5
    if t <= 0.0:
        return 1.0 / model.roff, 0.0
    if t >= 1.0:
        return 1.0 / model.ron, 0.0
    s = t * t * (3.0 - 2.0 * t)
    ds = 6.0 * t * (1.0 - t)
    lg = lg_off + (lg_on - lg_off) * s
    g = math.exp(lg)
    return g, g * (lg_on - lg_off) * ds / model.eps
