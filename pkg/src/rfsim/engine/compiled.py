"""Flattening of an elaborated Circuit into stamp arrays for the solvers.

Unknown ordering: node voltages (ground dropped) first, then branch
currents for voltage sources, inductors and the controlled-source output
of the test nonlinearity. A branch current is the current entering the
element at its first (plus) terminal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..netlist import Circuit, Element, ElaborationError, mos_geometry, switch_model

GMIN = 1e-12  # permanent node-to-ground conductance

WAVE_DC = 0
WAVE_SIN = 1
WAVE_PULSE = 2
NWAVE = 8  # parameter slots per source


@dataclass
class CompiledCircuit:
    circuit: Circuit
    n_nodes: int
    n_branches: int
    node_names: list[str]
    branch_names: list[str]
    G0: np.ndarray                     # (n, n) static real part, incl. gmin
    # linear dynamic elements
    cap_p: np.ndarray
    cap_m: np.ndarray
    cap_c: np.ndarray
    ind_br: np.ndarray                 # absolute unknown index of the branch
    ind_p: np.ndarray
    ind_m: np.ndarray
    ind_l: np.ndarray
    # independent sources
    vs_br: np.ndarray
    vs_kind: np.ndarray
    vs_wave: np.ndarray                # (nv, NWAVE)
    vs_ac: np.ndarray                  # (nv, 2) magnitude, phase_deg
    vs_is_dc: np.ndarray               # bool: pure DC supply
    vs_names: list[str]
    is_p: np.ndarray
    is_m: np.ndarray
    is_kind: np.ndarray
    is_wave: np.ndarray
    is_ac: np.ndarray
    # nonlinear devices
    mo_d: np.ndarray
    mo_g: np.ndarray
    mo_s: np.ndarray
    mo_beta: np.ndarray
    mo_vth: np.ndarray
    mo_lam: np.ndarray
    mo_sign: np.ndarray
    mos_elements: list = field(default_factory=list)   # (Element, ModelCard, MosGeometry)
    sw_p: np.ndarray = None
    sw_m: np.ndarray = None
    sw_cp: np.ndarray = None
    sw_cm: np.ndarray = None
    sw_gon: np.ndarray = None
    sw_goff: np.ndarray = None
    sw_vt: np.ndarray = None
    sw_eps: np.ndarray = None
    sw_elements: list = field(default_factory=list)
    po_br: np.ndarray = None
    po_ip: np.ndarray = None
    po_im: np.ndarray = None
    po_a1: np.ndarray = None
    po_a3: np.ndarray = None

    @property
    def n(self) -> int:
        return self.n_nodes + self.n_branches

    def node_unknown(self, name: str) -> int:
        """Unknown index of a node name; -1 for ground."""
        return self.circuit.node_index(name) - 1

    def branch_unknown(self, element_name: str) -> int:
        return self.n_nodes + self.branch_names.index(element_name.lower())

    def unknown_names(self) -> list[str]:
        return [f"v({nm})" for nm in self.node_names] + \
               [f"i({nm})" for nm in self.branch_names]


def _wave_of(params: dict):
    wave = np.zeros(NWAVE)
    if "pulse" in params:
        wave[:7] = params["pulse"]
        return WAVE_PULSE, wave
    if "sin" in params:
        wave[:4] = params["sin"]
        return WAVE_SIN, wave
    wave[0] = params.get("dc", 0.0)
    return WAVE_DC, wave


def wave_value(kind: int, p: np.ndarray, t: float) -> float:
    if kind == WAVE_SIN:
        return p[0] + p[1] * math.sin(2.0 * math.pi * p[2] * t
                                      + math.radians(p[3]))
    if kind == WAVE_PULSE:
        v1, v2, delay, rise, fall, width, period = p[:7]
        if t < delay:
            return v1
        tau = (t - delay) % period if period > 0 else (t - delay)
        if tau < rise:
            return v1 + (v2 - v1) * (tau / rise if rise > 0 else 1.0)
        tau -= rise
        if tau < width:
            return v2
        tau -= width
        if tau < fall:
            return v2 + (v1 - v2) * (tau / fall if fall > 0 else 1.0)
        return v1
    return p[0]


def dc_value(kind: int, p: np.ndarray) -> float:
    """Bias value of a source: DC level, SIN offset, or PULSE initial value."""
    if kind == WAVE_SIN:
        return p[0]
    if kind == WAVE_PULSE:
        return p[0]
    return p[0]


def compile_circuit(circuit: Circuit) -> CompiledCircuit:
    n_nodes = len(circuit.nodes) - 1
    node_names = [None] * n_nodes
    for name, idx in circuit.nodes.items():
        if idx > 0:
            node_names[idx - 1] = name

    def u(node_name: str) -> int:
        return circuit.nodes[node_name] - 1

    vsources = [el for el in circuit.elements if el.kind == "vsource"]
    inductors = [el for el in circuit.elements if el.kind == "inductor"]
    polys = [el for el in circuit.elements if el.kind == "poly"]
    branch_names = [el.name for el in vsources + inductors + polys]
    n_branches = len(branch_names)
    n = n_nodes + n_branches

    G0 = np.zeros((n, n))
    np.fill_diagonal(G0[:n_nodes, :n_nodes], GMIN)

    cap_p, cap_m, cap_c = [], [], []

    def add_cap(p, m, c):
        if c > 0:
            cap_p.append(p)
            cap_m.append(m)
            cap_c.append(c)

    def kcl_branch(br, p, m):
        if p >= 0:
            G0[p, br] += 1.0
        if m >= 0:
            G0[m, br] += 1.0 * -1.0
        if p >= 0:
            G0[br, p] += 1.0
        if m >= 0:
            G0[br, m] -= 1.0

    for el in circuit.elements:
        if el.kind == "resistor":
            g = 1.0 / el.value
            p, m = u(el.nodes[0]), u(el.nodes[1])
            if p >= 0:
                G0[p, p] += g
            if m >= 0:
                G0[m, m] += g
            if p >= 0 and m >= 0:
                G0[p, m] -= g
                G0[m, p] -= g
        elif el.kind == "capacitor":
            add_cap(u(el.nodes[0]), u(el.nodes[1]), el.value)

    # branch incidence
    br = n_nodes
    vs_br, vs_kind, vs_wave, vs_ac, vs_is_dc, vs_names = [], [], [], [], [], []
    for el in vsources:
        p, m = u(el.nodes[0]), u(el.nodes[1])
        kcl_branch(br, p, m)
        kind, wave = _wave_of(el.params)
        vs_br.append(br)
        vs_kind.append(kind)
        vs_wave.append(wave)
        vs_ac.append(el.params.get("ac", (0.0, 0.0)))
        vs_is_dc.append(kind == WAVE_DC)
        vs_names.append(el.name)
        br += 1

    ind_br, ind_p, ind_m, ind_l = [], [], [], []
    for el in inductors:
        p, m = u(el.nodes[0]), u(el.nodes[1])
        kcl_branch(br, p, m)
        ind_br.append(br)
        ind_p.append(p)
        ind_m.append(m)
        ind_l.append(el.value)
        br += 1

    po_br, po_ip, po_im, po_a1, po_a3 = [], [], [], [], []
    for el in polys:
        op, om = u(el.nodes[0]), u(el.nodes[1])
        kcl_branch(br, op, om)
        po_br.append(br)
        po_ip.append(u(el.nodes[2]))
        po_im.append(u(el.nodes[3]))
        po_a1.append(el.params.get("a1", 1.0))
        po_a3.append(el.params.get("a3", 0.0))
        br += 1

    is_p, is_m, is_kind, is_wave, is_ac = [], [], [], [], []
    for el in circuit.elements:
        if el.kind != "isource":
            continue
        kind, wave = _wave_of(el.params)
        is_p.append(u(el.nodes[0]))
        is_m.append(u(el.nodes[1]))
        is_kind.append(kind)
        is_wave.append(wave)
        is_ac.append(el.params.get("ac", (0.0, 0.0)))

    mo_d, mo_g, mo_s = [], [], []
    mo_beta, mo_vth, mo_lam, mo_sign = [], [], [], []
    mos_elements = []
    for el in circuit.elements:
        if el.kind != "mosfet":
            continue
        card = circuit.models[el.params["model"]]
        geom = mos_geometry(el)
        d, g, s = u(el.nodes[0]), u(el.nodes[1]), u(el.nodes[2])
        mo_d.append(d)
        mo_g.append(g)
        mo_s.append(s)
        mo_beta.append(card.kp * geom.w_eff / geom.l)
        mo_vth.append(card.vth)
        mo_lam.append(card.lam)
        mo_sign.append(1.0 if card.polarity == "nmos" else -1.0)
        mos_elements.append((el, card, geom))
        add_cap(g, s, card.cgs_per_width * geom.w_eff)
        add_cap(g, d, card.cgd_per_width * geom.w_eff)

    sw_p, sw_m, sw_cp, sw_cm = [], [], [], []
    sw_gon, sw_goff, sw_vt, sw_eps = [], [], [], []
    sw_elements = []
    for el in circuit.elements:
        if el.kind != "switch":
            continue
        model = switch_model(el)
        p, m = u(el.nodes[0]), u(el.nodes[1])
        sw_p.append(p)
        sw_m.append(m)
        sw_cp.append(u(el.nodes[2]))
        sw_cm.append(u(el.nodes[3]))
        sw_gon.append(1.0 / model.ron)
        sw_goff.append(1.0 / model.roff)
        sw_vt.append(model.vthresh)
        sw_eps.append(model.eps)
        sw_elements.append((el, model))
        add_cap(p, m, model.coff)

    ai = lambda xs, dt=np.int64: np.asarray(xs, dtype=dt)
    af = lambda xs: np.asarray(xs, dtype=np.float64)
    return CompiledCircuit(
        circuit=circuit, n_nodes=n_nodes, n_branches=n_branches,
        node_names=node_names, branch_names=branch_names, G0=G0,
        cap_p=ai(cap_p), cap_m=ai(cap_m), cap_c=af(cap_c),
        ind_br=ai(ind_br), ind_p=ai(ind_p), ind_m=ai(ind_m), ind_l=af(ind_l),
        vs_br=ai(vs_br), vs_kind=ai(vs_kind),
        vs_wave=np.asarray(vs_wave, dtype=np.float64).reshape(-1, NWAVE),
        vs_ac=np.asarray(vs_ac, dtype=np.float64).reshape(-1, 2),
        vs_is_dc=np.asarray(vs_is_dc, dtype=bool), vs_names=vs_names,
        is_p=ai(is_p), is_m=ai(is_m), is_kind=ai(is_kind),
        is_wave=np.asarray(is_wave, dtype=np.float64).reshape(-1, NWAVE),
        is_ac=np.asarray(is_ac, dtype=np.float64).reshape(-1, 2),
        mo_d=ai(mo_d), mo_g=ai(mo_g), mo_s=ai(mo_s),
        mo_beta=af(mo_beta), mo_vth=af(mo_vth), mo_lam=af(mo_lam),
        mo_sign=af(mo_sign), mos_elements=mos_elements,
        sw_p=ai(sw_p), sw_m=ai(sw_m), sw_cp=ai(sw_cp), sw_cm=ai(sw_cm),
        sw_gon=af(sw_gon), sw_goff=af(sw_goff), sw_vt=af(sw_vt),
        sw_eps=af(sw_eps), sw_elements=sw_elements,
        po_br=ai(po_br), po_ip=ai(po_ip), po_im=ai(po_im),
        po_a1=af(po_a1), po_a3=af(po_a3),
    )
