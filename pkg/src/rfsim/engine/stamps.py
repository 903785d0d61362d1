"""Nonlinear device stamping shared by the DC solver and the reference
transient stepper. Adds device currents to the residual f and their
partials to the Jacobian J, both sized (n,)/(n, n) over the full unknown
vector."""

from __future__ import annotations

import numpy as np

from .. import devices
from .compiled import CompiledCircuit


def stamp_nonlinear(cc: CompiledCircuit, x: np.ndarray, J: np.ndarray,
                    f: np.ndarray) -> None:
    # mosfets
    for k in range(len(cc.mo_d)):
        el, card, geom = cc.mos_elements[k]
        d, g, s = cc.mo_d[k], cc.mo_g[k], cc.mo_s[k]
        vd = x[d] if d >= 0 else 0.0
        vg = x[g] if g >= 0 else 0.0
        vs = x[s] if s >= 0 else 0.0
        ev = devices.mosfet_ids(card, geom, vg - vs, vd - vs)
        for row, sgn in ((d, 1.0), (s, -1.0)):
            if row < 0:
                continue
            f[row] += sgn * ev.ids
            if g >= 0:
                J[row, g] += sgn * ev.gm
            if d >= 0:
                J[row, d] += sgn * ev.gds
            if s >= 0:
                J[row, s] -= sgn * (ev.gm + ev.gds)

    # switches
    for k in range(len(cc.sw_p)):
        _, model = cc.sw_elements[k]
        p, m, cp, cm = cc.sw_p[k], cc.sw_m[k], cc.sw_cp[k], cc.sw_cm[k]
        vc = (x[cp] if cp >= 0 else 0.0) - (x[cm] if cm >= 0 else 0.0)
        g, dg = devices.switch_conductance_and_slope(model, vc)
        v_pm = (x[p] if p >= 0 else 0.0) - (x[m] if m >= 0 else 0.0)
        i = g * v_pm
        for row, sgn in ((p, 1.0), (m, -1.0)):
            if row < 0:
                continue
            f[row] += sgn * i
            if p >= 0:
                J[row, p] += sgn * g
            if m >= 0:
                J[row, m] -= sgn * g
            if cp >= 0:
                J[row, cp] += sgn * dg * v_pm
            if cm >= 0:
                J[row, cm] -= sgn * dg * v_pm

    # polynomial controlled source rows: v_out - (a1*vin + a3*vin^3) = 0
    for k in range(len(cc.po_br)):
        br, ip, im = cc.po_br[k], cc.po_ip[k], cc.po_im[k]
        vin = (x[ip] if ip >= 0 else 0.0) - (x[im] if im >= 0 else 0.0)
        a1, a3 = cc.po_a1[k], cc.po_a3[k]
        f[br] -= a1 * vin + a3 * vin ** 3
        dfd = a1 + 3.0 * a3 * vin * vin
        if ip >= 0:
            J[br, ip] -= dfd
        if im >= 0:
            J[br, im] += dfd
