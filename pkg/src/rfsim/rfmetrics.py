"""Multi-port S-parameter extraction and small-signal figures of merit.

Power-wave definition with a common real reference impedance:
a = (V + z0*I) / (2*sqrt(z0)), b = (V - z0*I) / (2*sqrt(z0)), I into the
port. Each drive port gets a Norton source (1 V behind z0); all other
ports are terminated in z0. The circuit's own AC excitations are zeroed
and any voltage source lying directly across a port's node pair is
opened, mirroring how a port instrument replaces the bench drive.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .engine.ac import ACError
from .engine.compiled import CompiledCircuit, compile_circuit
from .engine.dc import OperatingPoint, dc_operating_point
from .engine.solve import SingularMatrixError, solve_dense
from .engine import ac as _ac
from .netlist import Circuit

UNILATERAL_EPS = 1e-18
KF_UNILATERAL = float("inf")


class PortError(ACError):
    pass


@dataclass
class SParameterSet:
    freqs: np.ndarray                  # Hz
    matrices: np.ndarray               # (F, p, p) complex
    z0: float

    @property
    def n_ports(self) -> int:
        return self.matrices.shape[1]

    def s(self, i: int, j: int) -> np.ndarray:
        """S_ij with 1-based port indices."""
        return self.matrices[:, i - 1, j - 1]

    def at(self, freq: float) -> np.ndarray:
        k = int(np.abs(self.freqs - freq).argmin())
        return self.matrices[k]


@dataclass
class StabilityResult:
    freqs: np.ndarray
    kf: np.ndarray
    delta_mag: np.ndarray
    unconditional: np.ndarray          # bool per frequency


def _resolve_ports(cc: CompiledCircuit):
    ports = cc.circuit.ports
    if not ports:
        raise PortError("circuit declares no ports")
    resolved = []
    for p in ports:
        plus = cc.circuit.nodes[p.plus] - 1
        minus = cc.circuit.nodes[p.minus] - 1
        if plus == minus:
            raise PortError(
                f"port {p.index} signal and reference nodes overlap")
        resolved.append((plus, minus, p.z0))
    return resolved


def _absorbed_sources(cc: CompiledCircuit, resolved):
    """V-sources sitting directly across a port pair get opened in AC."""
    pairs = {(p, m) for p, m, _ in resolved} | {(m, p) for p, m, _ in resolved}
    absorbed = set()
    for el in cc.circuit.elements:
        if el.kind != "vsource":
            continue
        p = cc.circuit.nodes[el.nodes[0]] - 1
        m = cc.circuit.nodes[el.nodes[1]] - 1
        if (p, m) in pairs:
            absorbed.add(el.name)
    return frozenset(absorbed)


def extract_sparams(circuit: Circuit | CompiledCircuit, freqs,
                    op: OperatingPoint | None = None,
                    z0: float | None = None) -> SParameterSet:
    """Column-by-column S-matrix extraction over a frequency list.

    `z0` overrides every port's reference impedance when given (all
    ports must then share it; mixed per-port z0 from the netlist is
    honored for termination but the returned set records port 1's z0).
    """
    cc = circuit if isinstance(circuit, CompiledCircuit) else \
        compile_circuit(circuit)
    resolved = _resolve_ports(cc)
    if z0 is not None:
        resolved = [(p, m, z0) for p, m, _ in resolved]
    if op is None:
        op = dc_operating_point(cc)
    open_branches = _absorbed_sources(cc, resolved)

    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    n_ports = len(resolved)
    mats = np.empty((len(freqs), n_ports, n_ports), dtype=complex)
    for fi, f in enumerate(freqs):
        omega = 2.0 * math.pi * f
        A0, _ = _ac.ac_system(cc, op, omega, zero_sources=True,
                              open_branches=open_branches)
        # terminate every port in its z0
        for (p, m, pz0) in resolved:
            g = 1.0 / pz0
            if p >= 0:
                A0[p, p] += g
            if m >= 0:
                A0[m, m] += g
            if p >= 0 and m >= 0:
                A0[p, m] -= g
                A0[m, p] -= g
        for j, (pj, mj, zj) in enumerate(resolved):
            b = np.zeros(cc.n, dtype=complex)
            e = 1.0
            inj = e / zj
            if pj >= 0:
                b[pj] += inj
            if mj >= 0:
                b[mj] -= inj
            try:
                x = solve_dense(A0.copy(), b)
            except SingularMatrixError as exc:
                raise ACError(
                    f"singular S-parameter system at f = {f:.6e} Hz") from exc
            v = np.array([ (x[p] if p >= 0 else 0.0)
                           - (x[m] if m >= 0 else 0.0)
                           for p, m, _ in resolved])
            i_into = np.array([-v[k] / resolved[k][2] for k in range(n_ports)])
            i_into[j] += e / zj
            sq = np.array([math.sqrt(pz0) for _, _, pz0 in resolved])
            a = (v + np.array([z for _, _, z in resolved]) * i_into) / (2 * sq)
            bw = (v - np.array([z for _, _, z in resolved]) * i_into) / (2 * sq)
            mats[fi, :, j] = bw / a[j]
    return SParameterSet(freqs=freqs, matrices=mats, z0=resolved[0][2])


def rollett_k(s: np.ndarray):
    """Rollett stability factor and |Delta| of a 2x2 S-matrix.

    Returns (kf, delta_mag, unilateral). A vanishing |S12*S21| makes the
    quotient undefined; that case is flagged and kf reported as +inf.
    """
    s = np.asarray(s)
    if s.shape != (2, 2):
        raise ValueError("rollett_k needs a 2x2 matrix")
    s11, s12, s21, s22 = s[0, 0], s[0, 1], s[1, 0], s[1, 1]
    delta = s11 * s22 - s12 * s21
    denom = 2.0 * abs(s12 * s21)
    num = 1.0 - abs(s11) ** 2 - abs(s22) ** 2 + abs(delta) ** 2
    if denom < UNILATERAL_EPS:
        return KF_UNILATERAL, abs(delta), True
    return num / denom, abs(delta), False


def stability_sweep(sp: SParameterSet) -> StabilityResult:
    if sp.n_ports != 2:
        raise ValueError("stability sweep requires a 2-port set")
    kf = np.empty(len(sp.freqs))
    dmag = np.empty(len(sp.freqs))
    for i, m in enumerate(sp.matrices):
        kf[i], dmag[i], _ = rollett_k(m)
    return StabilityResult(freqs=sp.freqs, kf=kf, delta_mag=dmag,
                           unconditional=(kf > 1.0) & (dmag < 1.0))


def db_metrics(sp: SParameterSet, passive: bool = False) -> dict:
    """Return loss, insertion loss, isolation (3-port) and VSWR arrays."""
    if sp.n_ports < 2:
        raise ValueError("db metrics require at least 2 ports")
    s11 = np.abs(sp.s(1, 1))
    s21 = np.abs(sp.s(2, 1))
    if passive and np.any(s11 > 1.0 + 1e-9):
        warnings.warn("passivity violation: |S11| > 1 on a passive network",
                      RuntimeWarning)
    with np.errstate(divide="ignore"):
        out = {
            "return_loss_db": -20.0 * np.log10(s11),
            "insertion_loss_db": -20.0 * np.log10(s21),
            "vswr": np.where(s11 >= 1.0, np.inf, (1 + s11) / (1 - s11)),
        }
        if sp.n_ports >= 3:
            out["isolation_db"] = -20.0 * np.log10(np.abs(sp.s(3, 1)))
    return out


def transducer_gain_db(s) -> float:
    """Matched-termination transducer gain of a 2-port, dB."""
    s = np.asarray(s)
    if s.shape != (2, 2):
        raise ValueError("transducer gain needs a 2x2 matrix")
    return 20.0 * math.log10(abs(s[1, 0]))


def write_touchstone(sp: SParameterSet, path) -> None:
    """Touchstone v1, real/imaginary format, Hz."""
    p = sp.n_ports
    with open(path, "w") as fh:
        fh.write(f"# HZ S RI R {sp.z0:.17g}\n")
        for f, m in zip(sp.freqs, sp.matrices):
            entries = []
            if p == 2:
                order = [(0, 0), (1, 0), (0, 1), (1, 1)]   # S11 S21 S12 S22
            else:
                order = [(i, j) for i in range(p) for j in range(p)]
            for i, j in order:
                entries.append(f"{m[i, j].real:.17e} {m[i, j].imag:.17e}")
            fh.write(f"{f:.17e} " + " ".join(entries) + "\n")
