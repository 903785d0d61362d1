"""Bundled reference circuits and the design-target check harness.

Ships ready-to-run netlists for a cascode class-E power amplifier, a
series-shunt FET switch (on and off states), and an ideal-switch
class-E reference design, plus a harness that simulates the bundled
circuits and grades the results against a design-target table
(output power, gain, stability, matching, switch insertion loss and
isolation). Figures reported for the original foundry-level design are
printed alongside as non-binding reference annotations; the bundled
netlists use a generic square-law device model, so those exact numbers
are not expected to reproduce.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .engine.dc import dc_operating_point
from .engine.solve import EngineError
from .largesignal import efficiency, output_power_dbm, run_pss
from .netlist import Circuit, Element, elaborate, parse_netlist
from .rfmetrics import db_metrics, extract_sparams, stability_sweep

F_DESIGN = 2.4e9
F_ALT = 5.0e9
SWEEP_START = 0.1e9
SWEEP_STOP = 6.0e9
SWEEP_POINTS = 60


class HarnessError(EngineError):
    """A harness stage failed; `stage` names the failing analysis."""

    def __init__(self, stage: str, message: str):
        self.stage = stage
        super().__init__(f"stage {stage!r}: {message}")


@dataclass(frozen=True)
class SpecTargets:
    """Design-target table; every threshold is optional.

    Directions are fixed by the metric: output power, gain, stability
    factor, isolation and input-referred IP3 are lower bounds, while
    S11 and insertion loss are upper bounds.
    """

    pout_dbm: float | None = 15.0
    gain_db: float | None = 50.0
    kf_min: float | None = 1.0
    s11_db: float | None = -10.0
    insertion_db: float | None = 1.2
    isolation_db: float | None = 40.0
    iip3_dbm: float | None = 55.0

    def __post_init__(self):
        for name, v in self.__dict__.items():
            if v is not None and not math.isfinite(v):
                raise ValueError(f"target {name} must be finite or None")


#: metric -> (pretty label, unit, comparison against the target)
_METRIC_DEFS = {
    "pout_dbm": ("output power", "dBm", ">="),
    "gain_db": ("power gain", "dB", ">="),
    "kf_min": ("stability Kf (sweep min)", "", ">"),
    "s11_db": ("input reflection S11", "dB", "<="),
    "insertion_db": ("insertion loss", "dB", "<="),
    "isolation_db": ("isolation", "dB", ">="),
    "iip3_dbm": ("IIP3", "dBm", ">="),
}

#: non-binding annotations: results reported for the original
#: foundry-level implementation of each circuit.
REFERENCE_NOTES = {
    "pout_dbm": "17 dBm",
    "gain_db": "94 dB",
    "pdc_w": "2.061 W",
    "insertion_db_5g": "1.36 dB",
    "isolation_db_5g": "58.5 dB",
}


@dataclass
class MetricRow:
    metric: str
    label: str
    unit: str
    measured: float | None
    target: float | None
    direction: str
    verdict: str                 # pass | fail | not-evaluated
    reference: str | None = None


@dataclass
class SpecReport:
    which: str
    rows: list[MetricRow]
    extras: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def row(self, metric: str) -> MetricRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def to_dict(self) -> dict:
        return {
            "which": self.which,
            "rows": [
                {
                    "metric": r.metric,
                    "label": r.label,
                    "unit": r.unit,
                    "measured": r.measured,
                    "target": r.target,
                    "direction": r.direction,
                    "verdict": r.verdict,
                    "reference": r.reference,
                }
                for r in self.rows
            ],
            "extras": self.extras,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        hdr = f"{'metric':<28}{'measured':>12}  {'target':>10}  " \
              f"{'verdict':<14}{'reference':<12}"
        lines = [f"design-target report [{self.which}]", hdr, "-" * len(hdr)]
        for r in self.rows:
            meas = "-" if r.measured is None else f"{r.measured:.3f}"
            targ = "-" if r.target is None else \
                f"{r.direction} {r.target:g}"
            ref = r.reference or ""
            unit = f" {r.unit}" if r.unit else ""
            lines.append(f"{r.label:<28}{meas:>12}{unit:<5}"
                         f"{targ:>10}  {r.verdict:<14}{ref:<12}")
        for k, v in sorted(self.extras.items()):
            lines.append(f"  {k}: {v}")
        return "\n".join(lines) + "\n"


def verdict(measured: float | None, target: float | None,
            direction: str) -> str:
    """Grade one measurement; a pure function of its three arguments."""
    if measured is None or target is None:
        return "not-evaluated"
    if direction == ">=":
        ok = measured >= target
    elif direction == ">":
        ok = measured > target
    elif direction == "<=":
        ok = measured <= target
    elif direction == "<":
        ok = measured < target
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return "pass" if ok else "fail"


def _row(metric: str, measured: float | None, targets: SpecTargets,
         reference: str | None = None) -> MetricRow:
    label, unit, direction = _METRIC_DEFS[metric]
    target = getattr(targets, metric)
    return MetricRow(metric=metric, label=label, unit=unit,
                     measured=measured, target=target, direction=direction,
                     verdict=verdict(measured, target, direction),
                     reference=reference)


def load_asset(name: str) -> str:
    """Raw text of a bundled netlist asset, e.g. 'pa.cir'."""
    return resources.files(__package__).joinpath(f"assets/{name}").read_text()


def pa_netlist() -> Circuit:
    """The bundled cascode class-E PA (see assets/pa.cir for the
    documented bias and placement choices)."""
    return parse_netlist(load_asset("pa.cir"))


def switch_netlist(state: str) -> Circuit:
    """The bundled series-shunt FET switch in 'on' or 'off' state."""
    if state not in ("on", "off"):
        raise ValueError("state must be 'on' or 'off'")
    return parse_netlist(load_asset(f"switch_{state}.cir"))


def classe_netlist(variant: str = "reference") -> Circuit:
    """Ideal-switch class-E design ('reference') or the hard-switched
    counterexample with the shunt capacitor removed ('hard')."""
    if variant not in ("reference", "hard"):
        raise ValueError("variant must be 'reference' or 'hard'")
    name = "classe_ref.cir" if variant == "reference" else "classe_hard.cir"
    return parse_netlist(load_asset(name))


def _with_load(circuit: Circuit, node: str, r: float) -> Circuit:
    """Clone with a load resistor from `node` to ground (the port
    termination exists only inside the S-parameter extractor, so
    time-domain runs attach the load explicitly)."""
    c = copy.deepcopy(circuit)
    c.elements.append(Element(name="rload", kind="resistor",
                              nodes=[node, "0"], value=r))
    return c


def _pa_rows(targets: SpecTargets):
    stage = "pa/parse"
    try:
        circuit = elaborate(pa_netlist(), F_DESIGN)
        stage = "pa/dc"
        op = dc_operating_point(circuit)
        stage = "pa/sparam"
        freqs = np.linspace(SWEEP_START, SWEEP_STOP, SWEEP_POINTS)
        sp = extract_sparams(circuit, freqs, op=op)
        stab = stability_sweep(sp)
        i0 = int(np.abs(freqs - F_DESIGN).argmin())
        s11_db = 20.0 * math.log10(abs(sp.s(1, 1)[i0]))
        gain_db = 20.0 * math.log10(abs(sp.s(2, 1)[i0]))
        stage = "pa/pss"
        port2 = next(p for p in circuit.ports if p.index == 2)
        loaded = _with_load(circuit, port2.plus, port2.z0)
        ss = run_pss(loaded, F_DESIGN, tol=1e-4, max_periods=300)
        pout_dbm = output_power_dbm(ss, (port2.plus, port2.minus), port2.z0)
        eff = efficiency(ss, 10.0 ** (pout_dbm / 10.0) * 1e-3)
    except EngineError as exc:
        raise HarnessError(stage, str(exc)) from exc

    rows = [
        _row("pout_dbm", pout_dbm, targets,
             reference=REFERENCE_NOTES["pout_dbm"]),
        _row("gain_db", gain_db, targets,
             reference=REFERENCE_NOTES["gain_db"]),
        _row("kf_min", float(stab.kf.min()), targets),
        _row("s11_db", s11_db, targets),
        _row("iip3_dbm", None, targets),
    ]
    extras = {
        "pa_pdc_w": eff["pdc"],
        "pa_pdc_reference": REFERENCE_NOTES["pdc_w"],
        "pa_drain_eff": eff["drain_eff"],
        "pa_pae": eff["pae"],
        "pa_q2_region": op.regions["m2"],
        "pa_kf_sweep_ghz": [SWEEP_START / 1e9, SWEEP_STOP / 1e9],
    }
    metadata = {
        "pa_netlist": "pa.cir",
        "pa_model": "nch (square-law, vth=0.5, kp=170u, lambda=0.05)",
        "pa_sweep_points": SWEEP_POINTS,
        "pa_pss_f0_hz": F_DESIGN,
    }
    return rows, extras, metadata


def _switch_rows(targets: SpecTargets):
    stage = "switch/parse"
    try:
        on = switch_netlist("on")
        off = switch_netlist("off")
        stage = "switch/sparam"
        freqs = [F_DESIGN, F_ALT]
        sp_on = extract_sparams(on, freqs)
        sp_off = extract_sparams(off, freqs)
        m_on = db_metrics(sp_on)
        m_off = db_metrics(sp_off)
    except EngineError as exc:
        raise HarnessError(stage, str(exc)) from exc

    insertion = float(m_on["insertion_loss_db"][0])
    isolation = float(m_off["insertion_loss_db"][0])
    rows = [
        _row("insertion_db", insertion, targets),
        _row("isolation_db", isolation, targets),
    ]
    extras = {
        "switch_insertion_db_5ghz": float(m_on["insertion_loss_db"][1]),
        "switch_insertion_reference_5ghz": REFERENCE_NOTES["insertion_db_5g"],
        "switch_isolation_db_5ghz": float(m_off["insertion_loss_db"][1]),
        "switch_isolation_reference_5ghz": REFERENCE_NOTES["isolation_db_5g"],
        "switch_offarm_s31_db_2g4": float(m_on["isolation_db"][0]),
        "switch_return_loss_db_2g4": float(m_on["return_loss_db"][0]),
    }
    metadata = {
        "switch_netlists": ["switch_on.cir", "switch_off.cir"],
        "switch_freqs_ghz": [F_DESIGN / 1e9, F_ALT / 1e9],
    }
    return rows, extras, metadata


def run_reference_harness(which: str = "both",
                      targets: SpecTargets | None = None,
                      echo: bool = True) -> SpecReport:
    """Simulate the bundled circuits and grade them against `targets`.

    `which` selects "pa", "switch" or "both". With `echo` the aligned
    text table (including the non-binding reference annotations) is
    printed to stdout. Any stage failure raises HarnessError naming
    the stage.
    """
    if which not in ("pa", "switch", "both"):
        raise ValueError("which must be 'pa', 'switch' or 'both'")
    targets = targets or SpecTargets()
    rows: list[MetricRow] = []
    extras: dict = {}
    metadata: dict = {"targets": {k: getattr(targets, k)
                                  for k in _METRIC_DEFS}}
    if which in ("pa", "both"):
        r, e, m = _pa_rows(targets)
        rows += r
        extras.update(e)
        metadata.update(m)
    if which in ("switch", "both"):
        r, e, m = _switch_rows(targets)
        rows += r
        extras.update(e)
        metadata.update(m)
    report = SpecReport(which=which, rows=rows, extras=extras,
                        metadata=metadata)
    if echo:
        print(report.to_text(), end="")
    return report
