"""Command-line front end.

Commands:
  run <netlist>                 execute every analysis directive in file
                                order, one artifact per analysis
  sparam <netlist> [--fstart --fstop --pts --f0]
  pss <netlist> --f0 <hz> [--periods --tol --load node:R]
  ip3 <netlist> --f1 <hz> --f2 <hz> --levels a,b,c [--load node:R]
  repro {pa|switch|both}        bundled-circuit target-check harness

Common flags: --out <dir> (default "."), --format {csv,json,touchstone},
--set key=value directive overrides (e.g. --set pss.tol=1e-4).

Exit codes: 0 success, 1 usage error, 2 parse/analysis error (an error
JSON is printed on stdout), 3 I/O error.

Load convention for time-domain power measurements: with --load
node:R that resistor defines the output; otherwise the highest-index
port's node pair and reference impedance are used (the port resistance
exists only inside the S-parameter extractor, so a shunt resistor is
attached for transient runs unless one is already present).
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import io as _io
from .engine.solve import EngineError
from .engine.dc import dc_operating_point
from .engine.transient import transient
from .engine.ac import ac_solve
from .largesignal import (PowerReport, efficiency, output_power_dbm,
                          run_pss, two_tone_ip3, zvs_residual)
from .netlist import Circuit, NetlistError, elaborate, parse_netlist, \
    parse_value
from .refbench import HarnessError, run_reference_harness
from .rfmetrics import db_metrics, extract_sparams, stability_sweep, \
    write_touchstone

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ANALYSIS = 2
EXIT_IO = 3

#: --set keys accepted per analysis directive
KNOWN_OVERRIDES = {
    "tran.step", "tran.stop",
    "ac.pts", "ac.fstart", "ac.fstop",
    "sparam.pts", "sparam.fstart", "sparam.fstop",
    "pss.f0", "pss.tol", "pss.periods",
    "twotone.f1", "twotone.f2",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="rfsim", description="desk-scale RF circuit simulator")
    p.add_argument("--out", default=".", help="artifact output directory")
    p.add_argument("--format", choices=("csv", "json", "touchstone"),
                   default=None, help="tabular artifact format")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="overrides", help="directive parameter override")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="execute the netlist's directives")
    sp.add_argument("netlist")

    sp = sub.add_parser("sparam", help="S-parameter sweep")
    sp.add_argument("netlist")
    sp.add_argument("--fstart", type=float, default=0.1e9)
    sp.add_argument("--fstop", type=float, default=6e9)
    sp.add_argument("--pts", type=int, default=60)
    sp.add_argument("--f0", type=float, default=None,
                    help="design frequency for finite-Q expansion")

    sp = sub.add_parser("pss", help="periodic steady state + power report")
    sp.add_argument("netlist")
    sp.add_argument("--f0", type=float, required=True)
    sp.add_argument("--periods", type=int, default=200)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.add_argument("--load", default=None, metavar="NODE:R")

    sp = sub.add_parser("ip3", help="two-tone intermodulation intercept")
    sp.add_argument("netlist")
    sp.add_argument("--f1", type=float, required=True)
    sp.add_argument("--f2", type=float, required=True)
    sp.add_argument("--levels", required=True,
                    help="comma-separated drive levels, dBm")
    sp.add_argument("--load", default=None, metavar="NODE:R")

    sp = sub.add_parser("repro", help="bundled-circuit harness")
    sp.add_argument("which", choices=("pa", "switch", "both"))
    return p


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"--set expects key=value, got {pair!r}")
        k, v = pair.split("=", 1)
        k = k.lower()
        if k not in KNOWN_OVERRIDES:
            raise UsageError(f"unknown --set key {k!r}")
        out[k] = parse_value(v)
    return out


def _read_netlist(path: str) -> Circuit:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise _IoFailure(str(exc)) from exc
    return parse_netlist(text)


class _IoFailure(Exception):
    pass


def _resolve_load(circuit: Circuit, load_arg: str | None):
    """(plus_node, minus_node, resistance, attach) for power readings."""
    if load_arg:
        node, _, r = load_arg.partition(":")
        if not r:
            raise UsageError("--load expects NODE:R")
        return node.lower(), "0", float(parse_value(r)), False
    if circuit.ports:
        p = max(circuit.ports, key=lambda q: q.index)
        attach = not any(
            el.kind == "resistor" and
            {n.lower() for n in el.nodes} == {p.plus, p.minus}
            for el in circuit.elements)
        return p.plus, p.minus, p.z0, attach
    raise UsageError("no ports and no --load: cannot place the output load")


def _attach_resistor(circuit: Circuit, plus: str, minus: str, r: float):
    import copy

    from .netlist import Element
    c = copy.deepcopy(circuit)
    c.elements.append(Element(name="rload", kind="resistor",
                              nodes=[plus, minus], value=r))
    return c


def _decade_freqs(fstart: float, fstop: float, pts: int) -> np.ndarray:
    n = int(math.ceil(pts * math.log10(fstop / fstart))) + 1
    f = fstart * 10.0 ** (np.arange(n) / pts)
    return np.minimum(f, fstop)


def _write_table(outdir: str, stem: str, fmt: str | None,
                 header: list[str], columns) -> list[str]:
    fmt = fmt or "csv"
    if fmt == "json":
        path = f"{outdir}/{stem}.json"
        _io.write_json(path, {h: np.asarray(c).tolist()
                              for h, c in zip(header, columns)})
    else:
        path = f"{outdir}/{stem}.csv"
        _io.write_csv(path, header, [np.asarray(c) for c in columns])
    return [path]


def _run_op(circuit, outdir, fmt) -> list[str]:
    op = dc_operating_point(elaborate(circuit, 1.0))
    path = f"{outdir}/op.json"
    _io.write_json(path, _io.sanitize({
        "voltages": op.voltages, "currents": op.currents,
        "regions": op.regions, "residual": op.residual}))
    return [path]


def _run_tran(circuit, params, outdir, fmt) -> list[str]:
    wf = transient(elaborate(circuit, 1.0 / params["stop"]),
                   params["step"], params["stop"],
                   initial="uic" if params.get("uic") else "op")
    names = wf.names()
    return _write_table(outdir, "tran", fmt, ["time"] + names,
                        [wf.time] + [wf[n] for n in names])


def _run_ac(circuit, params, outdir, fmt) -> list[str]:
    freqs = _decade_freqs(params["fstart"], params["fstop"],
                          params["points_per_decade"])
    f_design = math.sqrt(params["fstart"] * params["fstop"])
    work = elaborate(circuit, f_design)
    ac = ac_solve(work, dc_operating_point(work), freqs)
    header = ["freq"]
    cols = [ac.freqs]
    for name in sorted(ac.signals):
        header += [f"re({name})", f"im({name})"]
        ph = ac.signals[name]
        cols += [ph.real, ph.imag]
    return _write_table(outdir, "ac", fmt, header, cols)


def _run_sparam(circuit, params, outdir, fmt,
                f0: float | None = None) -> list[str]:
    if "points_per_decade" in params:
        freqs = _decade_freqs(params["fstart"], params["fstop"],
                              params["points_per_decade"])
    else:
        freqs = np.linspace(params["fstart"], params["fstop"], params["pts"])
    f_design = f0 or math.sqrt(params["fstart"] * params["fstop"])
    circuit = elaborate(circuit, f_design)
    sp = extract_sparams(circuit, freqs)
    paths = []
    if fmt in (None, "touchstone"):
        path = f"{outdir}/sparam.s{sp.n_ports}p"
        write_touchstone(sp, path)
        paths.append(path)
    else:
        header = ["freq"]
        cols = [sp.freqs]
        for i in range(1, sp.n_ports + 1):
            for j in range(1, sp.n_ports + 1):
                header += [f"re(s{i}{j})", f"im(s{i}{j})"]
                cols += [sp.s(i, j).real, sp.s(i, j).imag]
        paths += _write_table(outdir, "sparam", fmt, header, cols)
    if sp.n_ports >= 2:
        m = db_metrics(sp)
        header = ["freq"] + sorted(m)
        cols = [sp.freqs] + [m[k] for k in sorted(m)]
        paths += _write_table(outdir, "sparam_metrics", "csv", header, cols)
        if sp.n_ports == 2:
            st = stability_sweep(sp)
            paths += _write_table(outdir, "stability", "csv",
                                  ["freq", "kf", "delta_mag"],
                                  [st.freqs, st.kf, st.delta_mag])
    return paths


def _run_pss(circuit, params, outdir, fmt,
             load_arg: str | None = None) -> list[str]:
    plus, minus, r, attach = _resolve_load(circuit, load_arg)
    f0 = params["f0"]
    work = elaborate(circuit, f0)
    if attach:
        work = _attach_resistor(work, plus, minus, r)
    ss = run_pss(work, f0, max_periods=params.get("max_periods", 200),
                 tol=params.get("tol", 1e-3))
    pout_dbm = output_power_dbm(ss, (plus, minus), r)
    pout_w = 0.0 if pout_dbm == -math.inf else 10 ** (pout_dbm / 10) * 1e-3
    eff = efficiency(ss, pout_w)
    switches = [el.name for el in work.elements if el.kind == "switch"]
    zvs = zvs_residual(ss, switches[0]) if len(switches) == 1 else None
    report = PowerReport(pout_dbm=pout_dbm, pdc_w=eff["pdc"],
                         drain_eff=eff["drain_eff"], pae=eff["pae"],
                         zvs_residual_v=zvs)
    path = f"{outdir}/pss.json"
    _io.write_json(path, _io.sanitize({
        **report.to_dict(),
        "f0_hz": f0, "periods_run": ss.periods_run,
        "load": {"plus": plus, "minus": minus, "r": r}}))
    return [path]


def _run_twotone(circuit, params, outdir, fmt,
                 load_arg: str | None = None) -> list[str]:
    plus, minus, r, attach = _resolve_load(circuit, load_arg)
    work = elaborate(circuit, max(params["f1"], params["f2"]))
    if attach:
        work = _attach_resistor(work, plus, minus, r)
    res = two_tone_ip3(work, params["f1"], params["f2"],
                       params["levels_dbm"], (plus, minus), r_load=r)
    path = f"{outdir}/ip3.json"
    _io.write_json(path, _io.sanitize({
        **res.to_dict(), "f1_hz": params["f1"], "f2_hz": params["f2"]}))
    return [path]


_DIRECTIVE_RUNNERS = {
    "op": lambda c, p, o, f: _run_op(c, o, f),
    "tran": _run_tran,
    "ac": _run_ac,
    "sparam": _run_sparam,
    "pss": _run_pss,
    "twotone": _run_twotone,
}


def _apply_overrides(directives, overrides: dict):
    remap = {"pts": "points_per_decade", "periods": "max_periods"}
    for key, value in overrides.items():
        kind, _, param = key.partition(".")
        param = remap.get(param, param)
        for d in directives:
            if d.kind == kind:
                if param in ("points_per_decade", "max_periods"):
                    d.params[param] = int(value)
                else:
                    d.params[param] = value


def _cmd_run(args, overrides) -> list[str]:
    circuit = _read_netlist(args.netlist)
    _apply_overrides(circuit.directives, overrides)
    artifacts = []
    for d in circuit.directives:
        runner = _DIRECTIVE_RUNNERS[d.kind]
        artifacts += runner(circuit, d.params, args.out, args.format)
    return artifacts


def _cmd_repro(args) -> list[str]:
    report = run_reference_harness(args.which)
    base = f"{args.out}/repro_{args.which}"
    _io.write_json(f"{base}.json", _io.sanitize(report.to_dict()))
    with open(f"{base}.txt", "w") as fh:
        fh.write(report.to_text())
    return [f"{base}.json", f"{base}.txt"]


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        overrides = _parse_overrides(args.overrides)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        if args.command == "run":
            artifacts = _cmd_run(args, overrides)
        elif args.command == "sparam":
            circuit = _read_netlist(args.netlist)
            params = {"fstart": args.fstart, "fstop": args.fstop,
                      "pts": args.pts}
            artifacts = _run_sparam(circuit, params, args.out, args.format,
                                    f0=args.f0)
        elif args.command == "pss":
            circuit = _read_netlist(args.netlist)
            params = {"f0": args.f0, "max_periods": args.periods,
                      "tol": args.tol}
            artifacts = _run_pss(circuit, params, args.out, args.format,
                                 load_arg=args.load)
        elif args.command == "ip3":
            circuit = _read_netlist(args.netlist)
            params = {"f1": args.f1, "f2": args.f2,
                      "levels_dbm": [float(t)
                                     for t in args.levels.split(",")]}
            artifacts = _run_twotone(circuit, params, args.out, args.format,
                                     load_arg=args.load)
        elif args.command == "repro":
            artifacts = _cmd_repro(args)
        else:  # pragma: no cover - argparse enforces choices
            return EXIT_USAGE
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NetlistError, EngineError, HarnessError, ValueError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        line = getattr(exc, "line", 0)
        if line:
            err["line"] = line
        stage = getattr(exc, "stage", None)
        if stage:
            err["stage"] = stage
        print(json.dumps(err, sort_keys=True))
        return EXIT_ANALYSIS
    except (_IoFailure, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO

    for path in artifacts:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
