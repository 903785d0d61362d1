"""SPICE-like netlist parsing, validation, serialization and elaboration.

Grammar (line oriented, UTF-8, case-insensitive):
  * comment line                 "*" in column 1
  * continuation                 "+" in column 1 appends to the previous line
  * element line                 <name> <nodes...> <value> [key=value ...]
                                 first letter of the name selects the kind:
                                 R/L/C (2 nodes + value), V/I (2 nodes +
                                 waveform spec), M (d g s b model [w= l= f= m=]),
                                 S (in out ctrl+ ctrl- [ron= roff= vt= eps= coff=]),
                                 P (out+ out- in+ in- [a1= a3=], test nonlinearity)
  * directives                   .model .port .op .tran .ac .sparam .pss .twotone .end
Source waveforms: DC <v>, SIN(<offset> <amp> <freq> [phase_deg]),
PULSE(<v1> <v2> <delay> <rise> <fall> <width> <period>), AC <mag> [phase_deg].
Node names "0" and "gnd" alias to the single ground node (index 0).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .devices import ModelCard, MosGeometry, SwitchModel

ELEMENT_KINDS = {
    "r": "resistor",
    "l": "inductor",
    "c": "capacitor",
    "v": "vsource",
    "i": "isource",
    "m": "mosfet",
    "s": "switch",
    "p": "poly",
}

_TERMINALS = {
    "resistor": 2, "inductor": 2, "capacitor": 2,
    "vsource": 2, "isource": 2, "mosfet": 4, "switch": 4, "poly": 4,
}

_SI_SUFFIX = {
    "f": 1e-15, "p": 1e-12, "n": 1e-9, "u": 1e-6, "m": 1e-3,
    "k": 1e3, "meg": 1e6, "g": 1e9,
}

_VALUE_RE = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)(meg|[fpnumkg])?([a-z]*)$",
    re.IGNORECASE,
)


class NetlistError(Exception):
    """Base class for netlist problems."""


class ParseError(NetlistError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"line {line}: {message}" if line else message)


class ElaborationError(NetlistError):
    pass


def parse_value(token: str, line: int = 0, column: int = 0) -> float:
    """Parse a number with optional SI suffix and trailing unit letters.

    The scale is keyed off the suffix alone ("3.8Kohm" -> 3800.0,
    "36nH" -> 3.6e-8); unit letters are accepted and ignored, so a
    mis-labelled unit such as "240fH" on a capacitor still reads as
    240e-15. "meg" wins over "m".
    """
    m = _VALUE_RE.match(token.strip())
    if not m:
        raise ParseError(f"malformed value {token!r}", line, column)
    num, suffix, _unit = m.groups()
    scale = _SI_SUFFIX[suffix.lower()] if suffix else 1.0
    return float(num) * scale


@dataclass
class Element:
    name: str
    kind: str
    nodes: list[str]
    value: float | None = None
    params: dict = field(default_factory=dict)
    line: int = 0

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return (self.name, self.kind, self.nodes, self.value, self.params) == \
               (other.name, other.kind, other.nodes, other.value, other.params)


@dataclass(frozen=True)
class PortDef:
    index: int
    plus: str
    minus: str
    z0: float = 50.0


@dataclass
class AnalysisDirective:
    kind: str                      # op | tran | ac | sparam | pss | twotone
    params: dict = field(default_factory=dict)

    def __eq__(self, other):
        if not isinstance(other, AnalysisDirective):
            return NotImplemented
        return (self.kind, self.params) == (other.kind, other.params)


@dataclass
class Circuit:
    title: str = ""
    elements: list[Element] = field(default_factory=list)
    nodes: dict[str, int] = field(default_factory=lambda: {"0": 0})
    ports: list[PortDef] = field(default_factory=list)
    models: dict[str, ModelCard] = field(default_factory=dict)
    directives: list[AnalysisDirective] = field(default_factory=list)

    def element(self, name: str) -> Element:
        for el in self.elements:
            if el.name == name.lower():
                return el
        raise KeyError(name)

    def node_index(self, name: str) -> int:
        return self.nodes[_norm_node(name)]

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return (self.title, self.elements, self.nodes, self.ports,
                self.models, self.directives) == \
               (other.title, other.elements, other.nodes, other.ports,
                other.models, other.directives)


def _norm_node(name: str) -> str:
    name = name.lower()
    return "0" if name in ("0", "gnd") else name


def _tokenize(line: str) -> list[str]:
    # keep waveform groups like SIN(0 1 2.4g) together
    return re.findall(r"[a-zA-Z]+\([^)]*\)|\S+", line)


def _logical_lines(text: str):
    """Yield (line_number, joined_text) with '+' continuations folded in."""
    pending = None
    pending_no = 0
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("+"):
            if pending is None:
                raise ParseError("continuation with no previous line", no)
            pending += " " + stripped[1:]
            continue
        if pending is not None:
            yield pending_no, pending
        pending, pending_no = stripped, no
    if pending is not None:
        yield pending_no, pending


def _parse_source_params(tokens: list[str], line: int) -> dict:
    params: dict = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        low = tok.lower()
        if low == "dc":
            if i + 1 >= len(tokens):
                raise ParseError("DC requires a value", line)
            params["dc"] = parse_value(tokens[i + 1], line)
            i += 2
        elif low == "ac":
            if i + 1 >= len(tokens):
                raise ParseError("AC requires a magnitude", line)
            mag = parse_value(tokens[i + 1], line)
            phase = 0.0
            used = 2
            if (i + 2 < len(tokens) and "=" not in tokens[i + 2]
                    and not tokens[i + 2].lower().startswith(("dc", "ac", "sin", "pulse"))):
                phase = parse_value(tokens[i + 2], line)
                used = 3
            params["ac"] = (mag, phase)
            i += used
        elif low.startswith("sin(") or low.startswith("sin "):
            inner = tok[tok.index("(") + 1:tok.rindex(")")]
            vals = [parse_value(t, line) for t in inner.split()]
            if len(vals) not in (3, 4):
                raise ParseError("SIN needs offset amp freq [phase_deg]", line)
            if len(vals) == 3:
                vals.append(0.0)
            params["sin"] = tuple(vals)
            i += 1
        elif low.startswith("pulse("):
            inner = tok[tok.index("(") + 1:tok.rindex(")")]
            vals = [parse_value(t, line) for t in inner.split()]
            if len(vals) != 7:
                raise ParseError("PULSE needs v1 v2 delay rise fall width period", line)
            params["pulse"] = tuple(vals)
            i += 1
        elif "=" in tok:
            k, v = tok.split("=", 1)
            params[k.lower()] = parse_value(v, line)
            i += 1
        else:
            # bare number = DC value shorthand
            params["dc"] = parse_value(tok, line)
            i += 1
    return params


def _parse_kv(tokens: list[str], line: int) -> dict:
    params = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        k, v = tok.split("=", 1)
        params[k.lower()] = parse_value(v, line)
    return params


def _parse_model(tokens: list[str], line: int) -> ModelCard:
    if len(tokens) < 2:
        raise ParseError(".model requires a name and a polarity", line)
    name = tokens[0].lower()
    polarity = tokens[1].lower()
    if polarity not in ("nmos", "pmos"):
        raise ParseError(f"unknown model polarity {tokens[1]!r}", line)
    kv = _parse_kv(tokens[2:], line)
    known = {"vth", "kp", "lambda", "cgs", "cgd"}
    unknown = set(kv) - known
    if unknown:
        raise ParseError(f"unknown model parameter(s) {sorted(unknown)}", line)
    return ModelCard(
        name=name, polarity=polarity,
        vth=kv.get("vth", ModelCard.vth),
        kp=kv.get("kp", ModelCard.kp),
        lam=kv.get("lambda", ModelCard.lam),
        cgs_per_width=kv.get("cgs", ModelCard.cgs_per_width),
        cgd_per_width=kv.get("cgd", ModelCard.cgd_per_width),
    )


def parse_netlist(text: str) -> Circuit:
    """Parse netlist text into a validated Circuit."""
    circuit = Circuit()
    seen_names: set[str] = set()
    first_comment = None

    for line_no, line in _logical_lines(text):
        if not line:
            continue
        if line.startswith("*"):
            if first_comment is None:
                first_comment = line.lstrip("*").strip()
            continue
        tokens = _tokenize(line)
        head = tokens[0].lower()

        if head.startswith("."):
            _parse_directive(circuit, head, tokens[1:], line_no)
            continue

        kind = ELEMENT_KINDS.get(head[0])
        if kind is None:
            raise ParseError(f"unknown element letter {head[0]!r} in {tokens[0]!r}",
                             line_no)
        if head in seen_names:
            raise ParseError(f"duplicate element name {tokens[0]!r}", line_no)
        seen_names.add(head)

        n_term = _TERMINALS[kind]
        if len(tokens) < 1 + n_term:
            raise ParseError(
                f"{kind} {tokens[0]!r} needs {n_term} node(s)", line_no)
        nodes = [_norm_node(t) for t in tokens[1:1 + n_term]]
        rest = tokens[1 + n_term:]
        el = Element(name=head, kind=kind, nodes=nodes, line=line_no)

        if kind in ("resistor", "inductor", "capacitor"):
            if not rest:
                raise ParseError(f"{kind} {tokens[0]!r} missing value", line_no)
            el.value = parse_value(rest[0], line_no)
            el.params = _parse_kv(rest[1:], line_no)
            if not (math.isfinite(el.value) and el.value > 0):
                raise ParseError(
                    f"{kind} {tokens[0]!r} value must be positive and finite",
                    line_no)
            q = el.params.get("q")
            if q is not None and q <= 0:
                raise ParseError(f"inductor Q must be > 0 on {tokens[0]!r}", line_no)
        elif kind in ("vsource", "isource"):
            el.params = _parse_source_params(rest, line_no)
        elif kind == "mosfet":
            if not rest:
                raise ParseError(f"mosfet {tokens[0]!r} missing model name", line_no)
            el.params = {"model": rest[0].lower(), **_parse_kv(rest[1:], line_no)}
        elif kind == "switch":
            el.params = _parse_kv(rest, line_no)
        elif kind == "poly":
            el.params = _parse_kv(rest, line_no)

        circuit.elements.append(el)
        for nd in nodes:
            if nd not in circuit.nodes:
                circuit.nodes[nd] = len(circuit.nodes)

    if first_comment:
        circuit.title = first_comment
    _validate(circuit)
    return circuit


def _parse_directive(circuit: Circuit, head: str, args: list[str], line_no: int):
    if head == ".model":
        card = _parse_model(args, line_no)
        if card.name in circuit.models:
            raise ParseError(f"duplicate model {card.name!r}", line_no)
        circuit.models[card.name] = card
    elif head == ".port":
        if len(args) < 3:
            raise ParseError(".port requires index and two nodes", line_no)
        idx = int(args[0])
        kv = _parse_kv(args[3:], line_no)
        z0 = kv.get("z0", 50.0)
        if z0 <= 0:
            raise ParseError("port z0 must be > 0", line_no)
        plus, minus = _norm_node(args[1]), _norm_node(args[2])
        for nd in (plus, minus):
            if nd not in circuit.nodes:
                circuit.nodes[nd] = len(circuit.nodes)
        circuit.ports.append(PortDef(index=idx, plus=plus, minus=minus, z0=z0))
    elif head == ".op":
        circuit.directives.append(AnalysisDirective("op"))
    elif head == ".tran":
        if len(args) < 2:
            raise ParseError(".tran requires step and stop", line_no)
        step = parse_value(args[0], line_no)
        stop = parse_value(args[1], line_no)
        uic = len(args) > 2 and args[2].lower() == "uic"
        if not (0 < step < stop):
            raise ParseError(".tran requires 0 < step < stop", line_no)
        circuit.directives.append(
            AnalysisDirective("tran", {"step": step, "stop": stop, "uic": uic}))
    elif head in (".ac", ".sparam"):
        if len(args) < 4 or args[0].lower() != "dec":
            raise ParseError(f"{head} dec <pts> <fstart> <fstop>", line_no)
        pts = int(args[1])
        fstart = parse_value(args[2], line_no)
        fstop = parse_value(args[3], line_no)
        if not (fstart < fstop and pts >= 1):
            raise ParseError(f"{head} sweep requires fstart < fstop, pts >= 1",
                             line_no)
        circuit.directives.append(AnalysisDirective(
            head[1:], {"points_per_decade": pts, "fstart": fstart, "fstop": fstop}))
    elif head == ".pss":
        if not args:
            raise ParseError(".pss requires a fundamental frequency", line_no)
        params = {"f0": parse_value(args[0], line_no)}
        kv = _parse_kv(args[1:], line_no)
        if "periods" in kv:
            params["max_periods"] = int(kv["periods"])
        if "tol" in kv:
            params["tol"] = kv["tol"]
        circuit.directives.append(AnalysisDirective("pss", params))
    elif head == ".twotone":
        if len(args) < 3:
            raise ParseError(".twotone <f1> <f2> <levels_dbm>", line_no)
        levels = [float(t) for t in args[2].split(",")]
        circuit.directives.append(AnalysisDirective("twotone", {
            "f1": parse_value(args[0], line_no),
            "f2": parse_value(args[1], line_no),
            "levels_dbm": levels,
        }))
    elif head == ".end":
        pass
    else:
        raise ParseError(f"unknown directive {head!r}", line_no)


def _validate(circuit: Circuit):
    for el in circuit.elements:
        if el.kind == "mosfet":
            model = el.params.get("model")
            if model not in circuit.models:
                raise ParseError(
                    f"mosfet {el.name!r} references unknown model {model!r}",
                    el.line)
    indices = sorted(p.index for p in circuit.ports)
    if indices:
        if len(set(indices)) != len(indices):
            raise ParseError("duplicate port index")
        if indices != list(range(1, len(indices) + 1)):
            raise ParseError("port indices must be contiguous from 1")
    circuit.ports.sort(key=lambda p: p.index)


# serialization ------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_params(params: dict) -> str:
    out = []
    for k, v in params.items():
        if k == "model":
            continue
        if k == "sin":
            out.append("SIN(%s)" % " ".join(_fmt(x) for x in v))
        elif k == "pulse":
            out.append("PULSE(%s)" % " ".join(_fmt(x) for x in v))
        elif k == "ac":
            out.append("AC %s %s" % (_fmt(v[0]), _fmt(v[1])))
        elif k == "dc":
            out.append("DC %s" % _fmt(v))
        else:
            out.append(f"{k}={_fmt(v)}")
    return " ".join(out)


def serialize_netlist(circuit: Circuit) -> str:
    """Render a Circuit back to netlist text; parse(serialize(c)) == c."""
    lines = []
    if circuit.title:
        lines.append(f"* {circuit.title}")
    for name, card in circuit.models.items():
        lines.append(
            f".model {name} {card.polarity} vth={_fmt(card.vth)} kp={_fmt(card.kp)}"
            f" lambda={_fmt(card.lam)} cgs={_fmt(card.cgs_per_width)}"
            f" cgd={_fmt(card.cgd_per_width)}")
    for el in circuit.elements:
        parts = [el.name, *el.nodes]
        if el.value is not None:
            parts.append(_fmt(el.value))
        if el.kind == "mosfet":
            parts.append(el.params["model"])
        tail = _fmt_params(el.params)
        if tail:
            parts.append(tail)
        lines.append(" ".join(parts))
    for p in circuit.ports:
        lines.append(f".port {p.index} {p.plus} {p.minus} z0={_fmt(p.z0)}")
    for d in circuit.directives:
        lines.append(_serialize_directive(d))
    lines.append(".end")
    return "\n".join(lines) + "\n"


def _serialize_directive(d: AnalysisDirective) -> str:
    p = d.params
    if d.kind == "op":
        return ".op"
    if d.kind == "tran":
        s = f".tran {_fmt(p['step'])} {_fmt(p['stop'])}"
        return s + (" uic" if p.get("uic") else "")
    if d.kind in ("ac", "sparam"):
        return (f".{d.kind} dec {p['points_per_decade']} "
                f"{_fmt(p['fstart'])} {_fmt(p['fstop'])}")
    if d.kind == "pss":
        s = f".pss {_fmt(p['f0'])}"
        if "max_periods" in p:
            s += f" periods={p['max_periods']}"
        if "tol" in p:
            s += f" tol={_fmt(p['tol'])}"
        return s
    if d.kind == "twotone":
        levels = ",".join(repr(x) for x in p["levels_dbm"])
        return f".twotone {_fmt(p['f1'])} {_fmt(p['f2'])} {levels}"
    raise ValueError(f"cannot serialize directive {d.kind!r}")


# elaboration --------------------------------------------------------------

def elaborate(circuit: Circuit, f_design: float) -> Circuit:
    """Flatten a parsed circuit for analysis.

    Finite-Q inductors expand into an ideal inductor in series with
    R = 2*pi*f_design*L/Q; node indices are re-assigned densely and
    dangling internal nodes (single connection, neither ground nor a
    port node) are rejected.
    """
    if f_design <= 0:
        raise ElaborationError("f_design must be > 0")

    flat = Circuit(title=circuit.title,
                   models=dict(circuit.models),
                   ports=list(circuit.ports),
                   directives=list(circuit.directives))
    flat.nodes = {"0": 0}

    def add_node(name):
        if name not in flat.nodes:
            flat.nodes[name] = len(flat.nodes)

    for el in circuit.elements:
        q = el.params.get("q") if el.kind == "inductor" else None
        if q:
            mid = f"{el.name}__q"
            r_loss = 2.0 * math.pi * f_design * el.value / q
            params = {k: v for k, v in el.params.items() if k != "q"}
            flat.elements.append(Element(el.name, "inductor",
                                         [el.nodes[0], mid], el.value,
                                         params, el.line))
            flat.elements.append(Element(f"r{el.name}__q", "resistor",
                                         [mid, el.nodes[1]], r_loss, {}, el.line))
            for nd in (el.nodes[0], mid, el.nodes[1]):
                add_node(nd)
        else:
            flat.elements.append(Element(el.name, el.kind, list(el.nodes),
                                         el.value, dict(el.params), el.line))
            for nd in el.nodes:
                add_node(nd)

    port_nodes = {p.plus for p in flat.ports} | {p.minus for p in flat.ports}
    degree: dict[str, int] = {}
    for el in flat.elements:
        for nd in el.nodes:
            degree[nd] = degree.get(nd, 0) + 1
    for nd, deg in degree.items():
        if deg == 1 and nd != "0" and nd not in port_nodes:
            raise ElaborationError(f"dangling node {nd!r}")
    return flat


def mos_geometry(el: Element) -> MosGeometry:
    """Geometry of a mosfet element from its w/l/f/m params."""
    return MosGeometry(
        w_finger=el.params.get("w", 1e-6),
        l=el.params.get("l", 1e-6),
        fingers=int(el.params.get("f", 1)),
        mult=int(el.params.get("m", 1)),
    )


def switch_model(el: Element) -> SwitchModel:
    return SwitchModel(
        ron=el.params.get("ron", 5.0),
        roff=el.params.get("roff", 1e6),
        vthresh=el.params.get("vt", 0.5),
        eps=el.params.get("eps", 0.010),
        coff=el.params.get("coff", 0.0),
    )
