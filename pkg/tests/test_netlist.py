import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsim.netlist import (Circuit, ElaborationError, ParseError, elaborate,
                           parse_netlist, parse_value, serialize_netlist)


class TestParseValue:
    @pytest.mark.parametrize("token,expected", [
        ("36nH", 36e-9),
        ("240fH", 240e-15),        # suffix keys the scale, unit ignored
        ("600f", 600e-15),
        ("11p", 11e-12),
        ("3.8Kohm", 3.8e3),
        ("10.5", 10.5),
        ("0.3um", 0.3e-6),
        ("0.6um", 0.6e-6),
        ("50", 50.0),
        ("2.4g", 2.4e9),
        ("170u", 170e-6),
        ("1meg", 1e6),
        ("1m", 1e-3),
        ("-3.5e-2", -3.5e-2),
        (".5pF", 0.5e-12),
    ])
    def test_si_suffixes(self, token, expected):
        assert parse_value(token) == pytest.approx(expected, rel=1e-12)

    def test_meg_beats_m(self):
        assert parse_value("2meg") == 2e6
        assert parse_value("2m") == 2e-3

    @pytest.mark.parametrize("bad", ["", "ohm", "1..2", "1e+", "--3", "1 2"])
    def test_malformed(self, bad):
        with pytest.raises(ParseError):
            parse_value(bad)

    @given(st.floats(min_value=1e-18, max_value=1e12,
                     allow_nan=False, allow_infinity=False))
    def test_plain_floats_round_trip(self, x):
        assert parse_value(repr(x)) == pytest.approx(x, rel=1e-15)


class TestParser:
    def test_basic_divider(self):
        c = parse_netlist("""* divider
V1 in 0 DC 1
R1 in out 1k
R2 out 0 9k
""")
        assert c.title == "divider"
        assert len(c.elements) == 3
        assert c.element("r1").value == 1e3
        assert set(c.nodes) == {"0", "in", "out"}

    def test_ground_aliases(self):
        c = parse_netlist("V1 a GND DC 1\nR1 a 0 1\n")
        assert c.nodes["0"] == 0
        assert c.element("v1").nodes == ["a", "0"]

    def test_continuation_lines(self):
        c = parse_netlist("V1 in 0 DC 0\n+ SIN(0 1 1meg)\nR1 in 0 50\n")
        assert c.element("v1").params["sin"][2] == 1e6

    def test_duplicate_element_rejected(self):
        with pytest.raises(ParseError) as err:
            parse_netlist("R1 a 0 1\nr1 b 0 2\n")
        assert err.value.line == 2

    def test_missing_value_rejected(self):
        with pytest.raises(ParseError):
            parse_netlist("R1 a 0\n")

    def test_nonpositive_value_rejected(self):
        with pytest.raises(ParseError):
            parse_netlist("R1 a 0 -5\n")
        with pytest.raises(ParseError):
            parse_netlist("C1 a 0 0\n")

    def test_unknown_element_letter(self):
        with pytest.raises(ParseError):
            parse_netlist("Q1 a b c 1\n")

    def test_mosfet_requires_known_model(self):
        with pytest.raises(ParseError):
            parse_netlist("M1 d g 0 0 nodef w=1u l=1u\n")

    def test_mosfet_with_model(self):
        c = parse_netlist(""".model nch nmos vth=0.5 kp=170u lambda=0.05
M1 d g 0 0 nch w=0.3u l=0.6u f=66 m=24
R1 d 0 1k
""")
        el = c.element("m1")
        assert el.params["model"] == "nch"
        assert el.params["f"] == 66
        assert c.models["nch"].kp == pytest.approx(170e-6)

    def test_model_rejects_unknown_params(self):
        with pytest.raises(ParseError):
            parse_netlist(".model x nmos vth=0.5 junk=1\n")

    def test_sin_and_pulse_sources(self):
        c = parse_netlist("""V1 a 0 DC 0.5 SIN(0 1 2.4g 90) AC 1 45
V2 b 0 PULSE(0 1.8 0 5n 5n 480n 1u)
R1 a b 1
""")
        v1 = c.element("v1")
        assert v1.params["dc"] == 0.5
        assert v1.params["sin"] == (0.0, 1.0, 2.4e9, 90.0)
        assert v1.params["ac"] == (1.0, 45.0)
        v2 = c.element("v2")
        assert v2.params["pulse"][6] == 1e-6

    def test_port_directive(self):
        c = parse_netlist("""R1 in out 50
R2 out 0 50
.port 1 in 0 z0=50
.port 2 out 0 z0=75
""")
        assert len(c.ports) == 2
        assert c.ports[1].z0 == 75.0

    def test_duplicate_port_index_rejected(self):
        with pytest.raises(ParseError):
            parse_netlist("R1 a 0 1\n.port 1 a 0\n.port 1 a 0\n")

    def test_directives_recorded_in_order(self):
        c = parse_netlist("""R1 a 0 1
V1 a 0 DC 1
.op
.tran 1n 1u
.pss 2.4g periods=100 tol=1e-4
""")
        kinds = [d.kind for d in c.directives]
        assert kinds == ["op", "tran", "pss"]
        assert c.directives[2].params["max_periods"] == 100

    def test_unknown_directive(self):
        with pytest.raises(ParseError):
            parse_netlist(".nope 1 2\n")


class TestSerialization:
    NETLISTS = [
        """* divider
V1 in 0 DC 1
R1 in out 1k
R2 out 0 9k
.op
""",
        """* pa-ish fragment
.model nch nmos vth=0.5 kp=170u lambda=0.05
VDD vdd 0 DC 1.8
M1 d g 0 0 nch w=0.3u l=0.6u f=66 m=24
L1 vdd d 36n q=20
C1 d 0 240f
R1 g 0 3.8k
V2 g 0 DC 0 SIN(0 0.4 2.4g) AC 1
.port 1 g 0 z0=50
.port 2 d 0 z0=50
""",
        """* switch pair
VC c 0 DC 1.8
S1 p1 p2 c 0 ron=5 roff=1e6 vt=0.9 coff=50f
P1 o 0 p2 0 a1=10 a3=-1
RL o 0 50
R2 p1 0 50
R3 p2 0 50
""",
    ]

    @pytest.mark.parametrize("text", NETLISTS)
    def test_parse_serialize_parse_fixed_point(self, text):
        c1 = parse_netlist(text)
        s1 = serialize_netlist(c1)
        c2 = parse_netlist(s1)
        assert c2 == c1
        # serialization itself is a fixed point after one round
        assert serialize_netlist(c2) == s1


class TestElaboration:
    def test_finite_q_inductor_expansion(self):
        c = parse_netlist("""V1 a 0 DC 0 AC 1
L1 a b 36n q=20
R1 b 0 50
""")
        flat = elaborate(c, 2.4e9)
        kinds = sorted(el.kind for el in flat.elements)
        assert kinds == ["inductor", "resistor", "resistor", "vsource"]
        r_loss = next(el for el in flat.elements
                      if el.kind == "resistor" and el.name != "r1")
        expected = 2 * math.pi * 2.4e9 * 36e-9 / 20
        assert r_loss.value == pytest.approx(expected, rel=1e-12)

    def test_ideal_inductor_untouched(self):
        c = parse_netlist("V1 a 0 DC 1\nL1 a b 1u\nR1 b 0 1\n")
        flat = elaborate(c, 1e9)
        assert len(flat.elements) == 3

    def test_dangling_node_rejected(self):
        c = parse_netlist("V1 a 0 DC 1\nR1 a b 1\nR2 b c 1\n")
        with pytest.raises(ElaborationError):
            elaborate(c, 1e6)

    def test_port_node_may_dangle(self):
        c = parse_netlist("R1 in out 50\nR2 out 0 50\n.port 1 in 0\n")
        elaborate(c, 1e6)   # must not raise

    def test_original_circuit_unmodified(self):
        c = parse_netlist("V1 a 0 DC 1\nL1 a b 1u q=10\nR1 b 0 1\n")
        n_before = len(c.elements)
        elaborate(c, 1e9)
        assert len(c.elements) == n_before
