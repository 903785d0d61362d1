import cmath
import math

import numpy as np
import pytest

from rfsim import parse_netlist
from rfsim.engine import ac_solve, dc_operating_point
from rfsim.largesignal import (DBM_FLOOR, Ip3Result, NonSettlementError,
                               PowerReport, efficiency, output_power_dbm,
                               power_dbm, run_pss, two_tone_ip3, zvs_residual)


def _driven_rlc(f0=1e6):
    return parse_netlist(f"""V1 in 0 DC 0 SIN(0 1 {f0}) AC 1
R1 in a 50
L1 a out 10u
C1 out 0 1n
RL out 0 50
""")


class TestRunPss:
    def test_fundamental_matches_ac_solve(self):
        f0 = 1e6
        c = _driven_rlc(f0)
        ss = run_pss(c, f0, tol=1e-5)
        op = dc_operating_point(c)
        ac = ac_solve(c, op, [f0])
        # AC drive is 1 V at 0 deg; SIN(0 1 f) is 1 V at -90 deg
        expected = ac.signals["v(out)"][0] * cmath.exp(-1j * math.pi / 2)
        got = ss.node_phasor("out")
        assert abs(got - expected) <= 1e-3 * abs(expected)

    def test_linear_circuit_has_no_harmonics(self):
        c = _driven_rlc()
        ss = run_pss(c, 1e6, tol=1e-5)
        fund = abs(ss.node_phasor("out", k=1))
        upper = max(abs(ss.node_phasor("out", k=k)) for k in range(2, 6))
        assert upper < 1e-4 * fund

    def test_mean_power_parseval(self):
        # time-domain mean square equals the harmonic sum
        c = _driven_rlc()
        ss = run_pss(c, 1e6, tol=1e-6)
        v = ss.waveform("v(out)")
        lhs = np.mean(v ** 2)
        dc = abs(ss.node_phasor("out", k=0)) ** 2
        acsum = 0.5 * sum(abs(ss.node_phasor("out", k=k)) ** 2
                          for k in range(1, max(ss.bins) + 1))
        assert lhs == pytest.approx(dc + acsum, rel=1e-6)

    def test_dc_only_circuit_settles_immediately(self):
        c = parse_netlist("V1 a 0 DC 1\nR1 a b 1k\nR2 b 0 1k\n")
        ss = run_pss(c, 1e6, tol=1e-6)
        assert ss.periods_run <= 2
        assert abs(ss.node_phasor("b", k=0)) == pytest.approx(0.5, abs=1e-6)
        assert abs(ss.node_phasor("b", k=1)) < 1e-9

    def test_non_settlement_raises_with_trace(self):
        # 0.9999 MHz drive analyzed at 1 MHz never becomes periodic
        c = parse_netlist("""V1 in 0 DC 0 SIN(0 1 0.9999meg)
R1 in a 50
C1 a 0 1n
""")
        with pytest.raises(NonSettlementError) as err:
            run_pss(c, 1e6, tol=1e-9, max_periods=10)
        # one residual per period-over-period comparison
        assert len(err.value.residual_trace) == 9

    def test_invalid_fundamental(self):
        from rfsim.largesignal import PssError
        with pytest.raises(PssError):
            run_pss(_driven_rlc(), -1.0)


class TestPowerAndEfficiency:
    def test_power_dbm_scale(self):
        assert power_dbm(1e-3) == pytest.approx(0.0)
        assert power_dbm(1.0) == pytest.approx(30.0)
        assert power_dbm(0.0) == -math.inf

    def test_output_power_into_load(self):
        # 1 V amplitude across 50 ohm: 10 mW -> 10 dBm
        c = parse_netlist("V1 out 0 DC 0 SIN(0 1 1meg)\nRL out 0 50\n")
        ss = run_pss(c, 1e6, tol=1e-6)
        assert output_power_dbm(ss, ("out", "0"), 50.0) == pytest.approx(
            10.0, abs=1e-3)

    def test_efficiency_of_resistive_load(self):
        # DC supply into a resistor: all DC power, drain_eff = 0 at RF
        c = parse_netlist("V1 a 0 DC 2\nR1 a 0 100\n")
        ss = run_pss(c, 1e6, tol=1e-6)
        eff = efficiency(ss, 0.0)
        assert eff["pdc"] == pytest.approx(4.0 / 100.0, rel=1e-6)
        assert eff["drain_eff"] == 0.0

    def test_efficiency_bounded_by_one(self):
        from rfsim.refbench import classe_netlist
        ss = run_pss(classe_netlist("reference"), 1e6, tol=1e-4,
                     max_periods=300)
        pout = 10 ** (output_power_dbm(ss, ("out", "0"), 5.0) / 10) * 1e-3
        eff = efficiency(ss, pout)
        assert 0.0 < eff["drain_eff"] <= 1.0
        assert eff["pae"] <= eff["drain_eff"] + 1e-12

    def test_power_report_json_keys(self):
        rep = PowerReport(pout_dbm=1.0, pdc_w=2.0, drain_eff=0.5, pae=0.4,
                          zvs_residual_v=0.01)
        assert set(rep.to_dict()) == {"pout_dbm", "pdc_w", "drain_eff",
                                      "pae", "zvs_residual_v"}


class TestZvsResidual:
    def test_soft_switched_reference_is_small(self):
        from rfsim.refbench import classe_netlist
        ss = run_pss(classe_netlist("reference"), 1e6, tol=1e-4,
                     max_periods=300, samples_per_period=512)
        assert zvs_residual(ss, "s1") < 0.05   # 5% of the 1 V supply

    def test_requires_a_switch_element(self):
        ss = run_pss(_driven_rlc(), 1e6, tol=1e-4)
        with pytest.raises(KeyError):
            zvs_residual(ss, "s1")


class TestTwoToneIp3:
    POLY_BENCH = """* cubic transconductor into 50 ohm
VT1 a 0 DC 0 SIN(0 0.01 10meg) tone=1
VT2 b a DC 0 SIN(0 0.01 11meg) tone=2
P1 out 0 b 0 a1=10 a3=-1
RL out 0 50
"""

    def test_polynomial_oracle(self):
        # closed form: iip3_amp^2 = (4/3)|a1/a3| on the summed drive
        c = parse_netlist(self.POLY_BENCH)
        res = two_tone_ip3(c, 10e6, 11e6, [-40, -35, -30, -25, -20],
                           ("out", "0"))
        a_iip3 = math.sqrt(4.0 / 3.0 * 10.0 / 1.0)
        expected = power_dbm(a_iip3 ** 2 / (2 * 50.0))
        assert res.iip3_dbm == pytest.approx(expected, abs=0.1)
        assert res.oip3_dbm > res.iip3_dbm

    def test_im3_slope_near_three(self):
        c = parse_netlist(self.POLY_BENCH)
        res = two_tone_ip3(c, 10e6, 11e6, [-40, -30, -20], ("out", "0"))
        slope = (res.p_im3_dbm[-1] - res.p_im3_dbm[0]) / 20.0
        assert 2.9 <= slope <= 3.1

    def test_linear_element_immeasurably_linear(self):
        c = parse_netlist("""VT1 a 0 DC 0 SIN(0 0.01 10meg) tone=1
VT2 b a DC 0 SIN(0 0.01 11meg) tone=2
P1 out 0 b 0 a1=10 a3=0
RL out 0 50
""")
        res = two_tone_ip3(c, 10e6, 11e6, [-40, -30, -20], ("out", "0"))
        assert res.immeasurably_linear
        assert res.iip3_dbm is None
        assert all(p <= DBM_FLOOR for p in res.p_im3_dbm)

    def test_equal_tones_rejected(self):
        with pytest.raises(ValueError):
            two_tone_ip3(parse_netlist(self.POLY_BENCH), 1e6, 1e6, [-30],
                         ("out", "0"))

    def test_too_fine_tone_spacing_rejected(self):
        c = parse_netlist(self.POLY_BENCH)
        with pytest.raises(ValueError):
            two_tone_ip3(c, 1.000001e9, 1e9, [-30], ("out", "0"),
                         samples_budget=1 << 12)

    def test_result_json_keys(self):
        res = Ip3Result([-30.0], [0.0], [-60.0], 10.0, 20.0, [15.0])
        d = res.to_dict()
        assert d["iip3_dbm"] == 10.0
        assert d["oip3_dbm"] == 20.0
        assert not d["immeasurably_linear"]
