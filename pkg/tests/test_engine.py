import math

import numpy as np
import pytest
import scipy.sparse

from rfsim import parse_netlist
from rfsim.engine import ac_solve, backend_name, compile_circuit, \
    dc_operating_point, transient
from rfsim.engine.solve import (SingularMatrixError, TopologyError,
                                solve_dense, solve_sparse)


class TestLinearSolvers:
    def test_dense_matches_numpy(self):
        rng = np.random.default_rng(7)
        A = rng.standard_normal((12, 12)) + 12 * np.eye(12)
        b = rng.standard_normal(12)
        assert solve_dense(A.copy(), b) == pytest.approx(
            np.linalg.solve(A, b), rel=1e-12)

    def test_dense_singular_reports_index(self):
        import warnings
        A = np.eye(4)
        A[2, 2] = 0.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(SingularMatrixError):
                solve_dense(A, np.ones(4))

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(11)
        A = rng.standard_normal((30, 30)) + 30 * np.eye(30)
        A[np.abs(A) < 1.0] = 0.0
        b = rng.standard_normal(30)
        xs = solve_sparse(scipy.sparse.csr_matrix(A), b)
        assert xs == pytest.approx(np.linalg.solve(A, b), rel=1e-10)

    def test_sparse_singular_detected(self):
        A = scipy.sparse.csr_matrix(np.diag([1.0, 0.0, 3.0]))
        with pytest.raises(SingularMatrixError):
            solve_sparse(A, np.ones(3))

    def test_sparse_accepts_dense_input(self):
        A = np.array([[2.0, 0.0], [0.0, 4.0]])
        assert solve_sparse(A, np.array([2.0, 4.0])) == pytest.approx([1, 1])


class TestDcOperatingPoint:
    def test_resistive_divider(self):
        c = parse_netlist("V1 in 0 DC 1\nR1 in out 1k\nR2 out 0 9k\n")
        op = dc_operating_point(c)
        assert op.v("out") == pytest.approx(0.9, abs=1e-9)
        assert op.v("in") == pytest.approx(1.0, abs=1e-12)

    def test_kcl_current_balance(self):
        c = parse_netlist("""V1 in 0 DC 2
R1 in a 1k
R2 a 0 2k
R3 a 0 2k
""")
        op = dc_operating_point(c)
        i_v1 = op.currents["v1"]
        assert i_v1 == pytest.approx(-(2.0 - op.v("a")) / 1e3, rel=1e-8)

    def test_diode_connected_nmos(self):
        # drain tied to gate, pulled to 1.8 V through 1 kohm:
        # 1.8 - vgs = R * (kp/2) (w/l) (vgs - vth)^2 (1 + lam vgs)
        c = parse_netlist(""".model nch nmos vth=0.5 kp=170u lambda=0
V1 vdd 0 DC 1.8
R1 vdd d 1k
M1 d d 0 0 nch w=10u l=1u
""")
        op = dc_operating_point(c)
        beta = 170e-6 * 10.0
        # independent solve of the quadratic, root in (vth, 1.8)
        a, b_, c_ = 1e3 * beta / 2, 1.0 - 1e3 * beta * 0.5, \
            1e3 * beta / 2 * 0.25 - 1.8
        vgs = (-b_ + math.sqrt(b_ * b_ - 4 * a * c_)) / (2 * a)
        assert 0.5 < vgs < 1.8
        assert op.v("d") == pytest.approx(vgs, abs=1e-6)
        assert op.regions["m1"] == "saturation"

    def test_source_only_circuit_is_topology_error(self):
        c = parse_netlist("V1 a 0 DC 1\nV2 b 0 DC 2\nC1 a b 1p\n")
        with pytest.raises(TopologyError):
            dc_operating_point(c)

    def test_gmin_ladder_reaches_stiff_circuit(self):
        # cascode with a floating intermediate node needs continuation
        c = parse_netlist(""".model nch nmos vth=0.5 kp=170u lambda=0.05
VDD vdd 0 DC 1.8
VG g 0 DC 1.8
VB b 0 DC 0.8
R1 vdd d2 30
M2 d2 g d1 0 nch w=0.3u l=0.6u f=66 m=24
M1 d1 b 0 0 nch w=0.3u l=0.6u f=66 m=24
""")
        op = dc_operating_point(c)
        assert 0.0 < op.v("d1") < op.v("d2") <= 1.8
        assert op.residual < 1e-9


class TestTransient:
    def test_rc_step_response(self):
        r, cap = 1e3, 1e-6
        tau = r * cap
        c = parse_netlist(f"""V1 in 0 DC 0 PULSE(0 1 0 1p 1p 1 2)
R1 in out {r}
C1 out 0 {cap}
""")
        wf = transient(c, tau / 1000, 5 * tau)
        ideal = 1.0 - np.exp(-wf.time / tau)
        err = np.sqrt(np.mean((wf["v(out)"] - ideal) ** 2))
        assert err < 1e-3

    def test_trapezoidal_order_two(self):
        r, cap = 1e3, 1e-6
        tau = r * cap
        c = parse_netlist(f"""V1 in 0 DC 0 PULSE(0 1 0 1p 1p 1 2)
R1 in out {r}
C1 out 0 {cap}
""")
        errs = []
        for div in (1000, 2000):
            wf = transient(c, tau / div, 5 * tau)
            ideal = 1.0 - np.exp(-wf.time / tau)
            errs.append(np.sqrt(np.mean((wf["v(out)"] - ideal) ** 2)))
        ratio = errs[0] / errs[1]
        assert 3.5 <= ratio <= 4.5

    def test_lc_oscillation_frequency_and_energy(self):
        # lossless 1 uH / 1 uF tank rung by a short current pulse
        l, cap = 1e-6, 1e-6
        f0 = 1.0 / (2 * math.pi * math.sqrt(l * cap))
        period = 1.0 / f0
        c = parse_netlist(f"""I1 0 b DC 0 PULSE(0 1m 0 1n 1n 100n 1)
C1 b 0 {cap}
L1 b 0 {l}
""")
        wf = transient(c, period / 400, 8 * period, initial="uic")
        v = wf["v(b)"]
        t = wf.time
        ring = t > 0.2e-6        # after the excitation pulse
        # trapezoidal integration must not create energy: the peak of
        # the last ring period cannot exceed the first ring period's
        first = np.abs(v[ring & (t < 0.2e-6 + period)]).max()
        last = np.abs(v[t > t[-1] - period]).max()
        assert last <= first * (1 + 1e-6)
        # upward zero crossings give the oscillation period
        vz, tz = v[ring], t[ring]
        crossings = tz[1:][(vz[:-1] < 0) & (vz[1:] >= 0)]
        meas = np.mean(np.diff(crossings))
        assert meas == pytest.approx(period, rel=2e-3)

    def test_switch_driven_divider(self):
        c = parse_netlist("""V1 in 0 DC 1
VC c 0 DC 0 PULSE(0 1.8 0 1n 1n 500n 1u)
R1 in out 100
S1 out 0 c 0 ron=100 roff=1e9 vt=0.9
""")
        wf = transient(c, 1e-9, 2e-6)
        v = wf["v(out)"]
        on = v[(wf.time > 0.3e-6) & (wf.time < 0.45e-6)]
        off = v[(wf.time > 0.8e-6) & (wf.time < 0.95e-6)]
        assert on.mean() == pytest.approx(0.5, abs=1e-3)
        assert off.mean() == pytest.approx(1.0, abs=1e-3)

    def test_initial_state_uic(self):
        c = parse_netlist("V1 in 0 DC 1\nR1 in out 1k\nC1 out 0 1u\n")
        wf = transient(c, 1e-5, 5e-3, initial="uic")
        assert wf["v(out)"][0] == 0.0
        assert wf["v(out)"][-1] == pytest.approx(1.0, abs=1e-2)

    def test_invalid_grid_rejected(self):
        c = parse_netlist("V1 in 0 DC 1\nR1 in 0 1k\n")
        with pytest.raises(ValueError):
            transient(c, 1e-3, 1e-6)


class TestAcAnalysis:
    def test_rc_lowpass_corner(self):
        r, cap = 1e3, 1e-9
        fc = 1.0 / (2 * math.pi * r * cap)
        c = parse_netlist(f"""V1 in 0 DC 0 AC 1
R1 in out {r}
C1 out 0 {cap}
""")
        op = dc_operating_point(c)
        res = ac_solve(c, op, [fc])
        h = res.signals["v(out)"][0]
        assert abs(h) == pytest.approx(1 / math.sqrt(2), rel=1e-9)
        assert math.degrees(np.angle(h)) == pytest.approx(-45.0, abs=1e-6)

    def test_linearity_in_drive(self):
        c1 = parse_netlist("V1 in 0 DC 0 AC 1\nR1 in out 1k\nC1 out 0 1n\n")
        c3 = parse_netlist("V1 in 0 DC 0 AC 3\nR1 in out 1k\nC1 out 0 1n\n")
        f = [1e5, 1e6, 1e7]
        op1, op3 = dc_operating_point(c1), dc_operating_point(c3)
        h1 = ac_solve(c1, op1, f).signals["v(out)"]
        h3 = ac_solve(c3, op3, f).signals["v(out)"]
        assert h3 == pytest.approx(3 * h1, rel=1e-12)

    def test_inductor_branch(self):
        # series RL: |V_R| at the corner frequency
        r, l = 50.0, 1e-6
        fc = r / (2 * math.pi * l)
        c = parse_netlist(f"V1 in 0 DC 0 AC 1\nL1 in out {l}\nR1 out 0 {r}\n")
        res = ac_solve(c, dc_operating_point(c), [fc])
        assert abs(res.signals["v(out)"][0]) == pytest.approx(
            1 / math.sqrt(2), rel=1e-9)

    def test_mosfet_small_signal_gain(self):
        # common-source stage: gain = -gm * (R || ro)
        c = parse_netlist(""".model nch nmos vth=0.5 kp=170u lambda=0.05
VDD vdd 0 DC 1.8
VG g 0 DC 0.8 AC 1
RD vdd d 1k
M1 d g 0 0 nch w=10u l=1u
""")
        op = dc_operating_point(c)
        res = ac_solve(c, op, [1e3])
        from rfsim.devices import ModelCard, MosGeometry, mosfet_ids
        card = ModelCard(name="nch", polarity="nmos", vth=0.5, kp=170e-6,
                         lam=0.05)
        ev = mosfet_ids(card, MosGeometry(10e-6, 1e-6), op.v("g"), op.v("d"))
        gain = -ev.gm / (1e-3 + ev.gds)
        assert res.signals["v(d)"][0].real == pytest.approx(gain, rel=1e-6)


class TestBackends:
    def test_backend_identifies_itself(self):
        assert backend_name() in ("python", "cython")

    def test_python_reference_agrees_with_active_backend(self):
        import importlib
        tr = importlib.import_module("rfsim.engine.transient")
        c = parse_netlist(""".model nch nmos vth=0.5 kp=170u lambda=0.05
VDD vdd 0 DC 1.8
VG g 0 DC 0 SIN(0 0.4 10meg)
RD vdd d 300
M1 d g 0 0 nch w=10u l=1u
CL d 0 1p
""")
        cc = compile_circuit(c)
        op = dc_operating_point(cc)
        h, n = 1e-9, 400
        results = {}
        for impl in (None, tr._impl):
            state = tr.initial_state(cc, op)
            out = np.empty((n, cc.n))
            saved = tr._impl
            tr._impl = impl
            try:
                tr.run_steps(tr.make_context(cc, h, backward_euler=True),
                             state, 1, out[:1])
                tr.run_steps(tr.make_context(cc, h), state, n - 1, out[1:])
            finally:
                tr._impl = saved
            results[impl is None] = out
        if tr._impl is None:
            pytest.skip("compiled backend not built")
        assert np.abs(results[True] - results[False]).max() < 1e-10
