import math

import numpy as np
import pytest

from rfsim.devices import (ModelCard, MosGeometry, SwitchModel, mosfet_ids,
                           switch_conductance)

NCH = ModelCard(name="nch", polarity="nmos", vth=0.5, kp=170e-6, lam=0.05)
PCH = ModelCard(name="pch", polarity="pmos", vth=0.5, kp=60e-6, lam=0.05)
GEOM = MosGeometry(w_finger=10e-6, l=1e-6)


class TestModelCards:
    def test_geometry_effective_width(self):
        g = MosGeometry(w_finger=0.3e-6, l=0.6e-6, fingers=66, mult=24)
        assert g.w_eff == pytest.approx(475.2e-6, rel=1e-12)

    def test_invalid_polarity(self):
        with pytest.raises(ValueError):
            ModelCard(name="x", polarity="cmos")

    def test_invalid_geometry(self):
        with pytest.raises(ValueError):
            MosGeometry(w_finger=-1e-6, l=1e-6)
        with pytest.raises(ValueError):
            MosGeometry(w_finger=1e-6, l=1e-6, fingers=0)

    def test_switch_model_validation(self):
        with pytest.raises(ValueError):
            SwitchModel(ron=-1.0, roff=1e6)
        with pytest.raises(ValueError):
            SwitchModel(ron=1e7, roff=1e6)   # ron must stay below roff


class TestMosfetRegions:
    def test_cutoff(self):
        ev = mosfet_ids(NCH, GEOM, vgs=0.3, vds=1.0)
        assert ev.ids == 0.0
        assert ev.gm == 0.0
        assert ev.region == "cutoff"

    def test_saturation_square_law(self):
        vgs, vds = 1.0, 1.5
        ev = mosfet_ids(NCH, GEOM, vgs, vds)
        beta = NCH.kp * GEOM.w_eff / GEOM.l
        expected = 0.5 * beta * (vgs - NCH.vth) ** 2 * (1 + NCH.lam * vds)
        assert ev.region == "saturation"
        assert ev.ids == pytest.approx(expected, rel=1e-12)

    def test_triode(self):
        ev = mosfet_ids(NCH, GEOM, vgs=1.5, vds=0.2)
        assert ev.region == "triode"
        assert ev.ids > 0
        assert ev.gds > 0

    def test_pmos_sign_symmetry(self):
        evn = mosfet_ids(NCH, GEOM, 1.0, 1.5)
        pch = ModelCard(name="p", polarity="pmos", vth=NCH.vth, kp=NCH.kp,
                        lam=NCH.lam)
        evp = mosfet_ids(pch, GEOM, -1.0, -1.5)
        assert evp.ids == pytest.approx(-evn.ids, rel=1e-12)
        assert evp.gm == pytest.approx(evn.gm, rel=1e-12)
        assert evp.gds == pytest.approx(evn.gds, rel=1e-12)

    def test_reverse_mode_symmetry(self):
        # drain/source swap: ids(vgs, vds) = -ids(vgs - vds, -vds)
        vgs, vds = 1.2, -0.8
        ev = mosfet_ids(NCH, GEOM, vgs, vds)
        fwd = mosfet_ids(NCH, GEOM, vgs - vds, -vds)
        assert ev.ids == pytest.approx(-fwd.ids, rel=1e-12)

    def test_continuity_at_saturation_boundary(self):
        vgs = 1.1
        vdsat = vgs - NCH.vth
        lo = mosfet_ids(NCH, GEOM, vgs, vdsat - 1e-9)
        hi = mosfet_ids(NCH, GEOM, vgs, vdsat + 1e-9)
        assert lo.ids == pytest.approx(hi.ids, rel=1e-6)
        assert lo.gm == pytest.approx(hi.gm, rel=1e-5)

    def test_continuity_at_threshold(self):
        lo = mosfet_ids(NCH, GEOM, NCH.vth - 1e-9, 1.0)
        hi = mosfet_ids(NCH, GEOM, NCH.vth + 1e-9, 1.0)
        assert lo.ids == pytest.approx(0.0, abs=1e-15)
        assert hi.ids == pytest.approx(0.0, abs=1e-12)


class TestMosfetGradients:
    """gm and gds must match central finite differences of ids."""

    BOUNDARY_MARGIN = 1e-3

    def _away_from_boundaries(self, vgs, vds):
        vov = vgs - NCH.vth
        return (abs(vov) > self.BOUNDARY_MARGIN
                and abs(vds) > self.BOUNDARY_MARGIN
                and abs(vds - vov) > self.BOUNDARY_MARGIN)

    def test_randomized_grid(self):
        rng = np.random.default_rng(42)
        d = 1e-6
        checked = 0
        while checked < 100:
            vgs = rng.uniform(-0.5, 2.0)
            vds = rng.uniform(-2.0, 2.0)
            if not self._away_from_boundaries(vgs, vds):
                continue
            ev = mosfet_ids(NCH, GEOM, vgs, vds)
            gm_fd = (mosfet_ids(NCH, GEOM, vgs + d, vds).ids
                     - mosfet_ids(NCH, GEOM, vgs - d, vds).ids) / (2 * d)
            gds_fd = (mosfet_ids(NCH, GEOM, vgs, vds + d).ids
                      - mosfet_ids(NCH, GEOM, vgs, vds - d).ids) / (2 * d)
            scale = max(abs(gm_fd), abs(gds_fd), 1e-12)
            assert abs(ev.gm - gm_fd) <= 1e-6 * scale + 1e-12
            assert abs(ev.gds - gds_fd) <= 1e-6 * scale + 1e-12
            checked += 1


class TestSwitch:
    SW = SwitchModel(ron=5.0, roff=1e6, vthresh=0.9, eps=0.01)

    def test_rail_conductances(self):
        assert switch_conductance(self.SW, 1.8) == pytest.approx(1 / 5.0)
        assert switch_conductance(self.SW, 0.0) == pytest.approx(1e-6)

    def test_geometric_mean_at_threshold(self):
        g = switch_conductance(self.SW, self.SW.vthresh)
        assert g == pytest.approx(math.sqrt((1 / 5.0) * 1e-6), rel=1e-9)

    def test_monotone_in_control_voltage(self):
        v = np.linspace(-1.0, 3.0, 2001)
        g = np.array([switch_conductance(self.SW, vi) for vi in v])
        assert np.all(np.diff(g) >= 0)
        assert g[0] == pytest.approx(1e-6)
        assert g[-1] == pytest.approx(0.2)

    def test_transition_width(self):
        lo = switch_conductance(self.SW, self.SW.vthresh - self.SW.eps)
        hi = switch_conductance(self.SW, self.SW.vthresh + self.SW.eps)
        assert lo == pytest.approx(1e-6, rel=1e-6)
        assert hi == pytest.approx(0.2, rel=1e-6)
