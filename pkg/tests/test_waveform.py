"""Hermite dense output, initial guesses and the grid-point distance."""

import numpy as np
import pytest

from wfrsim.model import NeuronParams, NeuronState
from wfrsim.waveform import (ConstantWaveform, HermiteWaveform, TemplateWaveform,
                             WaveformDomainError, constant_waveform,
                             dump_waveform_csv, eval_waveform, hermite_basis,
                             initial_guess, waveform_max_diff)


class TestHermiteBasis:
    def test_left_endpoint(self):
        assert hermite_basis(0.0) == (1.0, 0.0, 0.0, 0.0)

    def test_right_endpoint(self):
        assert hermite_basis(1.0) == (0.0, 1.0, 0.0, 0.0)

    def test_midpoint(self):
        assert hermite_basis(0.5) == (0.5, 0.5, 0.125, -0.125)

    def test_partition_of_unity(self, rng):
        th = rng.uniform(0.0, 1.0, size=500)
        p1, p2, _, _ = hermite_basis(th)
        assert np.allclose(p1 + p2, 1.0, atol=1e-15)

    def test_domain_checked(self):
        with pytest.raises(ValueError):
            hermite_basis(1.5)


class TestEvalWaveform:
    def test_grid_points_exact(self, rng):
        vals = rng.normal(size=6)
        ders = rng.normal(size=6)
        w = HermiteWaveform(2.0, 0.1, vals, ders)
        for u in range(6):
            assert eval_waveform(w, 2.0 + 0.1 * u) == pytest.approx(vals[u], abs=1e-14)

    def test_cubic_segment_midpoint(self):
        # segment of y = t^3 on [0, 1]: values 0, 1 and slopes 0, 3
        w = HermiteWaveform(0.0, 1.0, [0.0, 1.0], [0.0, 3.0])
        assert w.eval(0.5) == pytest.approx(0.125, abs=1e-15)

    def test_constant_kind(self):
        w = constant_waveform(-42.0, 0.0, 2.0)
        assert w.kind == "constant"
        ts = np.linspace(0.0, 2.0, 17)
        assert np.all(w.eval(ts) == -42.0)

    def test_outside_interval_raises(self):
        w = constant_waveform(0.0, 0.0, 1.0)
        with pytest.raises(WaveformDomainError):
            w.eval(1.5)

    def test_cubic_reproduction_random(self, rng):
        # criterion: cubic polynomials reproduced to <= 1e-12 relative at
        # 1000 random points
        t0, h, n = -1.0, 0.25, 8
        grid = t0 + h * np.arange(n + 1)
        worst = 0.0
        for _ in range(50):
            coef = rng.normal(size=4)
            poly = np.polynomial.Polynomial(coef)
            dpoly = poly.deriv()
            w = HermiteWaveform(t0, h, poly(grid), dpoly(grid))
            ts = rng.uniform(t0, t0 + n * h, size=20)
            exact = poly(ts)
            got = w.eval(ts)
            scale = np.maximum(np.abs(exact), 1.0)
            worst = max(worst, np.max(np.abs(got - exact) / scale))
        assert worst <= 1e-12

    def test_fourth_order_convergence(self):
        # smooth non-polynomial target; observed order >= 3.5
        t_end = 5.0
        f = lambda t: np.sin(2.0 * np.pi * t / 5.0)
        df = lambda t: (2.0 * np.pi / 5.0) * np.cos(2.0 * np.pi * t / 5.0)
        errs = []
        hs = (0.2, 0.1, 0.05, 0.025)
        probe = np.linspace(0.0, t_end, 4001)
        for h in hs:
            n = int(round(t_end / h))
            grid = h * np.arange(n + 1)
            w = HermiteWaveform(0.0, h, f(grid), df(grid))
            errs.append(np.max(np.abs(w.eval(probe) - f(probe))))
        orders = [np.log2(errs[k] / errs[k + 1]) for k in range(len(hs) - 1)]
        assert min(orders) >= 3.5

    def test_segment_accessor(self):
        w = HermiteWaveform(0.0, 0.5, [1.0, 2.0, 4.0], [0.1, 0.2, 0.3])
        seg = w.segment(1)
        assert (seg.t_left, seg.t_right) == (0.5, 1.0)
        assert (seg.y_left, seg.y_right, seg.f_left, seg.f_right) == (2.0, 4.0, 0.2, 0.3)
        with pytest.raises(IndexError):
            w.segment(2)

    def test_nonfinite_coefficients_rejected(self):
        with pytest.raises(ValueError):
            HermiteWaveform(0.0, 0.1, [0.0, float("nan")], [0.0, 0.0])


class TestInitialGuess:
    def test_subthreshold_constant(self, template):
        st = NeuronState(v=-70.0, m=0.05, h=0.6, n=0.3)
        w = initial_guess(st, template, 0.0, 1.0, 0.1)
        assert w.kind == "constant"
        assert w.eval(0.37) == -70.0

    def test_detection_disabled_constant(self, template):
        st = NeuronState(v=-30.0, m=0.9, h=0.3, n=0.4)
        w = initial_guess(st, template, 0.0, 1.0, 0.1, spike_detection=False)
        assert w.kind == "constant"

    def test_suprathreshold_rising(self, template):
        # rising state: high sodium activation, strong depolarizing drive
        st = NeuronState(v=-30.0, m=0.6, h=0.55, n=0.35)
        w = initial_guess(st, template, 0.0, 1.0, 0.1)
        assert w.kind == "spike_template"
        assert w.rising
        assert w.tau0 <= template.peak_time
        assert w.eval(0.0) == pytest.approx(-30.0, abs=0.5)

    def test_suprathreshold_falling(self, template):
        # falling state: sodium inactivated, potassium wide open
        st = NeuronState(v=-30.0, m=0.2, h=0.05, n=0.7)
        w = initial_guess(st, template, 0.0, 1.0, 0.1)
        assert w.kind == "spike_template"
        assert not w.rising
        assert w.tau0 >= template.peak_time
        # the falling branch keeps falling
        assert w.eval(0.3) < -30.0


class TestWaveformMaxDiff:
    def test_identical_zero(self):
        grid = 0.1 * np.arange(1, 11)
        a = constant_waveform(3.0, 0.0, 1.0)
        assert waveform_max_diff(a, a, grid) == 0.0

    def test_constant_offset(self):
        grid = 0.1 * np.arange(1, 11)
        a = constant_waveform(0.0, 0.0, 1.0)
        b = constant_waveform(1.0, 0.0, 1.0)
        assert waveform_max_diff(a, b, grid) == 1.0

    def test_grid_only_distance_analytic(self):
        # sin(t) vs sin(t) + 1e-4 t on [0, 1]: the grid-point distance is
        # exactly 1e-4 * max(grid) = 1e-4
        h = 0.1
        grid_full = h * np.arange(11)
        f1, d1 = np.sin(grid_full), np.cos(grid_full)
        f2 = np.sin(grid_full) + 1e-4 * grid_full
        d2 = np.cos(grid_full) + 1e-4
        a = HermiteWaveform(0.0, h, f1, d1)
        b = HermiteWaveform(0.0, h, f2, d2)
        got = waveform_max_diff(a, b, h * np.arange(1, 11))
        assert abs(got - 1e-4) < 1e-12

    def test_mismatched_intervals_raise(self):
        a = constant_waveform(0.0, 0.0, 1.0)
        b = constant_waveform(0.0, 0.0, 2.0)
        with pytest.raises(ValueError):
            waveform_max_diff(a, b, [0.5])


class TestTemplateWaveform:
    def test_replays_template(self, template):
        tau0 = template.time_offset(template.v_spike, rising=True)
        w = TemplateWaveform(template, tau0, True, 10.0, 1.0)
        ts = 10.0 + np.linspace(0.0, 1.0, 7)
        expect = template.value_at(tau0 + (ts - 10.0))
        assert np.allclose(w.eval(ts), expect, atol=1e-14)

    def test_csv_dump(self, tmp_path, template):
        w = HermiteWaveform(0.0, 0.5, [0.0, 1.0, 0.5], [1.0, -1.0, 0.0])
        path = tmp_path / "wave.csv"
        dump_waveform_csv(w, path, n_samples=11)
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (11, 3)
        assert data[0, 1] == pytest.approx(0.0)
