"""Dense-output waveforms exchanged between subsystems.

A waveform represents one neuron's membrane potential over one iteration
interval as a continuous function of time. Three kinds exist: cubic Hermite
segments built from grid values and derivatives (what iterations publish),
constant extrapolation (the subthreshold initial guess), and spike-template
replay (the suprathreshold initial guess). Waveforms are immutable once
published and evaluation is pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import NeuronState, SpikeShapeTemplate, hh_rhs


class WaveformDomainError(ValueError):
    """Evaluation time outside the waveform's iteration interval."""


def hermite_basis(theta):
    """The four cubic Hermite basis polynomials at theta in [0, 1].

    p1, p2 weight the endpoint values, p3, p4 the endpoint derivatives
    (scaled by the interval length).
    """
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > 1.0):
        raise ValueError("theta must lie in [0, 1]")
    th2 = th * th
    th3 = th2 * th
    p1 = 1.0 - 3.0 * th2 + 2.0 * th3
    p2 = 3.0 * th2 - 2.0 * th3
    p3 = th - 2.0 * th2 + th3
    p4 = th3 - th2
    if np.isscalar(theta):
        return float(p1), float(p2), float(p3), float(p4)
    return p1, p2, p3, p4


@dataclass(frozen=True)
class WaveformSegment:
    """One h-interval of a Hermite waveform: endpoint values and derivatives."""

    t_left: float
    t_right: float
    y_left: float
    y_right: float
    f_left: float
    f_right: float


class Waveform:
    """Common interface: a continuous V(t) on [t0, t0 + T]."""

    kind = "abstract"

    def __init__(self, t0: float, T: float):
        if T <= 0.0:
            raise ValueError("interval length must be positive")
        self.t0 = float(t0)
        self.T = float(T)

    def _check(self, t):
        eps = 1e-9 * max(1.0, abs(self.t0) + self.T)
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t0 - eps) or np.any(t > self.t0 + self.T + eps):
            raise WaveformDomainError("evaluation outside iteration interval")
        return t

    def eval(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.eval(t)

    def same_interval(self, other: "Waveform") -> bool:
        eps = 1e-9 * max(1.0, abs(self.t0) + self.T)
        return abs(self.t0 - other.t0) <= eps and abs(self.T - other.T) <= eps


class ConstantWaveform(Waveform):
    kind = "constant"

    def __init__(self, value: float, t0: float, T: float):
        super().__init__(t0, T)
        self.value = float(value)

    def eval(self, t):
        t = self._check(t)
        out = np.full_like(t, self.value, dtype=float)
        return float(out) if out.ndim == 0 else out


class HermiteWaveform(Waveform):
    """Cubic Hermite segments on the h-grid from values and derivatives."""

    kind = "hermite"

    def __init__(self, t0: float, h: float, values, derivs):
        values = np.asarray(values, dtype=float)
        derivs = np.asarray(derivs, dtype=float)
        if values.ndim != 1 or values.shape != derivs.shape or values.size < 2:
            raise ValueError("need matching 1-d arrays of at least two grid points")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(derivs))):
            raise ValueError("non-finite waveform coefficients")
        self.h = float(h)
        self.values = values
        self.derivs = derivs
        self.n = values.size - 1
        super().__init__(t0, self.n * self.h)

    def segment(self, u: int) -> WaveformSegment:
        if not 0 <= u < self.n:
            raise IndexError("segment index out of range")
        return WaveformSegment(
            t_left=self.t0 + u * self.h, t_right=self.t0 + (u + 1) * self.h,
            y_left=float(self.values[u]), y_right=float(self.values[u + 1]),
            f_left=float(self.derivs[u]), f_right=float(self.derivs[u + 1]))

    def eval(self, t):
        t = self._check(t)
        x = (t - self.t0) / self.h
        u = np.clip(np.floor(x).astype(np.int64), 0, self.n - 1)
        th = np.clip(x - u, 0.0, 1.0)
        p1, p2, p3, p4 = hermite_basis(th)
        out = (self.values[u] * p1 + self.values[u + 1] * p2
               + self.h * (self.derivs[u] * p3 + self.derivs[u + 1] * p4))
        return float(out) if out.ndim == 0 else out

    def derivative(self, t):
        """dV/dt of the interpolant (used only for debugging dumps)."""
        t = self._check(t)
        x = (t - self.t0) / self.h
        u = np.clip(np.floor(x).astype(np.int64), 0, self.n - 1)
        th = np.clip(x - u, 0.0, 1.0)
        th2 = th * th
        dp1 = (-6.0 * th + 6.0 * th2) / self.h
        dp2 = (6.0 * th - 6.0 * th2) / self.h
        dp3 = 1.0 - 4.0 * th + 3.0 * th2
        dp4 = 3.0 * th2 - 2.0 * th
        out = (self.values[u] * dp1 + self.values[u + 1] * dp2
               + self.derivs[u] * dp3 + self.derivs[u + 1] * dp4)
        return float(out) if out.ndim == 0 else out


class TemplateWaveform(Waveform):
    """Spike-template replay anchored at a lookup offset into the template."""

    kind = "spike_template"

    def __init__(self, template: SpikeShapeTemplate, tau0: float, rising: bool,
                 t0: float, T: float):
        super().__init__(t0, T)
        self.template = template
        self.tau0 = float(tau0)
        self.rising = bool(rising)

    def eval(self, t):
        t = self._check(t)
        return self.template.value_at(self.tau0 + (t - self.t0))


def constant_waveform(y0: float, t0: float, T: float) -> ConstantWaveform:
    """The classic constant initial guess."""
    return ConstantWaveform(y0, t0, T)


def eval_waveform(w: Waveform, t):
    """Functional form of waveform evaluation (delegates to the object)."""
    return w.eval(t)


def initial_guess(state: NeuronState, template: SpikeShapeTemplate | None,
                  t0: float, T: float, h: float,
                  spike_detection: bool = True) -> Waveform:
    """Extrapolation waveform for iteration zero.

    Below the spike-detection threshold (or with detection disabled) the
    membrane potential is held constant; above it the precomputed spike shape
    is replayed from the offset matching the current V, on the rising branch
    when dV/dt >= 0 and on the falling branch otherwise.
    """
    if (not spike_detection) or template is None or state.v < template.v_spike:
        return ConstantWaveform(state.v, t0, T)
    dvdt = float(hh_rhs(state, template.params)[0])
    rising = dvdt >= 0.0
    tau0 = template.time_offset(min(state.v, template.peak_v), rising=rising)
    return TemplateWaveform(template, tau0, rising, t0, T)


def waveform_max_diff(a: Waveform, b: Waveform, grid) -> float:
    """Max absolute difference at the supplied grid points (not a sup-norm)."""
    if not a.same_interval(b):
        raise ValueError("waveforms cover different iteration intervals")
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return 0.0
    return float(np.max(np.abs(a.eval(grid) - b.eval(grid))))


def dump_waveform_csv(w: Waveform, path, n_samples: int = 101):
    """Debug dump: sampled t, V and dV/dt of one waveform."""
    ts = w.t0 + np.linspace(0.0, w.T, n_samples)
    vs = np.atleast_1d(w.eval(ts))
    if isinstance(w, HermiteWaveform):
        ds = np.atleast_1d(w.derivative(ts))
    elif isinstance(w, ConstantWaveform):
        ds = np.zeros_like(vs)
    else:
        ds = np.gradient(vs, ts)
    data = np.column_stack([ts, vs, ds])
    np.savetxt(path, data, delimiter=",", header="t_ms,v_mv,dvdt_mv_per_ms", comments="")
