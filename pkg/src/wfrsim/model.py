"""Hodgkin-Huxley point-neuron dynamics, gap currents and the spike-shape template.

Units follow the usual point-neuron simulator conventions: membrane potential
in mV, time in ms, conductances in nS, currents in pA, capacitance in pF.
With these, nS * mV = pA and pA / pF = mV / ms, so no conversion factors
appear in the equations.

The state vector of one neuron is ``[V, m, h, n, i_syn]`` where ``i_syn`` is
the dedicated input-current variable that chemical-synapse events jump
instantaneously (and which decays nowhere: it is constant between jumps).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

STATE_DIM = 5

# index layout of the packed parameter vector used by the compiled kernels
_PP_FIELDS = ("c_m", "g_na", "g_k", "g_l", "e_na", "e_k", "e_l", "i_ext")


class TemplateConstructionError(RuntimeError):
    """The probe stimulus failed to produce a usable action potential."""


@dataclass(frozen=True)
class NeuronParams:
    """Hodgkin-Huxley parameters plus the two spike thresholds.

    Defaults are the classic squid-axon model at the conventional
    point-neuron scale (pF/nS/mV/pA/ms unit system; membrane area 1e-4 cm2).
    At this scale the cell rests near -65 mV, stays subthreshold for drive
    currents of a few hundred pA and fires repetitively around 70-90 Hz for
    drives above roughly 1 nA. ``theta`` is the spike-registration threshold
    checked on the coarse grid; ``v_spike`` is the lower spike-detection
    threshold above which the membrane potential is guaranteed to belong to
    an action potential.
    """

    c_m: float = 100.0      # pF
    g_na: float = 12000.0   # nS
    g_k: float = 3600.0     # nS
    g_l: float = 30.0       # nS
    e_na: float = 50.0      # mV
    e_k: float = -77.0      # mV
    e_l: float = -54.402    # mV
    theta: float = 0.0      # mV, spike registration
    v_spike: float = -40.0  # mV, spike detection
    i_ext: float = 0.0      # pA, constant external drive

    def __post_init__(self):
        if self.c_m <= 0.0:
            raise ValueError("membrane capacitance must be positive")
        if min(self.g_na, self.g_k, self.g_l) < 0.0:
            raise ValueError("conductances must be non-negative")
        if self.v_spike > self.theta:
            raise ValueError("spike detection threshold must not exceed the "
                             "registration threshold (detection is suprathreshold)")

    def as_array(self) -> np.ndarray:
        """Packed float vector consumed by the compiled kernels."""
        return np.array([getattr(self, f) for f in _PP_FIELDS], dtype=np.float64)


@dataclass(frozen=True)
class NeuronState:
    """State of one neuron: membrane potential, gating variables, input current.

    ``t`` records the grid time the state belongs to; it does not enter the
    dynamics. Gating variables are clamped to [0, 1] on construction.
    """

    v: float
    m: float
    h: float
    n: float
    i_syn: float = 0.0  # pA
    t: float = 0.0      # ms

    def __post_init__(self):
        for name in ("v", "m", "h", "n", "i_syn"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite state component {name!r}")
        object.__setattr__(self, "m", min(max(self.m, 0.0), 1.0))
        object.__setattr__(self, "h", min(max(self.h, 0.0), 1.0))
        object.__setattr__(self, "n", min(max(self.n, 0.0), 1.0))

    def as_array(self) -> np.ndarray:
        return np.array([self.v, self.m, self.h, self.n, self.i_syn], dtype=np.float64)

    @classmethod
    def from_array(cls, y, t: float = 0.0) -> "NeuronState":
        return cls(v=float(y[0]), m=float(y[1]), h=float(y[2]), n=float(y[3]),
                   i_syn=float(y[4]), t=t)


# ---------------------------------------------------------------------------
# channel rate functions (1/ms, V in mV)
# ---------------------------------------------------------------------------

def _vtrap(z: float) -> float:
    # z / (1 - exp(-z)), regularized at z = 0
    if abs(z) < 1e-6:
        return 1.0 + 0.5 * z
    return z / (-math.expm1(-z))


def alpha_m(v: float) -> float:
    return _vtrap((v + 40.0) / 10.0)


def beta_m(v: float) -> float:
    return 4.0 * math.exp(-(v + 65.0) / 18.0)


def alpha_h(v: float) -> float:
    return 0.07 * math.exp(-(v + 65.0) / 20.0)


def beta_h(v: float) -> float:
    return 1.0 / (1.0 + math.exp(-(v + 35.0) / 10.0))


def alpha_n(v: float) -> float:
    return 0.1 * _vtrap((v + 55.0) / 10.0)


def beta_n(v: float) -> float:
    return 0.125 * math.exp(-(v + 65.0) / 80.0)


def gating_steady_state(v: float) -> tuple[float, float, float]:
    """Equilibrium (m, h, n) at a clamped membrane potential."""
    m = alpha_m(v) / (alpha_m(v) + beta_m(v))
    h = alpha_h(v) / (alpha_h(v) + beta_h(v))
    n = alpha_n(v) / (alpha_n(v) + beta_n(v))
    return m, h, n


def membrane_current(v: float, m: float, h: float, n: float, params: NeuronParams) -> float:
    """Total ionic current (pA), positive = depolarizing omitted sign convention.

    Returns -I_Na - I_K - I_L, i.e. the intrinsic contribution to C_m dV/dt.
    """
    i_na = params.g_na * m ** 3 * h * (v - params.e_na)
    i_k = params.g_k * n ** 4 * (v - params.e_k)
    i_l = params.g_l * (v - params.e_l)
    return -i_na - i_k - i_l


def hh_rhs(state: NeuronState, params: NeuronParams,
           gap_input: float = 0.0, syn_input: float = 0.0) -> np.ndarray:
    """Time derivative of the neuron state (per ms).

    ``gap_input`` and ``syn_input`` are external currents in pA; they enter
    dV/dt additively as (gap + syn + i_syn + I_ext) / C_m.
    """
    if not (math.isfinite(gap_input) and math.isfinite(syn_input)):
        raise ValueError("non-finite input current")
    v, m, h, n = state.v, state.m, state.h, state.n
    i_in = gap_input + syn_input + state.i_syn + params.i_ext
    dv = (membrane_current(v, m, h, n, params) + i_in) / params.c_m
    dm = alpha_m(v) * (1.0 - m) - beta_m(v) * m
    dh = alpha_h(v) * (1.0 - h) - beta_h(v) * h
    dn = alpha_n(v) * (1.0 - n) - beta_n(v) * n
    return np.array([dv, dm, dh, dn, 0.0])


def gap_current(g: float, v_self: float, v_other: float) -> float:
    """Ohmic gap-junction current g * (V_other - V_self) in pA.

    Antisymmetric under exchanging the two sides of the junction.
    """
    if g < 0.0:
        raise ValueError("gap conductance must be non-negative")
    return g * (v_other - v_self)


def apply_spike(state: NeuronState, weight: float) -> NeuronState:
    """Instantaneous synaptic jump: add ``weight`` (pA) to the input current.

    Membrane potential and gating variables are untouched; jumps are linear,
    so two spikes of weight w equal one spike of weight 2w.
    """
    return replace(state, i_syn=state.i_syn + weight)


def detect_threshold_crossing(v_prev: float, v_curr: float, theta: float) -> bool:
    """Upward grid crossing: previous value at or below theta, current above."""
    return v_prev <= theta < v_curr


def resting_state(params: NeuronParams, v_lo: float = -95.0, v_hi: float = -45.0) -> NeuronState:
    """Resting fixed point (gating at steady state, zero net membrane current).

    The external drive ``params.i_ext`` is included in the balance. The
    steady-state current can have several roots (rest, threshold saddle,
    depolarized branch); the lowest one, the actual rest, is returned.
    """

    def balance(v):
        m, h, n = gating_steady_state(v)
        return membrane_current(v, m, h, n, params) + params.i_ext

    grid = np.linspace(v_lo, v_hi, 201)
    vals = [balance(v) for v in grid]
    bracket = None
    for k in range(len(grid) - 1):
        if vals[k] == 0.0:
            bracket = (grid[k], grid[k])
            break
        if vals[k] * vals[k + 1] < 0.0:
            bracket = (grid[k], grid[k + 1])
            break
    if bracket is None:
        raise ValueError("no resting potential bracketed in "
                         f"[{v_lo}, {v_hi}] mV for these parameters")
    v = bracket[0] if bracket[0] == bracket[1] else \
        brentq(balance, bracket[0], bracket[1], xtol=1e-13, rtol=8.9e-16)
    m, h, n = gating_steady_state(v)
    return NeuronState(v=v, m=m, h=h, n=n)


def zero_input_rest(params: NeuronParams) -> NeuronState:
    """Resting state of the same neuron with the external drive switched off."""
    return resting_state(replace(params, i_ext=0.0))


# ---------------------------------------------------------------------------
# spike-shape template
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpikeShapeTemplate:
    """Sampled shape of one canonical action potential.

    ``v`` holds the membrane potential sampled at ``resolution`` spacing over
    the suprathreshold excursion (plus a margin below ``v_spike`` on both
    ends). ``split`` is the index of the peak; samples up to it form the
    strictly rising branch, samples from it the strictly falling branch.
    The filtered branch tables support the inverse lookup V -> time offset.
    """

    params: NeuronParams
    resolution: float
    v: np.ndarray
    split: int
    t_rise: np.ndarray = field(repr=False)
    v_rise: np.ndarray = field(repr=False)
    t_fall: np.ndarray = field(repr=False)
    v_fall: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.v.size) * self.resolution

    @property
    def v_spike(self) -> float:
        return self.params.v_spike

    @property
    def peak_v(self) -> float:
        return float(self.v[self.split])

    @property
    def peak_time(self) -> float:
        return self.split * self.resolution

    @property
    def duration(self) -> float:
        return (self.v.size - 1) * self.resolution

    def value_at(self, tau):
        """Template V at time offset(s) tau; constant beyond either end."""
        x = np.asarray(tau, dtype=np.float64) / self.resolution
        i = np.clip(np.floor(x).astype(np.int64), 0, self.v.size - 2)
        frac = np.clip(x - i, 0.0, 1.0)
        out = self.v[i] * (1.0 - frac) + self.v[i + 1] * frac
        return float(out) if np.isscalar(tau) else out

    def time_offset(self, v0: float, rising: bool) -> float:
        """Inverse lookup: time offset at which the chosen branch takes value v0.

        Values above the template peak clamp to the peak offset.
        """
        if v0 >= self.peak_v:
            return self.peak_time
        if rising:
            return float(np.interp(v0, self.v_rise, self.t_rise))
        # falling branch is strictly decreasing; flip for np.interp
        return float(np.interp(v0, self.v_fall[::-1], self.t_fall[::-1]))


def _strictly_monotone(t: np.ndarray, v: np.ndarray, increasing: bool):
    keep = [0]
    for i in range(1, v.size):
        if (v[i] > v[keep[-1]]) if increasing else (v[i] < v[keep[-1]]):
            keep.append(i)
    idx = np.array(keep)
    return t[idx], v[idx]


def build_spike_template(params: NeuronParams, resolution: float = 1e-3,
                         probe_current: float | None = None, margin: float = 2.0,
                         max_probe_ms: float = 200.0) -> SpikeShapeTemplate:
    """Simulate one action potential at fine fixed step and extract its shape.

    The probe drives the neuron from rest with a step current so a spike is
    guaranteed; by default the neuron's own drive current is tried first (so
    the template matches the spikes it will be compared against) with strong
    fallback currents for subthreshold parameter sets. The trajectory
    segment with V >= v_spike - margin around the first spike becomes the
    template. Deterministic: fixed-step integration, no randomness.
    """
    if not (0.0 < resolution <= 1e-3):
        raise ValueError("template resolution must be in (0, 0.001] ms")
    if margin < 0.0:
        raise ValueError("margin must be non-negative")

    from . import _kernels  # deferred: numba compilation is costly at import

    y0 = zero_input_rest(params).as_array()
    n_total = int(round(max_probe_ms / resolution))
    v_cut = params.v_spike - margin
    if probe_current is not None:
        candidates = [probe_current]
    else:
        candidates = ([params.i_ext] if params.i_ext > 0.0 else []) + [700.0, 2000.0]
    above = np.zeros(0, dtype=np.int64)
    v_trace = None
    for probe in candidates:
        pp = replace(params, i_ext=probe).as_array()
        v_trace = _kernels.run_fixed_hh(y0, pp, n_total, resolution)
        above = np.flatnonzero(v_trace >= v_cut)
        if above.size and v_trace.max() > params.v_spike:
            break
    if above.size == 0:
        raise TemplateConstructionError("template construction failed: probe "
                                        "stimulus never reached the detection threshold")
    # contiguous suprathreshold excursions; prefer a late complete one, since
    # the first spike rises from rest and has a transient shape while later
    # spikes in the train are the stationary, recurring waveform
    gaps = np.flatnonzero(np.diff(above) > 1)
    starts = np.concatenate([[above[0]], above[gaps + 1]]) if gaps.size else above[:1]
    ends = np.concatenate([above[gaps] + 1, [above[-1] + 1]]) if gaps.size else \
        np.array([above[-1] + 1])
    complete = ends < v_trace.size
    if np.any(complete):
        pick = int(np.flatnonzero(complete)[-1])
    else:
        pick = 0
    i0, i1 = int(starts[pick]), int(ends[pick])
    seg = v_trace[i0:i1].copy()
    if seg.max() <= params.v_spike or seg.size < 4:
        raise TemplateConstructionError("template construction failed: no full "
                                        "action potential in the probe window")

    split = int(np.argmax(seg))
    t = np.arange(seg.size) * resolution
    t_rise, v_rise = _strictly_monotone(t[: split + 1], seg[: split + 1], increasing=True)
    t_fall, v_fall = _strictly_monotone(t[split:], seg[split:], increasing=False)
    if v_rise.size < 2 or v_fall.size < 2:
        raise TemplateConstructionError("template construction failed: degenerate "
                                        "rising or falling branch")
    return SpikeShapeTemplate(params=params, resolution=resolution, v=seg,
                              split=split, t_rise=t_rise, v_rise=v_rise,
                              t_fall=t_fall, v_fall=v_fall)


def template_extrapolate(template: SpikeShapeTemplate, v0: float, dvdt0: float,
                         horizon: float, step: float) -> np.ndarray:
    """Predicted V trajectory from a suprathreshold starting point.

    Anchors v0 on the rising branch if dvdt0 >= 0, else on the falling
    branch, then replays the template from that offset. Sampled at ``step``
    spacing out to ``horizon`` (inclusive); past the template end the final
    value continues constant.
    """
    if v0 < template.v_spike:
        raise ValueError("template extrapolation requires V >= the spike-detection "
                         "threshold; use constant extrapolation below it")
    if horizon <= 0.0 or step <= 0.0:
        raise ValueError("horizon and step must be positive")
    tau0 = template.time_offset(min(v0, template.peak_v), rising=dvdt0 >= 0.0)
    n = int(round(horizon / step))
    return template.value_at(tau0 + np.arange(n + 1) * step)
