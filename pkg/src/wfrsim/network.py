"""Network topology, h-grid scheduling and the top-level simulation loop.

Spike interaction decouples neurons for the duration of the minimal synaptic
delay, so the simulation advances in windows of that length; gap junctions
couple continuously and are handled inside each window by the relaxation
engine. All spike times, delays and communicated values live on the fixed
h-grid.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .model import NeuronParams, NeuronState, zero_input_rest
from .rk import TABLEAUS
from .wfr import ConfigurationError, IterationStats, RelaxationEngine, WfrConfig


@dataclass(frozen=True)
class GapJunction:
    """Undirected ohmic coupling between two neurons (conductance in nS)."""

    i: int
    j: int
    g: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("gap junction endpoints must be distinct")
        if self.g < 0.0:
            raise ValueError("gap conductance must be non-negative")


@dataclass(frozen=True)
class SpikeConnection:
    """Delayed chemical synapse: weight in pA, delay in ms (multiple of h)."""

    source: int
    target: int
    weight: float
    delay: float

    def __post_init__(self):
        if self.delay <= 0.0:
            raise ValueError("synaptic delay must be positive")


@dataclass
class Neuron:
    params: NeuronParams
    initial_state: NeuronState | None = None  # None: rest at zero input


@dataclass
class Network:
    neurons: list
    gap_junctions: list = field(default_factory=list)
    spike_connections: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.neurons)

    def validate(self, h: float):
        v = self.size
        for gj in self.gap_junctions:
            if not (0 <= gj.i < v and 0 <= gj.j < v):
                raise ConfigurationError(f"gap junction ({gj.i}, {gj.j}) out of range")
        for sc in self.spike_connections:
            if not (0 <= sc.source < v and 0 <= sc.target < v):
                raise ConfigurationError(
                    f"spike connection ({sc.source}, {sc.target}) out of range")
            slots = round(sc.delay / h)
            if slots < 1 or abs(slots * h - sc.delay) > 1e-9 * max(1.0, sc.delay):
                raise ConfigurationError(
                    f"delay {sc.delay} ms is not a positive multiple of h = {h} ms")


def min_delay(network: Network, fallback: float | None = None) -> float:
    """Minimal synaptic delay d_min; gap-only networks fall back to the
    configured iteration interval (their communication window is free)."""
    if network.spike_connections:
        return min(sc.delay for sc in network.spike_connections)
    if fallback is None:
        raise ValueError("network has no spike connections; "
                         "pass the configured iteration interval as fallback")
    return fallback


@dataclass
class SimulationConfig:
    """Grid step, duration and solver/relaxation settings of one run."""

    h: float
    duration: float
    wfr: WfrConfig = field(default_factory=WfrConfig)
    record: list | None = None  # neuron ids, None records all
    workers: int = 1
    rk_atol: float = 1e-6
    tableau: str = "fehlberg45"

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("h must be positive")
        if self.duration < 0.0:
            raise ValueError("duration must be non-negative")
        n = round(self.duration / self.h)
        if abs(n * self.h - self.duration) > 1e-9 * max(1.0, self.duration):
            raise ValueError("duration must be an integer multiple of h")
        if self.tableau not in TABLEAUS:
            raise ValueError(f"unknown tableau {self.tableau!r}")

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.h)


class SpikeBuffer:
    """Ring of per-grid-slot spike event lists.

    Events are pushed at their arrival slot (emission slot + delay slots) and
    become readable only when the simulation reaches that slot; reading below
    the consumption floor is a programming error.
    """

    def __init__(self, depth: int):
        if depth < 1:
            raise ValueError("buffer depth must be positive")
        self.depth = depth
        self._slots = [[] for _ in range(depth)]
        self._floor = 0  # next slot allowed to be consumed

    def push(self, slot: int, target: int, weight: float):
        if slot < self._floor:
            raise ValueError(f"cannot schedule into consumed slot {slot}")
        if slot >= self._floor + self.depth:
            raise ValueError("spike buffer depth exceeded")
        self._slots[slot % self.depth].append((target, weight))

    def take(self, slot: int):
        if slot < self._floor:
            raise ValueError(f"slot {slot} already consumed")
        self._floor = slot + 1
        cell = self._slots[slot % self.depth]
        self._slots[slot % self.depth] = []
        return cell


@dataclass
class Recording:
    """Grid-aligned membrane traces and registered spikes."""

    times: np.ndarray
    neuron_ids: list
    v: np.ndarray                      # (len(neuron_ids), len(times))
    spikes: list = field(default_factory=list)  # (time, neuron id)

    def trace(self, neuron_id: int) -> np.ndarray:
        return self.v[self.neuron_ids.index(neuron_id)]

    def spike_times(self, neuron_id: int) -> np.ndarray:
        return np.array([t for t, i in self.spikes if i == neuron_id])

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("time_ms,neuron,v_mv\n")
            for r, nid in enumerate(self.neuron_ids):
                for t, vv in zip(self.times, self.v[r]):
                    fh.write(f"{t:.6f},{nid},{vv:.9f}\n")

    def spikes_to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("time_ms,neuron\n")
            for t, i in self.spikes:
                fh.write(f"{t:.6f},{i}\n")


def _initial_states(network: Network) -> np.ndarray:
    rest_cache = {}
    Y = np.empty((network.size, 5))
    for i, nr in enumerate(network.neurons):
        if nr.initial_state is not None:
            Y[i] = nr.initial_state.as_array()
        else:
            if nr.params not in rest_cache:
                rest_cache[nr.params] = zero_input_rest(nr.params).as_array()
            Y[i] = rest_cache[nr.params]
    return Y


def simulate(network: Network, config: SimulationConfig):
    """Run the window loop: deliver due spikes, relax each window, register
    threshold crossings and enqueue emitted spikes with their delays.

    Returns (Recording, IterationStats).
    """
    h = config.h
    network.validate(h)
    cfg = config.wfr
    t_slots = cfg.steps_per_interval(h)
    d_min = min_delay(network, fallback=cfg.interval)
    w_slots = round(d_min / h)
    if abs(w_slots * h - d_min) > 1e-9 * max(1.0, d_min) or w_slots < 1:
        raise ConfigurationError("d_min must be a positive integer multiple of h")
    if network.spike_connections:
        if cfg.interval > d_min + 1e-12:
            raise ConfigurationError("iteration interval must not exceed d_min")
        if w_slots % t_slots != 0:
            raise ConfigurationError("iteration interval must divide the d_min window")

    n_total = config.n_steps
    v = network.size
    Y = _initial_states(network)
    theta = np.array([nr.params.theta for nr in network.neurons])

    rec_ids = list(range(v)) if config.record is None else list(config.record)
    rec_rows = {nid: r for r, nid in enumerate(rec_ids)}
    times = h * np.arange(n_total + 1)
    rec_v = np.empty((len(rec_ids), n_total + 1))
    for nid, r in rec_rows.items():
        rec_v[r, 0] = Y[nid, 0]
    recording = Recording(times=times, neuron_ids=rec_ids, v=rec_v)
    stats = IterationStats()

    out_conns = [[] for _ in range(v)]
    max_d_slots = 1
    for sc in network.spike_connections:
        slots = round(sc.delay / h)
        out_conns[sc.source].append((sc.target, sc.weight, slots))
        max_d_slots = max(max_d_slots, slots)
    buffer = SpikeBuffer(depth=max_d_slots + w_slots + 2)

    engine = RelaxationEngine(
        [nr.params for nr in network.neurons],
        [(gj.i, gj.j, gj.g) for gj in network.gap_junctions],
        h, cfg, rk_atol=config.rk_atol, tableau=TABLEAUS[config.tableau],
        workers=config.workers)
    try:
        k0 = 0
        while k0 < n_total:
            w = min(w_slots, n_total - k0)
            syn = np.zeros((v, w))
            for u in range(w):
                for target, weight in buffer.take(k0 + u):
                    syn[target, u] += weight
            window_grid = np.empty((v, w + 1))
            window_grid[:, 0] = Y[:, 0]
            if cfg.scheme == "non_iterative":
                tic = time.monotonic()
                Y, grid_v, _, rounds, _ = engine.run_noniter_steps(
                    Y, syn, k0 * h, w)
                wall = time.monotonic() - tic
                window_grid[:, 1:] = grid_v[:, 1:]
                for _ in range(rounds):
                    stats.record(1, True, wall / rounds)
            else:
                c0 = 0
                while c0 < w:
                    cn = min(t_slots, w - c0)
                    tic = time.monotonic()
                    Y, grid_v, _, iters, conv = engine.run_relax_interval(
                        Y, np.ascontiguousarray(syn[:, c0: c0 + cn]),
                        (k0 + c0) * h, cn)
                    stats.record(iters, conv, time.monotonic() - tic)
                    window_grid[:, c0 + 1: c0 + cn + 1] = grid_v[:, 1:]
                    c0 += cn

            # registration at the first grid point after the upward crossing
            crossed = (window_grid[:, :-1] <= theta[:, None]) & \
                      (window_grid[:, 1:] > theta[:, None])
            for i, u in zip(*np.nonzero(crossed)):
                k_reg = k0 + int(u) + 1
                recording.spikes.append((k_reg * h, int(i)))
                for target, weight, slots in out_conns[i]:
                    arrival = k_reg + slots
                    if arrival <= n_total:
                        buffer.push(arrival, target, weight)

            for nid, r in rec_rows.items():
                rec_v[r, k0 + 1: k0 + w + 1] = window_grid[nid, 1:]
            k0 += w
    finally:
        engine.close()
    return recording, stats


def build_scaled_network(v: int, degree: int, total_g: float,
                         params: NeuronParams | None = None,
                         i_ext: float = 200.0) -> Network:
    """Deterministic ring lattice with fixed per-neuron accumulated conductance.

    Every neuron couples to its ``degree`` nearest ring neighbors with
    per-junction conductance total_g / degree, so the summed conductance per
    neuron equals total_g regardless of v and the single-neuron dynamics is
    independent of the network size. Odd degrees add the antipodal neighbor
    and need even v (the v = 2, degree = 1 pair is the smallest case).
    """
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if v <= degree:
        raise ValueError("need more neurons than the coupling degree")
    if degree % 2 == 1 and v % 2 == 1:
        raise ValueError("odd degree requires an even number of neurons")
    if total_g < 0.0:
        raise ValueError("total conductance must be non-negative")
    if params is None:
        params = NeuronParams(i_ext=i_ext)
    g_each = total_g / degree
    junctions = []
    for k in range(1, degree // 2 + 1):
        for i in range(v):
            junctions.append(GapJunction(i, (i + k) % v, g_each))
    if degree % 2 == 1:
        half = v // 2
        for i in range(half):
            junctions.append(GapJunction(i, i + half, g_each))
    neurons = [Neuron(params=params) for _ in range(v)]
    return Network(neurons=neurons, gap_junctions=junctions)
