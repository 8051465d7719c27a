"""Waveform-relaxation engine.

Per iteration interval the engine solves every neuron against the frozen
waveforms of the previous sweep (Jacobi, parallel) or of the current sweep
for lower-indexed neurons (Gauss-Seidel, sequential), until successive
membrane-potential waveforms agree at the grid points within ``wfr_tol``.
The non-iterative baseline is the degenerate case: one sweep per h-step
against the initial-guess extrapolations, never iterated.

A separate pure-Python relaxer for small dense systems supports the Picard
splitting, which needs full-state waveforms and is therefore not available
for neuron networks.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import _kernels
from .model import NeuronParams, NeuronState, build_spike_template, hh_rhs
from .rk import FEHLBERG45, ButcherTableau, GridSolution, StepController, integrate_interval
from .waveform import (ConstantWaveform, HermiteWaveform, TemplateWaveform,
                       waveform_max_diff)

SCHEMES = ("jacobi", "gauss_seidel", "picard", "non_iterative")


class ConfigurationError(ValueError):
    """Inconsistent relaxation setup (missing inputs, bad scheme, ...)."""


class SolverFailureError(RuntimeError):
    """The adaptive solver failed for one subsystem."""

    def __init__(self, neuron: int, t: float, reason: str = "step size underflow"):
        self.neuron = neuron
        self.t = t
        super().__init__(f"{reason} for neuron {neuron} in interval starting at t={t} ms")


@dataclass
class WfrConfig:
    """Iteration control: interval length T, tolerance, scheme and spike guess."""

    interval: float = 1.0       # T in ms, integer multiple of h
    tol: float = 1e-6           # wfr_tol in mV
    max_iterations: int = 15
    scheme: str = "jacobi"
    spike_detection: bool = True

    def __post_init__(self):
        if self.interval <= 0.0:
            raise ValueError("iteration interval must be positive")
        if self.tol <= 0.0:
            raise ValueError("wfr_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    def steps_per_interval(self, h: float) -> int:
        n = int(round(self.interval / h))
        if n < 1 or abs(n * h - self.interval) > 1e-9 * max(1.0, self.interval):
            raise ValueError("iteration interval must be a positive integer multiple of h")
        return n


@dataclass
class IterationStats:
    """Measured iteration counts and communication rounds, one entry per interval."""

    iterations: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    wall_times: list = field(default_factory=list)

    def record(self, iters: int, conv: bool, wall: float):
        self.iterations.append(int(iters))
        self.converged.append(bool(conv))
        self.wall_times.append(float(wall))

    @property
    def n_intervals(self) -> int:
        return len(self.iterations)

    @property
    def total_rounds(self) -> int:
        # one waveform exchange per sweep
        return int(sum(self.iterations))

    @property
    def mean_iterations(self) -> float:
        return self.total_rounds / self.n_intervals if self.iterations else 0.0

    @property
    def converged_fraction(self) -> float:
        return sum(self.converged) / self.n_intervals if self.converged else 1.0

    @property
    def total_wall(self) -> float:
        return float(sum(self.wall_times))

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("interval,iterations,converged,wall_s\n")
            for k, (it, cv, w) in enumerate(zip(self.iterations, self.converged,
                                                self.wall_times)):
                fh.write(f"{k},{it},{int(cv)},{w:.6e}\n")


_template_cache: dict = {}


def cached_template(params: NeuronParams, resolution: float = 1e-3):
    key = (params, resolution)
    if key not in _template_cache:
        _template_cache[key] = build_spike_template(params, resolution)
    return _template_cache[key]


def converged(curr, prev, wfr_tol: float, grid) -> bool:
    """All neurons' successive waveforms agree within wfr_tol at the grid points."""
    if len(curr) != len(prev):
        raise ValueError("iteration snapshots differ in size")
    return all(waveform_max_diff(c, p, grid) <= wfr_tol for c, p in zip(curr, prev))


# ---------------------------------------------------------------------------
# the neuron-network engine
# ---------------------------------------------------------------------------

class RelaxationEngine:
    """Relaxation sweeps for one network, backed by the compiled kernels.

    Holds the packed parameter matrix, the CSR gap-junction adjacency, the
    spike-shape templates and reusable sweep buffers. Jacobi sweeps may be
    distributed over a thread pool in contiguous neuron blocks; results are
    bit-identical for any worker count because every neuron's solve depends
    only on the frozen previous-sweep snapshot.
    """

    def __init__(self, params_list, gap_junctions, h: float, config: WfrConfig,
                 rk_atol: float = 1e-6, rk_rtol: float = 0.0,
                 tableau: ButcherTableau = FEHLBERG45, workers: int = 1,
                 dt_min: float = 1e-9, safety: float = 0.9,
                 growth: float = 5.0, shrink: float = 0.2):
        self.params_list = list(params_list)
        self.v = len(self.params_list)
        self.h = float(h)
        self.config = config
        self.workers = max(1, int(workers))
        self.tableau = tableau
        self.rk_tol = float(rk_atol) + float(rk_rtol)
        self.dt_min = dt_min
        self.dt_max = self.h
        self.safety = safety
        self.growth = growth
        self.shrink = shrink

        self.PP = np.stack([p.as_array() for p in self.params_list])
        self.v_spike = np.array([p.v_spike for p in self.params_list])

        # undirected gap junctions -> CSR adjacency in both directions
        nbrs = [[] for _ in range(self.v)]
        for i, j, g in gap_junctions:
            if not (0 <= i < self.v and 0 <= j < self.v) or i == j:
                raise ConfigurationError(f"bad gap junction ({i}, {j})")
            if g < 0.0:
                raise ConfigurationError("gap conductance must be non-negative")
            nbrs[i].append((j, g))
            nbrs[j].append((i, g))
        ptr = np.zeros(self.v + 1, dtype=np.int64)
        idx, gs = [], []
        for i in range(self.v):
            nbrs[i].sort()  # fixed neighbor order keeps sums deterministic
            for j, g in nbrs[i]:
                idx.append(j)
                gs.append(g)
            ptr[i + 1] = len(idx)
        self.nbr_ptr = ptr
        self.nbr_idx = np.array(idx, dtype=np.int64) if idx else np.zeros(0, dtype=np.int64)
        self.nbr_g = np.array(gs) if gs else np.zeros(0)
        self.has_gaps = self.nbr_idx.size > 0

        # spike-shape templates, one per distinct parameter set
        self.templates = None
        self.tpl_v2d, self.tpl_res, self.tpl_row, _ = _kernels.empty_template_tables()
        if config.spike_detection:
            uniq = {}
            rows = np.zeros(self.v, dtype=np.int64)
            for i, p in enumerate(self.params_list):
                if p not in uniq:
                    uniq[p] = len(uniq)
                rows[i] = uniq[p]
            tpls = [None] * len(uniq)
            for p, r in uniq.items():
                tpls[r] = cached_template(p)
            lmax = max(t.v.size for t in tpls)
            table = np.empty((len(tpls), lmax))
            for r, t in enumerate(tpls):
                table[r, : t.v.size] = t.v
                table[r, t.v.size:] = t.v[-1]  # constant continuation past the end
            self.templates = tpls
            self.tpl_v2d = table
            self.tpl_res = tpls[0].resolution
            self.tpl_row = rows

        self._kind_hermite = np.full(self.v, _kernels.KIND_HERMITE, dtype=np.int64)
        self._executor = None
        self._buffers = {}

    # -- infrastructure ------------------------------------------------------

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _blocks(self):
        w = min(self.workers, self.v)
        bounds = np.linspace(0, self.v, w + 1).astype(int)
        return [(int(bounds[k]), int(bounds[k + 1])) for k in range(w)
                if bounds[k] < bounds[k + 1]]

    def _bufs(self, n_steps):
        if n_steps not in self._buffers:
            def mk():
                return (np.empty((self.v, n_steps + 1, 5)),
                        np.empty((self.v, n_steps + 1, 5)),
                        np.empty((self.v, 5)))
            self._buffers[n_steps] = (mk(), mk(),
                                      np.empty((self.v, 2), dtype=np.int64),
                                      np.empty(self.v, dtype=np.int64))
        return self._buffers[n_steps]

    def _sweep_args(self, Y0, syn, t0, n_steps, kind, vals, ders, tau0, out,
                    counts, status):
        out_y, out_f, y_end = out
        return (Y0, self.PP, t0, self.h, n_steps, syn,
                self.tableau.a, self.tableau.b, self.tableau.b_hat, self.tableau.c,
                self.rk_tol, self.safety, self.dt_min, self.dt_max,
                self.growth, self.shrink, self.tableau.error_exponent,
                self.nbr_ptr, self.nbr_idx, self.nbr_g,
                kind, vals, ders, self.tpl_v2d, self.tpl_res, self.tpl_row, tau0,
                out_y, out_f, y_end, counts, status)

    def _sweep(self, Y0, syn, t0, n_steps, kind, vals, ders, tau0, out,
               counts, status, lo=0, hi=None):
        args = self._sweep_args(Y0, syn, t0, n_steps, kind, vals, ders, tau0,
                                out, counts, status)
        hi = self.v if hi is None else hi
        blocks = self._blocks() if (lo, hi) == (0, self.v) else [(lo, hi)]
        if len(blocks) == 1:
            _kernels.sweep_block(blocks[0][0], blocks[0][1], *args)
        else:
            if self._executor is None:
                self._executor = ThreadPoolExecutor(max_workers=self.workers)
            futs = [self._executor.submit(_kernels.sweep_block, b0, b1, *args)
                    for b0, b1 in blocks]
            for f in futs:
                f.result()
        if np.any(status[lo:hi] != _kernels.STATUS_OK):
            bad = lo + int(np.flatnonzero(status[lo:hi] != _kernels.STATUS_OK)[0])
            raise SolverFailureError(bad, t0)

    # -- initial guesses -----------------------------------------------------

    def _guess(self, Y, t0, n_steps):
        """Extrapolation guess for iteration zero (constant or spike template).

        Returns (kind, vals, ders, tau0, grid values of the guess).
        """
        kind = np.full(self.v, _kernels.KIND_CONSTANT, dtype=np.int64)
        vals = np.zeros((self.v, n_steps + 1))
        ders = np.zeros((self.v, n_steps + 1))
        tau0 = np.zeros(self.v)
        vals[:, 0] = Y[:, 0]
        grid = np.repeat(Y[:, 0:1], n_steps + 1, axis=1)
        if self.templates is not None:
            hot = np.flatnonzero(Y[:, 0] >= self.v_spike)
            rel = self.h * np.arange(n_steps + 1)
            for i in hot:
                tpl = self.templates[self.tpl_row[i]]
                st = NeuronState.from_array(Y[i], t=t0)
                dvdt = float(hh_rhs(st, self.params_list[i])[0])
                tau0[i] = tpl.time_offset(min(Y[i, 0], tpl.peak_v), rising=dvdt >= 0.0)
                kind[i] = _kernels.KIND_TEMPLATE
                grid[i] = tpl.value_at(tau0[i] + rel)
        return kind, vals, ders, tau0, grid

    # -- interval drivers ----------------------------------------------------

    def run_relax_interval(self, Y, syn, t0, n_steps):
        """Iterate one interval [t0, t0 + n_steps*h] to convergence.

        Y is the (v, 5) state block at t0. Returns (end states, grid V, grid
        dV/dt, sweeps used, converged flag); the grids belong to the final
        iteration. Every sweep restarts from Y and re-solves the interval
        against the snapshot of the previous sweep.
        """
        scheme = self.config.scheme
        if scheme == "picard":
            raise ConfigurationError(
                "picard splitting needs full-state waveforms; it is only "
                "supported by the toy-system relaxer")
        if scheme == "non_iterative":
            return self.run_noniter_steps(Y, syn, t0, n_steps)

        buf_a, buf_b, counts, status = self._bufs(n_steps)
        kind, vals, ders, tau0, prev_grid = self._guess(Y, t0, n_steps)

        if not self.has_gaps:
            # no inter-subsystem dependence: the first sweep is the solution
            self._sweep(Y, syn, t0, n_steps, kind, vals, ders, tau0, buf_a,
                        counts, status)
            return (buf_a[2].copy(), buf_a[0][:, :, 0].copy(),
                    buf_a[1][:, :, 0].copy(), 1, True)

        gs = scheme == "gauss_seidel"
        if gs:
            work_kind, work_vals, work_ders = kind.copy(), vals.copy(), ders.copy()

        tol = self.config.tol
        conv = False
        m = 0
        pair = (buf_a, buf_b)
        out = buf_a
        while m < self.config.max_iterations:
            out = pair[m % 2]
            if gs:
                for i in range(self.v):
                    self._sweep(Y, syn, t0, n_steps, work_kind, work_vals,
                                work_ders, tau0, out, counts, status, lo=i, hi=i + 1)
                    work_kind[i] = _kernels.KIND_HERMITE
                    work_vals[i] = out[0][i, :, 0]
                    work_ders[i] = out[1][i, :, 0]
            else:
                self._sweep(Y, syn, t0, n_steps, kind, vals, ders, tau0, out,
                            counts, status)
                kind = self._kind_hermite
                vals = out[0][:, :, 0]
                ders = out[1][:, :, 0]
            m += 1
            cur_grid = out[0][:, :, 0]
            if _kernels.max_grid_diff(cur_grid, prev_grid, n_steps) <= tol:
                conv = True
                break
            prev_grid = cur_grid  # view into `out`; next sweep writes the other buffer
        return (out[2].copy(), out[0][:, :, 0].copy(), out[1][:, :, 0].copy(),
                m, conv)

    def run_noniter_steps(self, Y, syn, t0, n_steps):
        """One sweep per h-step against frozen extrapolations (no iteration).

        Matches the signature of run_relax_interval; the iteration count
        returned is the number of communication rounds, i.e. n_steps.
        """
        grid_v = np.empty((self.v, n_steps + 1))
        grid_f = np.empty((self.v, n_steps + 1))
        grid_v[:, 0] = Y[:, 0]
        buf_a, _, counts, status = self._bufs(1)
        Ycur = Y
        for u in range(n_steps):
            tu = t0 + u * self.h
            kind, vals, ders, tau0, _ = self._guess(Ycur, tu, 1)
            self._sweep(Ycur, np.ascontiguousarray(syn[:, u: u + 1]), tu, 1,
                        kind, vals, ders, tau0, buf_a, counts, status)
            grid_f[:, u] = buf_a[1][:, 0, 0]
            Ycur = buf_a[2].copy()
            grid_v[:, u + 1] = Ycur[:, 0]
        grid_f[:, n_steps] = buf_a[1][:, 1, 0]
        return Ycur, grid_v, grid_f, n_steps, True


# ---------------------------------------------------------------------------
# spec-level operations on plain network objects
# ---------------------------------------------------------------------------

def _encode_inputs(inputs, conductances, t0, T, h, n_steps):
    """Pack neighbor waveforms into the kernel snapshot layout (self = row 0)."""
    order = sorted(conductances)
    missing = [j for j in order if j not in inputs]
    if missing:
        raise ConfigurationError(f"missing neighbor waveform for neuron(s) {missing}")
    rows = len(order) + 1
    kind = np.full(rows, _kernels.KIND_CONSTANT, dtype=np.int64)
    vals = np.zeros((rows, n_steps + 1))
    ders = np.zeros((rows, n_steps + 1))
    tau0 = np.zeros(rows)
    tpl_row = np.zeros(rows, dtype=np.int64)
    templates = []
    eps = 1e-9 * max(1.0, abs(t0) + T)
    for r, j in enumerate(order, start=1):
        w = inputs[j]
        if abs(w.t0 - t0) > eps or w.t0 + w.T < t0 + T - eps:
            raise ConfigurationError(f"waveform of neuron {j} does not cover the interval")
        if isinstance(w, ConstantWaveform):
            vals[r, 0] = w.value
        elif isinstance(w, HermiteWaveform):
            if abs(w.h - h) > 1e-12 or w.n < n_steps:
                raise ConfigurationError("hermite input waveforms must live on the same h-grid")
            kind[r] = _kernels.KIND_HERMITE
            vals[r] = w.values[: n_steps + 1]
            ders[r] = w.derivs[: n_steps + 1]
        elif isinstance(w, TemplateWaveform):
            kind[r] = _kernels.KIND_TEMPLATE
            tau0[r] = w.tau0
            if w.template not in templates:
                templates.append(w.template)
            tpl_row[r] = templates.index(w.template)
        else:
            raise ConfigurationError(f"unsupported waveform kind {w.kind!r}")
    if templates:
        res = templates[0].resolution
        if any(t.resolution != res for t in templates):
            raise ConfigurationError("template inputs must share one resolution")
        lmax = max(t.v.size for t in templates)
        table = np.empty((len(templates), lmax))
        for r, t in enumerate(templates):
            table[r, : t.v.size] = t.v
            table[r, t.v.size:] = t.v[-1]
    else:
        table, res, _, _ = _kernels.empty_template_tables()
    g = np.array([float(conductances[j]) for j in order])
    idx = np.arange(1, rows, dtype=np.int64)
    return kind, vals, ders, tau0, table, res, tpl_row, g, idx


def solve_subsystem(params: NeuronParams, y_start: NeuronState, inputs,
                    conductances, t0: float, T: float, h: float, *,
                    rk_atol: float = 1e-6, tableau: ButcherTableau = FEHLBERG45,
                    syn_slots=None) -> tuple[GridSolution, HermiteWaveform]:
    """Integrate one neuron over [t0, t0+T] against its neighbors' waveforms.

    ``inputs`` maps neighbor id -> waveform, ``conductances`` neighbor id ->
    gap conductance (nS). The gap input at every solver stage time t* is
    sum_j g_j (w_j(t*) - V_self). Returns the grid solution and the neuron's
    published Hermite membrane-potential waveform.
    """
    n_steps = int(round(T / h))
    if n_steps < 1 or abs(n_steps * h - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a positive integer multiple of h")
    kind, vals, ders, tau0, table, res, tpl_row, g, idx = _encode_inputs(
        inputs, conductances, t0, T, h, n_steps)
    rows = idx.size + 1
    ptr = np.zeros(rows + 1, dtype=np.int64)
    ptr[1:] = idx.size  # neuron 0 sees all packed neighbors, the rest none
    Y = np.zeros((rows, 5))
    Y[0] = y_start.as_array()
    PP = np.repeat(params.as_array()[None, :], rows, axis=0)
    syn = np.zeros((rows, n_steps))
    if syn_slots is not None:
        syn[0] = np.asarray(syn_slots, dtype=float)
    out_y = np.empty((rows, n_steps + 1, 5))
    out_f = np.empty((rows, n_steps + 1, 5))
    y_end = np.empty((rows, 5))
    counts = np.zeros((rows, 2), dtype=np.int64)
    status = np.zeros(rows, dtype=np.int64)
    _kernels.sweep_block(0, 1, Y, PP, t0, h, n_steps, syn,
                         tableau.a, tableau.b, tableau.b_hat, tableau.c,
                         rk_atol, 0.9, 1e-9, h, 5.0, 0.2, tableau.error_exponent,
                         ptr, idx, g, kind, vals, ders, table, res, tpl_row, tau0,
                         out_y, out_f, y_end, counts, status)
    if status[0] != _kernels.STATUS_OK:
        raise SolverFailureError(0, t0)
    times = t0 + h * np.arange(n_steps + 1)
    sol = GridSolution(times=times, ys=out_y[0].copy(), fs=out_f[0].copy(),
                       n_accepted=int(counts[0, 0]), n_rejected=int(counts[0, 1]))
    wave = HermiteWaveform(t0, h, out_y[0, :, 0].copy(), out_f[0, :, 0].copy())
    return sol, wave


def _engine_for(network, h, config, workers=1, rk_atol=1e-6,
                tableau=FEHLBERG45) -> RelaxationEngine:
    params = [nr.params for nr in network.neurons]
    gaps = [(gj.i, gj.j, gj.g) for gj in network.gap_junctions]
    return RelaxationEngine(params, gaps, h, config, rk_atol=rk_atol,
                            tableau=tableau, workers=workers)


def run_interval(network, states, spike_inputs, t0: float, h: float,
                 config: WfrConfig, *, workers: int = 1, rk_atol: float = 1e-6,
                 tableau: ButcherTableau = FEHLBERG45):
    """Relax one iteration interval of a network (spec-level convenience).

    ``states`` is a sequence of NeuronState at t0; ``spike_inputs`` an
    optional (v, T/h) array of frozen per-slot synaptic currents (pA), fixed
    before iterating. Returns (new states, published Hermite waveforms,
    IterationStats).
    """
    n_steps = config.steps_per_interval(h)
    v = len(network.neurons)
    Y = np.stack([s.as_array() for s in states])
    syn = np.zeros((v, n_steps)) if spike_inputs is None else \
        np.asarray(spike_inputs, dtype=float)
    if syn.shape != (v, n_steps):
        raise ValueError(f"spike inputs must have shape {(v, n_steps)}")
    stats = IterationStats()
    tic = time.monotonic()
    with _engine_for(network, h, config, workers, rk_atol, tableau) as eng:
        Y_new, grid_v, grid_f, iters, conv = eng.run_relax_interval(Y, syn, t0, n_steps)
    wall = time.monotonic() - tic
    if config.scheme == "non_iterative":
        for _ in range(iters):  # one single-sweep interval per h-step
            stats.record(1, True, wall / iters)
    else:
        stats.record(iters, conv, wall)
    t_end = t0 + n_steps * h
    waves = [HermiteWaveform(t0, h, grid_v[i], grid_f[i]) for i in range(v)]
    new_states = [NeuronState.from_array(Y_new[i], t=t_end) for i in range(v)]
    return new_states, waves, stats


def non_iterative_interval(network, states, t0: float, h: float,
                           spike_detection: bool = True, n_steps: int = 1, *,
                           rk_atol: float = 1e-6):
    """March ``n_steps`` h-steps with one communication per step, no iteration.

    Returns (new states, grid V array of shape (v, n_steps + 1)).
    """
    cfg = WfrConfig(interval=h, scheme="non_iterative",
                    spike_detection=spike_detection)
    v = len(network.neurons)
    Y = np.stack([s.as_array() for s in states])
    syn = np.zeros((v, n_steps))
    with _engine_for(network, h, cfg, rk_atol=rk_atol) as eng:
        Y_new, grid_v, _, _, _ = eng.run_noniter_steps(Y, syn, t0, n_steps)
    t_end = t0 + n_steps * h
    return [NeuronState.from_array(Y_new[i], t=t_end) for i in range(v)], grid_v


# ---------------------------------------------------------------------------
# toy-system relaxer (supports the Picard splitting)
# ---------------------------------------------------------------------------

class ToyWaveformRelaxation:
    """Waveform relaxation on a small dense ODE system, one scalar per subsystem.

    Every component is exchanged as a waveform, so the Picard splitting
    F(t, y, z) = f(t, z) is available in addition to Jacobi and Gauss-Seidel.
    Used to study convergence behavior on systems with known solutions.
    """

    def __init__(self, f, dim: int, scheme: str = "jacobi",
                 tableau: ButcherTableau = FEHLBERG45, rk_atol: float = 1e-12):
        if scheme not in ("jacobi", "gauss_seidel", "picard"):
            raise ConfigurationError(f"unsupported toy scheme {scheme!r}")
        self.f = f
        self.dim = dim
        self.scheme = scheme
        self.tableau = tableau
        self.rk_atol = rk_atol

    def _solve_component(self, i, waves, y0i, t0, T, h):
        f, scheme = self.f, self.scheme

        def rhs(t, yi):
            z = np.array([w.eval(t) for w in waves])
            if scheme != "picard":
                z[i] = yi[0]
            return np.array([f(t, z)[i]])

        ctrl = StepController(atol=self.rk_atol, dt_max=h)
        sol = integrate_interval(self.tableau, ctrl, rhs, np.array([y0i]), t0, T, h)
        return HermiteWaveform(t0, h, sol.ys[:, 0], sol.fs[:, 0])

    def run_window(self, y0, t0: float, T: float, h: float, tol: float = 1e-10,
                   max_iterations: int = 30, record_history: bool = False):
        """Iterate [t0, t0+T] to convergence from the constant initial guess.

        Returns a namespace with grid times, final grid values, iteration
        count, converged flag and (optionally) per-iteration grid values
        including the m = 0 guess.
        """
        y0 = np.asarray(y0, dtype=float)
        n = int(round(T / h))
        grid = t0 + h * np.arange(n + 1)
        waves = [ConstantWaveform(y0[j], t0, T) for j in range(self.dim)]
        vals = np.repeat(y0[None, :], n + 1, axis=0)
        history = [vals.copy()] if record_history else None
        conv = False
        m = 0
        while m < max_iterations:
            prev_vals = vals
            if self.scheme == "gauss_seidel":
                new_waves = list(waves)
                for j in range(self.dim):
                    new_waves[j] = self._solve_component(j, new_waves, y0[j], t0, T, h)
            else:
                new_waves = [self._solve_component(j, waves, y0[j], t0, T, h)
                             for j in range(self.dim)]
            vals = np.column_stack([w.values for w in new_waves])
            waves = new_waves
            m += 1
            if record_history:
                history.append(vals.copy())
            if np.max(np.abs(vals[1:] - prev_vals[1:])) <= tol:
                conv = True
                break
        return SimpleNamespace(grid=grid, ys=vals, iterations=m, converged=conv,
                               history=history, waveforms=waves)
