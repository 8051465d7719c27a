"""Compiled numerical core: HH right-hand side, embedded RK window integration
and waveform evaluation, all as nopython numba kernels.

Everything here operates on plain float64 arrays so the kernels can be called
from worker threads with the GIL released. The object-level modules own the
types and contracts; these functions are their compiled backend.

Waveform snapshot encoding (one row per neuron):
  kind[j] == 0  constant:  value stored in vals[j, 0]
  kind[j] == 1  hermite:   grid values vals[j, :] and derivatives ders[j, :]
  kind[j] == 2  template:  shared table tpl_v[tpl_idx[j]] replayed from offset
                           tpl_tau0[j], sampled at tpl_res, constant past the end
"""

import math

import numpy as np
from numba import njit

KIND_CONSTANT = 0
KIND_HERMITE = 1
KIND_TEMPLATE = 2

STATUS_OK = 0
STATUS_UNDERFLOW = 1

_JIT = dict(cache=True, nogil=True, fastmath=False)


@njit(**_JIT)
def hh_rhs_arr(y, pp, i_couple, dy):
    """dy <- f(y) for state [V, m, h, n, i_syn]; i_couple is extra current in pA."""
    v = y[0]
    m = y[1]
    h = y[2]
    n = y[3]

    # squid-axon channel kinetics; z/(1 - exp(-z)) regularized at z = 0
    zm = (v + 40.0) * 0.1
    if abs(zm) < 1e-6:
        am = 1.0 + 0.5 * zm
    else:
        am = zm / (-math.expm1(-zm))
    bm = 4.0 * math.exp(-(v + 65.0) / 18.0)

    ah = 0.07 * math.exp(-(v + 65.0) * 0.05)
    bh = 1.0 / (1.0 + math.exp(-(v + 35.0) * 0.1))

    zn = (v + 55.0) * 0.1
    if abs(zn) < 1e-6:
        an = 0.1 * (1.0 + 0.5 * zn)
    else:
        an = 0.1 * zn / (-math.expm1(-zn))
    bn = 0.125 * math.exp(-(v + 65.0) / 80.0)

    i_na = pp[1] * m * m * m * h * (v - pp[4])
    i_k = pp[2] * n * n * n * n * (v - pp[5])
    i_l = pp[3] * (v - pp[6])

    dy[0] = (-i_na - i_k - i_l + pp[7] + y[4] + i_couple) / pp[0]
    dy[1] = am * (1.0 - m) - bm * m
    dy[2] = ah * (1.0 - h) - bh * h
    dy[3] = an * (1.0 - n) - bn * n
    dy[4] = 0.0


@njit(**_JIT)
def eval_waveform_row(j, t, t0, h, n_steps, kind, vals, ders,
                      tpl_v, tpl_res, tpl_idx, tpl_tau0):
    """Value of neuron j's published waveform at time t (t0 <= t <= t0 + n*h)."""
    k = kind[j]
    if k == KIND_CONSTANT:
        return vals[j, 0]
    if k == KIND_HERMITE:
        x = (t - t0) / h
        u = int(x)
        if u < 0:
            u = 0
        elif u > n_steps - 1:
            u = n_steps - 1
        th = x - u
        if th < 0.0:
            th = 0.0
        elif th > 1.0:
            th = 1.0
        th2 = th * th
        th3 = th2 * th
        p1 = 1.0 - 3.0 * th2 + 2.0 * th3
        p2 = 3.0 * th2 - 2.0 * th3
        p3 = th - 2.0 * th2 + th3
        p4 = th3 - th2
        return (vals[j, u] * p1 + vals[j, u + 1] * p2
                + h * (ders[j, u] * p3 + ders[j, u + 1] * p4))
    # spike template, linear interpolation on the shared uniform table
    row = tpl_idx[j]
    x = (tpl_tau0[j] + (t - t0)) / tpl_res
    last = tpl_v.shape[1] - 1
    if x <= 0.0:
        return tpl_v[row, 0]
    i = int(x)
    if i >= last:
        return tpl_v[row, last]
    fr = x - i
    return tpl_v[row, i] * (1.0 - fr) + tpl_v[row, i + 1] * fr


@njit(**_JIT)
def gap_input_at(i, t, v_self, nbr_ptr, nbr_idx, nbr_g, t0, h, n_steps,
                 kind, vals, ders, tpl_v, tpl_res, tpl_idx, tpl_tau0):
    lo = nbr_ptr[i]
    hi = nbr_ptr[i + 1]
    if lo == hi:
        return 0.0
    # the segment index and Hermite basis are shared by every neighbor
    x = (t - t0) / h
    u = int(x)
    if u < 0:
        u = 0
    elif u > n_steps - 1:
        u = n_steps - 1
    th = x - u
    if th < 0.0:
        th = 0.0
    elif th > 1.0:
        th = 1.0
    th2 = th * th
    th3 = th2 * th
    p1 = 1.0 - 3.0 * th2 + 2.0 * th3
    p2 = 3.0 * th2 - 2.0 * th3
    hp3 = h * (th - 2.0 * th2 + th3)
    hp4 = h * (th3 - th2)
    acc = 0.0
    for e in range(lo, hi):
        j = nbr_idx[e]
        k = kind[j]
        if k == KIND_HERMITE:
            w = (vals[j, u] * p1 + vals[j, u + 1] * p2
                 + ders[j, u] * hp3 + ders[j, u + 1] * hp4)
        elif k == KIND_CONSTANT:
            w = vals[j, 0]
        else:
            row = tpl_idx[j]
            xt = (tpl_tau0[j] + (t - t0)) / tpl_res
            last = tpl_v.shape[1] - 1
            if xt <= 0.0:
                w = tpl_v[row, 0]
            else:
                it = int(xt)
                if it >= last:
                    w = tpl_v[row, last]
                else:
                    fr = xt - it
                    w = tpl_v[row, it] * (1.0 - fr) + tpl_v[row, it + 1] * fr
        acc += nbr_g[e] * (w - v_self)
    return acc


@njit(**_JIT)
def solve_neuron_window(i, y0, pp, t0, h, n_steps, syn_row,
                        A, B, BH, C,
                        tol, safety, dt_min, dt_max, growth, shrink, expo,
                        nbr_ptr, nbr_idx, nbr_g,
                        kind, vals, ders, tpl_v, tpl_res, tpl_idx, tpl_tau0,
                        out_y, out_f, counts, scratch):
    """Adaptive embedded-RK march of one neuron over [t0, t0 + n_steps*h].

    Every h-grid point is an accepted step endpoint (steps truncate at the
    next grid point, never straddle it). out_y / out_f receive the state and
    right-hand side at each grid point; counts gets (accepted, rejected).
    ``scratch`` is an (stages + 3, 5) work array owned by the calling block
    (no allocations in the per-neuron hot path). Returns STATUS_OK or
    STATUS_UNDERFLOW.
    """
    s = B.shape[0]
    K = scratch[:s]
    yst = scratch[s]
    y = scratch[s + 1]
    ynew = scratch[s + 2]
    for c in range(5):
        y[c] = y0[c]

    for c in range(5):
        out_y[0, c] = y[c]
    ic = gap_input_at(i, t0, y[0], nbr_ptr, nbr_idx, nbr_g, t0, h, n_steps,
                      kind, vals, ders, tpl_v, tpl_res, tpl_idx, tpl_tau0) + syn_row[0]
    hh_rhs_arr(y, pp, ic, out_f[0])

    n_acc = 0
    n_rej = 0
    dt = min(dt_max, h)
    t = t0
    for u in range(n_steps):
        t_end = t0 + (u + 1) * h
        syn_u = syn_row[u]
        while t < t_end:
            rem = t_end - t
            if dt >= rem * (1.0 - 1e-10):
                dt_eff = rem
                land = True
            else:
                dt_eff = dt
                land = False

            for q in range(s):
                tq = t + C[q] * dt_eff
                for c in range(5):
                    yst[c] = y[c]
                for l in range(q):
                    aql = A[q, l]
                    if aql != 0.0:
                        for c in range(5):
                            yst[c] += dt_eff * aql * K[l, c]
                ic = gap_input_at(i, tq, yst[0], nbr_ptr, nbr_idx, nbr_g,
                                  t0, h, n_steps, kind, vals, ders,
                                  tpl_v, tpl_res, tpl_idx, tpl_tau0) + syn_u
                hh_rhs_arr(yst, pp, ic, K[q])

            err = 0.0
            for c in range(5):
                acc_b = 0.0
                acc_e = 0.0
                for l in range(s):
                    acc_b += B[l] * K[l, c]
                    acc_e += (B[l] - BH[l]) * K[l, c]
                ynew[c] = y[c] + dt_eff * acc_b
                sc = abs(y[c])
                if sc < 1.0:
                    sc = 1.0
                e = abs(dt_eff * acc_e) / sc
                if e > err:
                    err = e
                if not math.isfinite(ynew[c]):
                    err = math.inf

            accept = err <= tol
            if accept:
                for c in range(5):
                    y[c] = ynew[c]
                # keep gating inside [0, 1] (invariant region of the exact flow)
                for c in range(1, 4):
                    if y[c] < 0.0:
                        y[c] = 0.0
                    elif y[c] > 1.0:
                        y[c] = 1.0
                t = t_end if land else t + dt_eff
                n_acc += 1
            else:
                n_rej += 1
                if dt_eff <= dt_min * (1.0 + 1e-12):
                    counts[0] = n_acc
                    counts[1] = n_rej
                    return STATUS_UNDERFLOW

            if err == 0.0:
                fac = growth
            else:
                fac = safety * (tol / err) ** expo
                if fac > growth:
                    fac = growth
                elif fac < shrink:
                    fac = shrink
            ndt = dt_eff * fac
            if land and accept and ndt < dt:
                ndt = dt  # boundary truncation must not shrink the controller
            if ndt < dt_min:
                ndt = dt_min
            elif ndt > dt_max:
                ndt = dt_max
            dt = ndt

        for c in range(5):
            out_y[u + 1, c] = y[c]
        syn_next = syn_row[u + 1] if u + 1 < n_steps else syn_u
        ic = gap_input_at(i, t_end, y[0], nbr_ptr, nbr_idx, nbr_g, t0, h, n_steps,
                          kind, vals, ders, tpl_v, tpl_res, tpl_idx, tpl_tau0) + syn_next
        hh_rhs_arr(y, pp, ic, out_f[u + 1])

    counts[0] = n_acc
    counts[1] = n_rej
    return STATUS_OK


@njit(**_JIT)
def sweep_block(lo, hi, Y, PP, t0, h, n_steps, syn,
                A, B, BH, C,
                tol, safety, dt_min, dt_max, growth, shrink, expo,
                nbr_ptr, nbr_idx, nbr_g,
                kind, vals, ders, tpl_v, tpl_res, tpl_idx, tpl_tau0,
                out_y, out_f, y_end, counts, status):
    """One relaxation sweep over the contiguous neuron block [lo, hi).

    Reads the frozen waveform snapshot, writes per-neuron grid solutions into
    out_y/out_f (shape (v, n+1, 5)) and end states into y_end. Safe to run
    concurrently on disjoint blocks against the same snapshot.
    """
    scratch = np.empty((B.shape[0] + 3, 5))
    for i in range(lo, hi):
        st = solve_neuron_window(i, Y[i], PP[i], t0, h, n_steps, syn[i],
                                 A, B, BH, C,
                                 tol, safety, dt_min, dt_max, growth, shrink, expo,
                                 nbr_ptr, nbr_idx, nbr_g,
                                 kind, vals, ders, tpl_v, tpl_res, tpl_idx, tpl_tau0,
                                 out_y[i], out_f[i], counts[i], scratch)
        status[i] = st
        for c in range(5):
            y_end[i, c] = out_y[i, n_steps, c]


@njit(**_JIT)
def max_grid_diff(a, b, n_steps):
    """max_u |a[:, u] - b[:, u]| over interior and right grid points u = 1..n."""
    worst = 0.0
    for i in range(a.shape[0]):
        for u in range(1, n_steps + 1):
            d = abs(a[i, u] - b[i, u])
            if d > worst:
                worst = d
    return worst


@njit(**_JIT)
def run_fixed_hh(y0, pp, n_total, dt):
    """Uncoupled fixed-step reference march; returns V at every step.

    Uses the classic fourth-order Runge-Kutta scheme; with the fine steps
    this is used at (<= 1e-3 ms) the local error is far below solver
    tolerances.
    """
    v_out = np.empty(n_total + 1)
    y = y0.copy()
    k1 = np.empty(5)
    k2 = np.empty(5)
    k3 = np.empty(5)
    k4 = np.empty(5)
    yt = np.empty(5)
    v_out[0] = y[0]
    for k in range(n_total):
        hh_rhs_arr(y, pp, 0.0, k1)
        for c in range(5):
            yt[c] = y[c] + 0.5 * dt * k1[c]
        hh_rhs_arr(yt, pp, 0.0, k2)
        for c in range(5):
            yt[c] = y[c] + 0.5 * dt * k2[c]
        hh_rhs_arr(yt, pp, 0.0, k3)
        for c in range(5):
            yt[c] = y[c] + dt * k3[c]
        hh_rhs_arr(yt, pp, 0.0, k4)
        for c in range(5):
            y[c] += dt * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]) / 6.0
        for c in range(1, 4):
            if y[c] < 0.0:
                y[c] = 0.0
            elif y[c] > 1.0:
                y[c] = 1.0
        v_out[k + 1] = y[0]
    return v_out


def empty_template_tables():
    """Placeholder template arrays for networks that never use spike guesses."""
    return (np.zeros((1, 2)), 1.0,
            np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.float64))
