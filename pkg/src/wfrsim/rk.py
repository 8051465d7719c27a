"""Embedded explicit Runge-Kutta integration with grid-landing step control.

The integrator marches adaptively but truncates any step that would overshoot
the next point of the coarse h-grid, so every grid point is the endpoint of an
accepted step and its state/derivative can be communicated. Tableaus are
plain data; Fehlberg 4(5) is the default, Dormand-Prince 5(4) is provided for
cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class StepSizeUnderflowError(RuntimeError):
    """A rejected step could not be reduced below the minimum step size."""


@dataclass(frozen=True)
class ButcherTableau:
    """Coefficients of an embedded explicit RK pair.

    ``b`` propagates the solution, ``b_hat`` is the embedded comparison
    weight vector used for the local error estimate.
    """

    name: str
    c: np.ndarray
    a: np.ndarray
    b: np.ndarray
    b_hat: np.ndarray
    order: int
    embedded_order: int

    def __post_init__(self):
        s = self.b.size
        if self.a.shape != (s, s) or self.c.size != s or self.b_hat.size != s:
            raise ValueError("inconsistent tableau shapes")
        if np.any(np.triu(self.a) != 0.0):
            raise ValueError("explicit tableau requires strictly lower-triangular a")
        for vec, nm in ((self.b, "b"), (self.b_hat, "b_hat")):
            if abs(vec.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights {nm} must sum to 1")
        if np.max(np.abs(self.a.sum(axis=1) - self.c)) > 1e-12:
            raise ValueError("nodes must satisfy c_q = sum_l a_ql")

    @property
    def stages(self) -> int:
        return self.b.size

    @property
    def error_exponent(self) -> float:
        return 1.0 / (min(self.order, self.embedded_order) + 1.0)


def _tableau(name, c, a_rows, b, b_hat, order, embedded_order) -> ButcherTableau:
    s = len(b)
    a = np.zeros((s, s))
    for q, row in enumerate(a_rows):
        a[q, : len(row)] = row
    return ButcherTableau(name=name, c=np.array(c, dtype=float), a=a,
                          b=np.array(b, dtype=float), b_hat=np.array(b_hat, dtype=float),
                          order=order, embedded_order=embedded_order)


# Fehlberg 4(5): the fifth-order solution is propagated, the fourth-order one
# supplies the error estimate.
FEHLBERG45 = _tableau(
    "fehlberg45",
    c=[0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2],
    a_rows=[
        [],
        [1 / 4],
        [3 / 32, 9 / 32],
        [1932 / 2197, -7200 / 2197, 7296 / 2197],
        [439 / 216, -8.0, 3680 / 513, -845 / 4104],
        [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
    ],
    b=[16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55],
    b_hat=[25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0],
    order=5, embedded_order=4,
)

DORMAND_PRINCE54 = _tableau(
    "dormand_prince54",
    c=[0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0],
    a_rows=[
        [],
        [1 / 5],
        [3 / 40, 9 / 40],
        [44 / 45, -56 / 15, 32 / 9],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
        [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
    ],
    b=[35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0],
    b_hat=[5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40],
    order=5, embedded_order=4,
)

TABLEAUS = {t.name: t for t in (FEHLBERG45, DORMAND_PRINCE54)}


@dataclass
class StepController:
    """Adaptive step-size state.

    ``atol`` bounds the scaled local error (each component is scaled by
    max(|y|, 1), so atol acts absolutely for small components and relatively
    for large ones); ``rtol`` adds to the acceptance threshold and defaults
    to zero. ``dt`` is the current step and is updated by ``adapt_step``.
    """

    atol: float = 1e-6
    rtol: float = 0.0
    safety: float = 0.9
    dt_min: float = 1e-9
    dt_max: float = 1.0
    dt: float | None = None
    growth: float = 5.0
    shrink: float = 0.2
    error_exponent: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.dt_min <= self.dt_max):
            raise ValueError("require 0 < dt_min <= dt_max")
        if self.dt is None:
            self.dt = self.dt_max
        if not (self.dt_min <= self.dt <= self.dt_max):
            raise ValueError("require dt_min <= dt <= dt_max")

    @property
    def tolerance(self) -> float:
        return self.atol + self.rtol


@dataclass(frozen=True)
class GridSolution:
    """States and right-hand sides at the h-grid points of one interval."""

    times: np.ndarray
    ys: np.ndarray
    fs: np.ndarray
    n_accepted: int
    n_rejected: int

    @property
    def y_end(self) -> np.ndarray:
        return self.ys[-1]


def rk_step(tableau: ButcherTableau, rhs: Callable, t: float, y: np.ndarray,
            dt: float) -> tuple[np.ndarray, float]:
    """One embedded step: returns (propagated y, scaled error estimate).

    The error estimate is the max over components of |dt * sum((b - b_hat) k)|
    divided by max(|y|, 1); a non-finite stage turns it into inf so the
    controller rejects the step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    s = tableau.stages
    k = np.empty((s, y.size))
    for q in range(s):
        yq = y + dt * (tableau.a[q, :q] @ k[:q]) if q else y
        k[q] = rhs(t + tableau.c[q] * dt, yq)
    y_high = y + dt * (tableau.b @ k)
    err_vec = dt * ((tableau.b - tableau.b_hat) @ k)
    if not (np.all(np.isfinite(y_high)) and np.all(np.isfinite(err_vec))):
        return y_high, float("inf")
    scale = np.maximum(np.abs(y), 1.0)
    return y_high, float(np.max(np.abs(err_vec) / scale))


def adapt_step(controller: StepController, error_estimate: float,
               dt: float) -> tuple[bool, float]:
    """Accept/reject decision plus the next step size.

    Raises StepSizeUnderflowError when a rejected step is already at the
    minimum step size.
    """
    if error_estimate < 0.0:
        raise ValueError("error estimate must be non-negative")
    tol = controller.tolerance
    accept = error_estimate <= tol
    if not accept and dt <= controller.dt_min * (1.0 + 1e-12):
        raise StepSizeUnderflowError("step size underflow")
    if error_estimate == 0.0:
        fac = controller.growth
    else:
        fac = controller.safety * (tol / error_estimate) ** controller.error_exponent
        fac = min(max(fac, controller.shrink), controller.growth)
    dt_next = min(max(dt * fac, controller.dt_min), controller.dt_max)
    controller.dt = dt_next
    return accept, dt_next


def integrate_interval(tableau: ButcherTableau, controller: StepController,
                       rhs: Callable, y0: np.ndarray, t0: float, T: float,
                       h: float) -> GridSolution:
    """Adaptive march over [t0, t0 + T] landing exactly on every h-grid point.

    T must be a positive integer multiple of h. Steps that would overshoot
    the next grid point are truncated to it, so grid values are accepted
    solution values.
    """
    n = int(round(T / h))
    if n < 1 or abs(n * h - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T must be a positive integer multiple of h")
    y = np.asarray(y0, dtype=float).copy()
    d = y.size
    times = t0 + h * np.arange(n + 1)
    ys = np.empty((n + 1, d))
    fs = np.empty((n + 1, d))
    ys[0] = y
    fs[0] = rhs(t0, y)

    dt = min(controller.dt, h)
    n_acc = 0
    n_rej = 0
    t = t0
    for u in range(n):
        t_end = times[u + 1]
        while t < t_end:
            rem = t_end - t
            land = dt >= rem * (1.0 - 1e-10)
            dt_eff = rem if land else dt
            y_new, err = rk_step(tableau, rhs, t, y, dt_eff)
            accept, dt_next = adapt_step(controller, err, dt_eff)
            if accept:
                y = y_new
                t = t_end if land else t + dt_eff
                n_acc += 1
            else:
                n_rej += 1
            if land and accept:
                dt = max(dt_next, dt)  # truncation must not shrink the controller
                controller.dt = dt
            else:
                dt = dt_next
        ys[u + 1] = y
        fs[u + 1] = rhs(t_end, y)
    return GridSolution(times=times, ys=ys, fs=fs, n_accepted=n_acc, n_rejected=n_rej)


def integrate_fixed(tableau: ButcherTableau, rhs: Callable, y0: np.ndarray,
                    t0: float, T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step march with the tableau's propagating weights (no controller)."""
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, abs(T)):
        raise ValueError("T must be a positive integer multiple of dt")
    y = np.asarray(y0, dtype=float).copy()
    times = t0 + dt * np.arange(n + 1)
    ys = np.empty((n + 1, y.size))
    ys[0] = y
    s = tableau.stages
    for step in range(n):
        t = times[step]
        k = np.empty((s, y.size))
        for q in range(s):
            yq = y + dt * (tableau.a[q, :q] @ k[:q]) if q else y
            k[q] = rhs(t + tableau.c[q] * dt, yq)
        y = y + dt * (tableau.b @ k)
        ys[step + 1] = y
    return times, ys
