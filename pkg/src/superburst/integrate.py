"""Fixed-step classical Runge-Kutta (RK4) integration.

Two entry points share one scheme:

* :func:`propagate_linear` for autonomous linear systems ``y' = A y``. One RK4
  step is then exactly multiplication by the degree-4 Taylor polynomial of
  ``hA``, so a whole output interval is a matrix power of that polynomial.
* :func:`rk4_integrate` for general time-dependent right-hand sides.

Both accept ``check_convergence=True``, which repeats the run with twice the
substeps in every interval and raises :class:`ConvergenceError` if the two
disagree.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np


class IntegrationError(RuntimeError):
    """Integration produced non-finite values."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class ConvergenceError(IntegrationError):
    """Step-halving check failed."""


def validate_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("time grid must be a non-empty 1-D sequence")
    if t.size > 1 and np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing")
    return t


def rk4_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    """Amplification matrix of one RK4 step for ``y' = A y``."""
    hA = h * np.asarray(A)
    eye = np.eye(hA.shape[0], dtype=hA.dtype)
    hA2 = hA @ hA
    return eye + hA + hA2 / 2 + hA2 @ hA / 6 + hA2 @ hA2 / 24


def _n_substeps(dt: float, max_step: float) -> int:
    return max(1, math.ceil(dt / max_step - 1e-12))


# blow-ups are reported through the isfinite checks, not as numpy warnings
@np.errstate(over="ignore", invalid="ignore")
def _propagate_once(A, y0, t, max_step, refine=1):
    out = np.empty((t.size,) + y0.shape, dtype=np.result_type(A, y0))
    out[0] = y0
    cache: dict[tuple[int, int], np.ndarray] = {}
    y = y0
    for i in range(1, t.size):
        dt = t[i] - t[i - 1]
        n = _n_substeps(dt, max_step) * refine
        # key on dt rounded to 1e-12 relative so uniform grids reuse one map
        key = (n, round(dt / max_step * 1e12))
        M = cache.get(key)
        if M is None:
            M = np.linalg.matrix_power(rk4_step_matrix(A, dt / n), n)
            cache[key] = M
        y = M @ y
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state in linear propagation", t[i])
        out[i] = y
    return out


def propagate_linear(A, y0, t_grid, max_step: float, *,
                     check_convergence: bool = False, conv_tol: float = 1e-9):
    """Integrate ``y' = A y`` from ``y(t_grid[0]) = y0``.

    Parameters
    ----------
    A : (n, n) array
        Constant generator.
    y0 : (n,) or (n, k) array
        Initial value(s); columns are propagated together.
    t_grid : increasing 1-D array
        Output times. Each interval is split into equal substeps no longer
        than ``max_step``.

    Returns
    -------
    (len(t_grid),) + y0.shape array
    """
    t = validate_grid(t_grid)
    if max_step <= 0:
        raise ValueError("max_step must be positive")
    A = np.asarray(A)
    y0 = np.asarray(y0)
    out = _propagate_once(A, y0, t, max_step)
    if check_convergence:
        fine = _propagate_once(A, y0, t, max_step, refine=2)
        _compare(out, fine, t, conv_tol)
    return out


def _compare(coarse, fine, t, tol):
    err = np.abs(coarse - fine).reshape(t.size, -1).max(axis=1)
    bad = np.nonzero(err > tol)[0]
    if bad.size:
        raise ConvergenceError(
            f"step-halving deviation {err[bad[0]]:.3g} exceeds {tol:.3g}", t[bad[0]])


@np.errstate(over="ignore", invalid="ignore")
def _rk4_once(f, y0, t, max_step, refine=1):
    out = np.empty((t.size,) + y0.shape, dtype=y0.dtype)
    out[0] = y0
    y = y0
    for i in range(1, t.size):
        n = _n_substeps(t[i] - t[i - 1], max_step) * refine
        h = (t[i] - t[i - 1]) / n
        s = t[i - 1]
        for j in range(n):
            k1 = f(s, y)
            k2 = f(s + h / 2, y + h / 2 * k1)
            k3 = f(s + h / 2, y + h / 2 * k2)
            k4 = f(s + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            s = t[i - 1] + (j + 1) * h
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state in RK4 integration", t[i])
        out[i] = y
    return out


def rk4_integrate(f: Callable[[float, np.ndarray], np.ndarray], y0, t_grid,
                  max_step: float, *, check_convergence: bool = False,
                  conv_tol: float = 1e-9):
    """Classical RK4 for ``y' = f(t, y)``, sampled on ``t_grid``."""
    t = validate_grid(t_grid)
    if max_step <= 0:
        raise ValueError("max_step must be positive")
    y0 = np.asarray(y0)
    out = _rk4_once(f, y0, t, max_step)
    if check_convergence:
        _compare(out, _rk4_once(f, y0, t, max_step, refine=2), t, conv_tol)
    return out
