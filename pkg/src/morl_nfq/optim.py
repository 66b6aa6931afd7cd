"""Deterministic full-batch optimizers over flat parameter vectors."""
from __future__ import annotations

from collections import deque
from typing import Callable, NamedTuple

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


class TrainingDiverged(FloatingPointError):
    pass


class OptimizeResult(NamedTuple):
    x: np.ndarray
    f: float
    grad_norm: float
    iterations: int
    evaluations: int
    converged: bool


def _checked(fun: Objective, x: np.ndarray) -> tuple[float, np.ndarray]:
    f, g = fun(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise TrainingDiverged("training diverged")
    return float(f), g


def two_loop_direction(g: np.ndarray, pairs) -> np.ndarray:
    """Apply the L-BFGS inverse-Hessian approximation to ``-g``.

    ``pairs`` holds (s, y, rho) with the most recent pair last.
    """
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def lbfgs(fun: Objective, x0: np.ndarray, history_size: int = 10, max_iterations: int = 400,
          gradient_tolerance: float = 1e-6, c1: float = 1e-4, shrink: float = 0.5,
          max_backtracks: int = 40) -> OptimizeResult:
    """Limited-memory BFGS with Armijo backtracking."""
    x = np.array(x0, dtype=float)
    f, g = _checked(fun, x)
    n_eval = 1
    pairs: deque = deque(maxlen=history_size)
    it = 0
    failures = 0
    while it < max_iterations:
        gnorm = float(np.linalg.norm(g))
        if gnorm < gradient_tolerance:
            return OptimizeResult(x, f, gnorm, it, n_eval, True)
        d = two_loop_direction(g, pairs)
        slope = g @ d
        if slope >= 0:
            # curvature pairs went stale; fall back to steepest descent
            pairs.clear()
            d = -g
            slope = -gnorm**2
        step = 1.0 if pairs else min(1.0, 1.0 / gnorm)
        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            n_eval += 1
            if np.isfinite(f_new) and f_new <= f + c1 * step * slope:
                break
            step *= shrink
        else:
            failures += 1
            if not pairs or failures > 1:
                # no decrease even along -g: at machine precision
                return OptimizeResult(x, f, gnorm, it, n_eval, False)
            pairs.clear()
            continue
        failures = 0
        if not np.all(np.isfinite(g_new)):
            raise TrainingDiverged("training diverged")
        s = x_new - x
        y = g_new - g
        sy = s @ y
        if sy > 1e-10 * max(1.0, float(np.linalg.norm(s) * np.linalg.norm(y))):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, float(f_new), g_new
        it += 1
    gnorm = float(np.linalg.norm(g))
    return OptimizeResult(x, f, gnorm, it, n_eval, gnorm < gradient_tolerance)


def gradient_descent(fun: Objective, x0: np.ndarray, step_size: float = 0.1,
                     max_iterations: int = 400, gradient_tolerance: float = 1e-6,
                     trace: list | None = None) -> OptimizeResult:
    """Plain full-batch gradient descent with a fixed step."""
    x = np.array(x0, dtype=float)
    f, g = _checked(fun, x)
    if trace is not None:
        trace.append(f)
    for it in range(max_iterations):
        gnorm = float(np.linalg.norm(g))
        if gnorm < gradient_tolerance:
            return OptimizeResult(x, f, gnorm, it, it + 1, True)
        x = x - step_size * g
        f, g = _checked(fun, x)
        if trace is not None:
            trace.append(f)
    gnorm = float(np.linalg.norm(g))
    return OptimizeResult(x, f, gnorm, max_iterations, max_iterations + 1, gnorm < gradient_tolerance)
