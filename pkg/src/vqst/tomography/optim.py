"""ADAM and L-BFGS (two-loop recursion, strong-Wolfe line search)."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..errors import ParameterError

Objective = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass(frozen=True)
class AdamState:
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("ADAM betas must lie in [0, 1)")


def adam_step(state: AdamState, theta: np.ndarray, grad: np.ndarray) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected ADAM update; returns the new state and parameters."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != np.shape(theta):
        raise ParameterError(f"gradient shape {grad.shape} != parameter shape {np.shape(theta)}")
    m = np.zeros_like(grad) if state.m is None else state.m
    v = np.zeros_like(grad) if state.v is None else state.v
    t = state.t + 1
    m = state.beta1 * m + (1 - state.beta1) * grad
    v = state.beta2 * v + (1 - state.beta2) * grad * grad
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    theta = np.asarray(theta, dtype=float) - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, t=t, m=m, v=v), theta


# ----------------------------------------------------------------- L-BFGS


@dataclass
class LbfgsResult:
    theta: np.ndarray
    f: float
    grad: np.ndarray
    n_iter: int
    n_calls: int
    reason: str
    history: list[tuple[float, float]] = field(default_factory=list)  # (f, |g|_inf) per accepted iterate


def _cubic_min(a, fa, ga, b, fb, gb) -> float | None:
    if a == b:
        return None
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    rad = d1 * d1 - ga * gb
    if rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    x = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2 * d2)
    return x if math.isfinite(x) else None


def _interpolate(a, fa, ga, b, fb, gb) -> float:
    lo, hi = min(a, b), max(a, b)
    x = _cubic_min(a, fa, ga, b, fb, gb)
    margin = 0.1 * (hi - lo)
    if x is None or not (lo + margin <= x <= hi - margin):
        return 0.5 * (a + b)
    return x


def strong_wolfe(
    phi: Callable[[float], tuple[float, float, object]],
    f0: float,
    g0: float,
    alpha0: float = 1.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_evals: int = 25,
    alpha_max: float = 1e3,
):
    """Bracketing + zoom line search (Nocedal & Wright, Alg. 3.5/3.6).

    ``phi(alpha)`` returns (value, directional derivative, payload).
    Returns (alpha, value, payload) or None on failure.
    """
    evals = 0
    a_prev, f_prev, g_prev = 0.0, f0, g0
    a = alpha0
    best = None
    while evals < max_evals:
        fa, ga, pay = phi(a)
        evals += 1
        if not math.isfinite(fa):
            a = 0.5 * (a_prev + a)
            continue
        if best is None or fa < best[1]:
            best = (a, fa, pay)
        if fa > f0 + c1 * a * g0 or (evals > 1 and fa >= f_prev):
            return _zoom(phi, f0, g0, a_prev, f_prev, g_prev, a, fa, ga, c1, c2, max_evals - evals, best)
        if abs(ga) <= -c2 * g0:
            return a, fa, pay
        if ga >= 0:
            return _zoom(phi, f0, g0, a, fa, ga, a_prev, f_prev, g_prev, c1, c2, max_evals - evals, best)
        a_prev, f_prev, g_prev = a, fa, ga
        a = min(2.0 * a, alpha_max)
    return _fallback(best, f0, g0, c1)


def _zoom(phi, f0, g0, lo, flo, glo, hi, fhi, ghi, c1, c2, budget, best):
    for _ in range(max(budget, 0)):
        if abs(hi - lo) < 1e-14 * max(1.0, abs(lo)):
            break
        a = _interpolate(lo, flo, glo, hi, fhi, ghi)
        fa, ga, pay = phi(a)
        if math.isfinite(fa) and fa < best[1]:
            best = (a, fa, pay)
        if not math.isfinite(fa) or fa > f0 + c1 * a * g0 or fa >= flo:
            hi, fhi, ghi = a, fa, ga
        else:
            if abs(ga) <= -c2 * g0:
                return a, fa, pay
            if ga * (hi - lo) >= 0:
                hi, fhi, ghi = lo, flo, glo
            lo, flo, glo = a, fa, ga
    return _fallback(best, f0, g0, c1)


def _fallback(best, f0, g0, c1):
    # accept a point with sufficient decrease even if curvature failed
    if best is not None and best[0] > 0 and best[1] <= f0 + c1 * best[0] * g0:
        return best
    return None


def lbfgs_minimize(
    fun: Objective,
    theta0: np.ndarray,
    memory: int = 20,
    max_iterations: int = 500,
    gtol: float = 1e-8,
    loss_tolerance: float = 0.0,
    c1: float = 1e-4,
    c2: float = 0.9,
    max_ls_evals: int = 25,
    callback: Callable[[int, np.ndarray, float, np.ndarray], None] | None = None,
) -> LbfgsResult:
    """Minimize ``fun`` (returning value and gradient) from ``theta0``.

    ``callback(k, theta, f, g)`` is invoked for the starting point (k = 0)
    and every accepted iterate.  Accepted values never increase.
    """
    x = np.array(theta0, dtype=float)
    f, g = fun(x)
    calls = 1
    pairs: deque[tuple[np.ndarray, np.ndarray, float]] = deque(maxlen=memory)
    history = [(f, float(np.max(np.abs(g))))]
    if callback:
        callback(0, x, f, g)

    def done(k, reason):
        return LbfgsResult(x, f, g, k, calls, reason, history)

    k = 0
    while True:
        if not math.isfinite(f):
            return done(k, "non_finite")
        if f <= loss_tolerance:
            return done(k, "loss_tolerance")
        if np.max(np.abs(g)) < gtol:
            return done(k, "gtol")
        if k >= max_iterations:
            return done(k, "max_iterations")

        d = _two_loop(g, pairs)
        gd = float(g @ d)
        if gd >= 0:
            pairs.clear()
            d, gd = -g, -float(g @ g)
        alpha0 = 1.0 if pairs else min(1.0, 1.0 / max(np.linalg.norm(g), 1e-12))

        def phi(a, d=d):
            nonlocal calls
            xa = x + a * d
            fa, ga = fun(xa)
            calls += 1
            return fa, float(ga @ d), (xa, ga)

        found = strong_wolfe(phi, f, gd, alpha0, c1, c2, max_ls_evals)
        if found is None and pairs:
            # memory may be stale: retry once along steepest descent
            pairs.clear()
            d, gd = -g, -float(g @ g)
            alpha0 = min(1.0, 1.0 / max(np.linalg.norm(g), 1e-12))
            found = strong_wolfe(lambda a, d=d: phi(a, d), f, gd, alpha0, c1, c2, max_ls_evals)
        if found is None:
            return done(k, "line_search_failed")
        _, f_new, (x_new, g_new) = found
        s, y = x_new - x, g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(y @ y):
            pairs.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        k += 1
        history.append((f, float(np.max(np.abs(g)))))
        if callback:
            callback(k, x, f, g)


def _two_loop(g: np.ndarray, pairs) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q
