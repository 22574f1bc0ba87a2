"""
Explicit embedded Runge-Kutta stepping with PI step-size control.

Only the single-step machinery lives here; the semilinear driver in
``semilinear.py`` owns acceptance rules, blow-up detection and output.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

Rhs = Callable[[float, np.ndarray], np.ndarray]


@dataclass
class StepAttempt:
    y_new: np.ndarray
    error_norm: float
    k_last: np.ndarray


class DormandPrince54:
    """Dormand-Prince 5(4) pair. Seven stages with the first-same-as-last
    property, 5th order propagation with embedded 4th order error estimate.
    """

    #number of stages
    s = 7

    #order of scheme and embedded method
    n = 5
    m = 4

    #intermediate evaluation times
    eval_stages = [0.0, 1/5, 3/10, 4/5, 8/9, 1.0, 1.0]

    #extended butcher table, last row is the propagating weights
    BT = {
        0: [      1/5],
        1: [     3/40,        9/40],
        2: [    44/45,      -56/15,       32/9],
        3: [19372/6561, -25360/2187, 64448/6561, -212/729],
        4: [ 9017/3168,     -355/33, 46732/5247,   49/176, -5103/18656],
        5: [    35/384,           0,   500/1113,  125/192,  -2187/6784, 11/84],
        }

    #coefficients for local truncation error estimate
    TR = [71/57600, 0, -71/16695, 71/1920, -17253/339200, 22/525, -1/40]

    def attempt(self, rhs: Rhs, t: float, y: np.ndarray, h: float, rtol: float, atol: float,
                k_first: Optional[np.ndarray] = None) -> StepAttempt:
        """One trial step of size h from (t, y); ``k_first`` reuses the FSAL stage"""
        k = [rhs(t, y) if k_first is None else k_first]
        for i in range(self.s - 1):
            increment = sum(b * k_j for b, k_j in zip(self.BT[i], k) if b != 0)
            k.append(rhs(t + self.eval_stages[i + 1] * h, y + h * increment))
        y_new = y + h * sum(b * k_j for b, k_j in zip(self.BT[self.s - 2], k) if b != 0)

        error = h * sum(c * k_j for c, k_j in zip(self.TR, k) if c != 0)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        with np.errstate(over='ignore', invalid='ignore'):
            error_norm = float(np.sqrt(np.mean((error / scale) ** 2)))
        if not math.isfinite(error_norm):
            error_norm = math.inf
        return StepAttempt(y_new=y_new, error_norm=error_norm, k_last=k[-1])


class PIController:
    """Proportional-integral step-size controller on the scaled error norm"""

    def __init__(self, order: int = 5, safety: float = 0.9, min_factor: float = 0.2, max_factor: float = 5.0):
        self.beta1 = 0.7 / order
        self.beta2 = 0.4 / order
        self.order = order
        self.safety = safety
        self.min_factor = min_factor
        self.max_factor = max_factor
        self.previous_error = 1e-4

    def accepted_factor(self, error_norm: float) -> float:
        error = max(error_norm, 1e-10)
        factor = self.safety * error ** -self.beta1 * self.previous_error ** self.beta2
        self.previous_error = error
        return min(self.max_factor, max(self.min_factor, factor))

    def rejected_factor(self, error_norm: float) -> float:
        if not math.isfinite(error_norm):
            return self.min_factor
        factor = self.safety * error_norm ** (-1.0 / self.order)
        return min(1.0, max(self.min_factor, factor))


def initial_step(rhs: Rhs, t0: float, y0: np.ndarray, order: int, rtol: float, atol: float,
                 f0: Optional[np.ndarray] = None) -> float:
    """Starting step from the size of y0, f(y0) and a finite-difference second derivative"""
    f0 = rhs(t0, y0) if f0 is None else f0
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1

    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100.0 * h0, h1)
