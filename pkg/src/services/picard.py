"""
Mild-solution construction by fixed-point iteration

    u_{n+1} = u_0 + Φ u_n,   (Φu)(t) = ∫_0^t P_{t-s} u(s)^{1+α} ds

on a time grid, measured in the weighted sup-norm sup |u(t,x)| / p(t+γ,e,x).
All norms are restricted to the grid nodes.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..config import Config
from ..utils.errors import InvalidParameterError, PicardDivergenceError, SpecMismatchError
from ..utils.io import write_csv
from .heat_kernel import HeatKernelOperator, kernel_matrix, kernel_stack
from .operators import as_field
from .semilinear import Trajectory

logger = logging.getLogger(__name__)

QUADRATURES = ('trapezoid', 'midpoint')


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray
    quadrature: str = 'trapezoid'

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise InvalidParameterError("a time grid needs at least two intervals")
        if nodes[0] != 0.0 or np.any(np.diff(nodes) <= 0):
            raise InvalidParameterError("time grid nodes must start at 0 and increase strictly")
        if self.quadrature not in QUADRATURES:
            raise InvalidParameterError(f"quadrature must be one of {QUADRATURES}, got {self.quadrature!r}")
        object.__setattr__(self, 'nodes', nodes)

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __len__(self) -> int:
        return int(self.nodes.size)


def uniform_grid(horizon: float, intervals: int, quadrature: str = 'trapezoid') -> TimeGrid:
    if not horizon > 0 or intervals < 2:
        raise InvalidParameterError(f"need horizon > 0 and intervals >= 2, got {horizon}, {intervals}")
    return TimeGrid(np.linspace(0.0, horizon, intervals + 1), quadrature)


def geometric_grid(horizon: float, intervals: int, first_step: float, quadrature: str = 'trapezoid') -> TimeGrid:
    """0 followed by ``intervals`` geometrically spaced nodes from first_step to horizon"""
    if not 0 < first_step < horizon or intervals < 2:
        raise InvalidParameterError("need 0 < first_step < horizon and intervals >= 2")
    return TimeGrid(np.concatenate([[0.0], np.geomspace(first_step, horizon, intervals)]), quadrature)


@dataclass
class PicardState:
    grid: TimeGrid
    iterate: np.ndarray
    gamma: float
    base_vertex: int
    norm_value: float = math.nan

    def scaled(self, c: float) -> 'PicardState':
        return PicardState(self.grid, c * self.iterate, self.gamma, self.base_vertex, c * self.norm_value)


class PhiKernels:
    """Φ on a grid, stepped node to node through the semigroup property.

    With h = t_i - t_{i-1} and f = u^{1+α}, the trapezoid sum obeys
    S_i = P_h (S_{i-1} + h/2 f_{i-1}) + h/2 f_i and the midpoint sum
    S_i = P_h S_{i-1} + h P_{h/2} f(m_i), so only one kernel per distinct
    step (and half step) is needed. Kernels are kept while they fit in
    ``memory_budget`` bytes and fetched through the kernel cache otherwise.
    """

    def __init__(self, hk: HeatKernelOperator, grid: TimeGrid, memory_budget: int = Config.PHI_KERNEL_BUDGET_BYTES):
        self.hk = hk
        self.grid = grid
        steps = grid.steps
        keys = np.round(steps / max(grid.horizon, 1.0), 12)
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        self.step_index = inverse.ravel()
        distinct = steps[first]
        self.lags = distinct if grid.quadrature == 'trapezoid' else np.concatenate([distinct, 0.5 * distinct])

        matrix_bytes = 8 * hk.vertex_count ** 2
        self.cached = self.lags.size * matrix_bytes <= memory_budget
        self._kernels = kernel_stack(hk, self.lags) if self.cached else None
        if not self.cached:
            logger.info("Φ needs %d kernels of %d vertices; building them per application", self.lags.size,
                        hk.vertex_count)

    def kernel(self, k: int) -> np.ndarray:
        if self._kernels is not None:
            return self._kernels[k]
        return kernel_matrix(self.hk, float(self.lags[k]))

    def apply(self, u: np.ndarray, alpha: float) -> np.ndarray:
        mu = self.hk.graph.measure
        h = self.grid.steps
        power = 1.0 + alpha
        half_offset = self.lags.size // 2
        out = np.zeros_like(u)
        with np.errstate(over='ignore', invalid='ignore'):
            if self.grid.quadrature == 'trapezoid':
                f = np.maximum(u, 0.0) ** power
                for i in range(1, len(u)):
                    half = 0.5 * h[i - 1]
                    carried = (out[i - 1] + half * f[i - 1]) * mu
                    out[i] = carried @ self.kernel(self.step_index[i - 1]) + half * f[i]
            else:
                f = np.maximum(0.5 * (u[:-1] + u[1:]), 0.0) ** power
                for i in range(1, len(u)):
                    k = self.step_index[i - 1]
                    out[i] = ((out[i - 1] * mu) @ self.kernel(k)
                              + h[i - 1] * ((f[i - 1] * mu) @ self.kernel(half_offset + k)))
        return out


def _check_grid_operator(hk: HeatKernelOperator, kernels: Optional[PhiKernels], grid: TimeGrid) -> PhiKernels:
    if kernels is None:
        return PhiKernels(hk, grid)
    if kernels.hk is not hk or kernels.grid is not grid:
        raise SpecMismatchError("precomputed Φ kernels belong to a different operator or grid")
    return kernels


def reference_weight(hk: HeatKernelOperator, grid: TimeGrid, gamma: float, e: int) -> np.ndarray:
    """ρ(t_i, x) = p(t_i + γ, e, x), shape (len(grid), n)"""
    if not gamma > 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma}")
    e = hk.graph.check_vertex(e)
    return kernel_stack(hk, grid.nodes + gamma)[:, e, :]


def weighted_norm(hk: HeatKernelOperator, state: PicardState, rho: Optional[np.ndarray] = None) -> float:
    """max over grid nodes and vertices of |u| / p(t+γ,e,x)"""
    if rho is None:
        rho = reference_weight(hk, state.grid, state.gamma, state.base_vertex)
    with np.errstate(over='ignore', invalid='ignore'):
        value = float(np.max(np.abs(state.iterate) / rho))
    return value if not math.isnan(value) else math.inf


def linear_baseline(hk: HeatKernelOperator, a, grid: TimeGrid, gamma: float = 1.0,
                    e: Optional[int] = None) -> PicardState:
    """u₀(t_i) = P_{t_i} a"""
    a = as_field(hk.graph, a, 'initial data')
    if np.any(a < 0):
        raise InvalidParameterError("initial data must be nonnegative")
    e = int(np.argmax(a)) if e is None else hk.graph.check_vertex(e)
    iterate = np.empty((len(grid), hk.vertex_count))
    iterate[0] = a
    iterate[1:] = kernel_stack(hk, grid.nodes[1:]) @ (hk.graph.measure * a)
    state = PicardState(grid, iterate, float(gamma), e)
    state.norm_value = weighted_norm(hk, state)
    return state


def apply_phi(hk: HeatKernelOperator, state: PicardState, alpha: float,
              kernels: Optional[PhiKernels] = None, rho: Optional[np.ndarray] = None) -> PicardState:
    """Quadrature of (Φu)(t_i); the zero-lag term applies u(t_i)^{1+α} directly"""
    if np.any(state.iterate < 0):
        raise InvalidParameterError("Φ is applied to nonnegative states only")
    kernels = _check_grid_operator(hk, kernels, state.grid)
    out = PicardState(state.grid, kernels.apply(state.iterate, alpha), state.gamma, state.base_vertex)
    out.norm_value = weighted_norm(hk, out, rho)
    return out


def c_tilde(gamma: float, alpha: float, m: float, ratio_C1_over_c1: float) -> float:
    """-2γ/(2 - mα) (C₁/c₁)^α γ^{-mα/2}, defined for mα > 2"""
    if not gamma > 0 or not alpha > 0 or not m > 0 or not ratio_C1_over_c1 > 0:
        raise InvalidParameterError("gamma, alpha, m and C1/c1 must be positive")
    if not m * alpha > 2:
        raise InvalidParameterError(f"C-tilde needs m*alpha > 2, got {m * alpha}")
    return -2.0 * gamma / (2.0 - m * alpha) * ratio_C1_over_c1 ** alpha * gamma ** (-m * alpha / 2.0)


def empirical_c_tilde(hk: HeatKernelOperator, grid: TimeGrid, gamma: float, e: int, alpha: float,
                      kernels: Optional[PhiKernels] = None) -> float:
    """||Φρ|| on the grid, the smallest constant with ||Φu|| ≤ C̃ ||u||^{1+α} there"""
    rho = reference_weight(hk, grid, gamma, e)
    state = PicardState(grid, rho, float(gamma), hk.graph.check_vertex(e))
    return apply_phi(hk, state, alpha, kernels, rho).norm_value


def delta_admissible(delta: float, alpha: float, c_tilde_value: float) -> bool:
    """0 < δ < 1, δ^{α/2}(1 + δ^{α/4})^{1+α} < δ^{α/4} and C̃ δ^{α/2} < 1"""
    if not 0 < delta < 1:
        return False
    quarter = delta ** (alpha / 4.0)
    half = delta ** (alpha / 2.0)
    return bool(half * (1.0 + quarter) ** (1.0 + alpha) < quarter and c_tilde_value * half < 1.0)


@dataclass
class PicardResult:
    converged: bool
    iterations: int
    first: PicardState
    last: PicardState
    norms: List[float]
    successive_diff_norms: List[float]
    kappa_empirical: float
    kappa_analytic: float
    c_tilde_empirical: float
    M: float
    delta: float
    delta_admissible: bool
    fixed_point_residual: float
    envelope_ok: bool
    alpha: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'converged': self.converged,
            'iterations': self.iterations,
            'norms': list(self.norms),
            'successive_diff_norms': list(self.successive_diff_norms),
            'kappa_empirical': self.kappa_empirical,
            'kappa_analytic': self.kappa_analytic,
            'c_tilde_empirical': self.c_tilde_empirical,
            'M': self.M,
            'delta': self.delta,
            'delta_admissible': self.delta_admissible,
            'fixed_point_residual': self.fixed_point_residual,
            'envelope_ok': self.envelope_ok,
            'alpha': self.alpha,
            'gamma': self.last.gamma,
            'base_vertex': self.last.base_vertex,
            'horizon': self.last.grid.horizon,
            'grid_nodes': len(self.last.grid),
            'quadrature': self.last.grid.quadrature,
        }

    def to_frame(self, labels: Sequence[str], measure: np.ndarray) -> pd.DataFrame:
        """Converged iterate in the trajectory CSV layout"""
        u = self.last.iterate
        frame = pd.DataFrame(u, columns=list(labels))
        frame.insert(0, 'time', self.last.grid.nodes)
        frame['mass'] = u @ measure
        frame['reaction'] = (u ** (1.0 + self.alpha)) @ measure
        return frame


def write_picard_trajectory(path: str, result: PicardResult, hk: HeatKernelOperator) -> str:
    g = hk.graph
    return write_csv(path, result.to_frame([g.label(x) for x in range(g.vertex_count)], g.measure))


def _empirical_ratio(diffs: Sequence[float], norms: Sequence[float]) -> float:
    noise = 1e3 * np.finfo(float).eps * max([1.0] + [n for n in norms if math.isfinite(n)])
    ratios = [b / a for a, b in zip(diffs[:-1], diffs[1:]) if a > noise and b > noise]
    return max(ratios) if ratios else 0.0


def picard_solve(hk: HeatKernelOperator, a, alpha: float, gamma: float, grid: TimeGrid,
                 max_iter: int = Config.PICARD_MAX_ITER, tol: float = Config.PICARD_TOL,
                 e: Optional[int] = None, divergence_streak: int = Config.DIVERGENCE_STREAK) -> PicardResult:
    """Iterate u_{n+1} = u_0 + Φ u_n until ||u_{n+1} - u_n|| ≤ tol.

    Raises PicardDivergenceError when the successive differences grow for
    ``divergence_streak`` iterations in a row or an iterate stops being finite.
    """
    if not alpha > 0:
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    if max_iter < 1 or not tol > 0:
        raise InvalidParameterError("need max_iter >= 1 and tol > 0")

    baseline = linear_baseline(hk, a, grid, gamma, e)
    e = baseline.base_vertex
    rho = reference_weight(hk, grid, gamma, e)
    kernels = PhiKernels(hk, grid)
    c_emp = empirical_c_tilde(hk, grid, gamma, e, alpha, kernels)
    delta = float(np.max(baseline.iterate[0] / rho[0]))

    current = baseline
    norms = [baseline.norm_value]
    diffs: List[float] = []
    streak = 0
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        update = apply_phi(hk, current, alpha, kernels, rho)
        nxt = PicardState(grid, baseline.iterate + update.iterate, gamma, e)
        nxt.norm_value = weighted_norm(hk, nxt, rho)
        diff = weighted_norm(hk, PicardState(grid, nxt.iterate - current.iterate, gamma, e), rho)
        norms.append(nxt.norm_value)

        if not (math.isfinite(diff) and math.isfinite(nxt.norm_value)):
            logger.error("Picard iterate %d is not finite", iterations)
            raise PicardDivergenceError(f"iterate {iterations} is not finite", norms, diffs + [diff])
        streak = streak + 1 if diffs and diff > diffs[-1] else 0
        diffs.append(diff)
        current = nxt
        logger.debug("Picard iteration %d: norm %.6g, difference %.3e", iterations, nxt.norm_value, diff)
        if streak >= divergence_streak:
            logger.error("Picard differences grew %d times in a row", streak)
            raise PicardDivergenceError(
                f"successive differences grew for {streak} consecutive iterations", norms, diffs)
        if diff <= tol:
            converged = True
            break

    M = max(norms)
    residual_state = PicardState(
        grid, current.iterate - baseline.iterate - apply_phi(hk, current, alpha, kernels, rho).iterate, gamma, e)
    residual = weighted_norm(hk, residual_state, rho)
    envelope_ok = bool(np.all(current.iterate >= 0)
                       and np.all(current.iterate <= M * rho * (1 + 1e-12)))

    result = PicardResult(
        converged=converged,
        iterations=iterations,
        first=baseline,
        last=current,
        norms=norms,
        successive_diff_norms=diffs,
        kappa_empirical=_empirical_ratio(diffs, norms),
        kappa_analytic=c_emp * (1.0 + alpha) * M ** alpha,
        c_tilde_empirical=c_emp,
        M=M,
        delta=delta,
        delta_admissible=delta_admissible(delta, alpha, c_emp),
        fixed_point_residual=residual,
        envelope_ok=envelope_ok,
        alpha=float(alpha),
    )
    logger.info("Picard %s after %d iterations: kappa %.3g (analytic %.3g), residual %.3e",
                'converged' if converged else 'stopped', iterations, result.kappa_empirical,
                result.kappa_analytic, residual)
    return result


def crosscheck_with_integrator(hk: HeatKernelOperator, result: PicardResult, traj: Trajectory) -> float:
    """max over grid nodes and vertices of |u_picard - u_ode|; the trajectory must record every node"""
    if not np.array_equal(traj.measure, hk.graph.measure):
        raise SpecMismatchError("trajectory and heat kernel operator belong to different graphs")
    if not math.isclose(traj.alpha, result.alpha):
        raise SpecMismatchError(f"alpha differs: trajectory {traj.alpha}, Picard {result.alpha}")
    nodes = result.last.grid.nodes
    if not np.array_equal(traj.states[0], result.last.iterate[0]):
        raise SpecMismatchError("initial data differ")
    if nodes[-1] > traj.times[-1] * (1 + 1e-12):
        raise SpecMismatchError("Picard grid extends beyond the trajectory")
    index = np.searchsorted(traj.times, nodes - 1e-12 * max(1.0, nodes[-1]))
    index = np.minimum(index, len(traj.times) - 1)
    if not np.allclose(traj.times[index], nodes, rtol=0, atol=1e-10 * max(1.0, nodes[-1])):
        raise SpecMismatchError("trajectory does not record every Picard grid node")
    return float(np.abs(traj.states[index] - result.last.iterate).max())


@dataclass
class RefinementStudy:
    intervals: List[int]
    differences: List[float]
    order: float

    def to_dict(self) -> Dict[str, Any]:
        return {'intervals': list(self.intervals), 'differences': list(self.differences), 'order': self.order}


def refinement_order(hk: HeatKernelOperator, a, alpha: float, gamma: float, horizon: float, intervals: int,
                     quadrature: str = 'trapezoid', e: Optional[int] = None,
                     tol: float = Config.PICARD_TOL) -> RefinementStudy:
    """Empirical convergence order from uniform grids with N, 2N and 4N intervals.

    Differences are max-abs over the coarse nodes and all vertices.
    """
    solutions = []
    counts = [intervals, 2 * intervals, 4 * intervals]
    for k, count in enumerate(counts):
        grid = uniform_grid(horizon, count, quadrature)
        result = picard_solve(hk, a, alpha, gamma, grid, tol=tol, e=e)
        solutions.append(result.last.iterate[::2 ** k])
    coarse_gap = float(np.abs(solutions[0] - solutions[1]).max())
    fine_gap = float(np.abs(solutions[1] - solutions[2]).max())
    order = math.log2(coarse_gap / fine_gap) if coarse_gap > 0 and fine_gap > 0 else math.inf
    logger.info("Grid refinement %s: differences %.3e, %.3e, order %.3f", counts, coarse_gap, fine_gap, order)
    return RefinementStudy(counts, [coarse_gap, fine_gap], order)
