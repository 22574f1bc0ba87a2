"""
μ-Laplacian, gradient forms Γ and Γ₂, integration against μ, and randomized
falsification of the exponential curvature-dimension inequalities CDE and CDE′.

Fields are plain float64 numpy arrays with one entry per vertex.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from ..config import Config
from ..utils.errors import InvalidParameterError
from .graph_core import Graph, ball

logger = logging.getLogger(__name__)


class CurvatureCondition(str, Enum):
    CDE = 'CDE'
    CDE_PRIME = 'CDE_PRIME'


class CurvatureVerdict(str, Enum):
    NO_VIOLATION_FOUND = 'no_violation_found'
    VIOLATED = 'violated'


class SampleDistribution(str, Enum):
    """Law of log f on B(x,2) for the random test functions"""
    UNIFORM = 'uniform'
    LOGNORMAL = 'lognormal'


def as_field(g: Graph, values, name: str = 'field') -> np.ndarray:
    """Validate length and finiteness of a vertex function"""
    f = np.asarray(values, dtype=float)
    if f.shape != (g.vertex_count,):
        raise InvalidParameterError(
            f"{name} has shape {f.shape}, expected ({g.vertex_count},) for this graph"
        )
    if not np.all(np.isfinite(f)):
        raise InvalidParameterError(f"{name} has non-finite entries")
    return f


def laplacian_matrix(g: Graph) -> sparse.csr_matrix:
    """L = M^{-1}(W - diag m), the matrix of Δ"""
    generator = g.weights - sparse.diags(g.degree_weights)
    return sparse.diags(1.0 / g.measure) @ generator


def laplacian(g: Graph, f) -> np.ndarray:
    """Δf(x) = (1/μ(x)) Σ_y ω_xy (f(y) - f(x))"""
    f = as_field(g, f)
    return (g.weights @ f - g.degree_weights * f) / g.measure


def gamma(g: Graph, f, h) -> np.ndarray:
    """Γ(f,h)(x) = (1/2μ(x)) Σ_y ω_xy (f(y) - f(x))(h(y) - h(x))"""
    f = as_field(g, f)
    h = as_field(g, h)
    w = g.weights
    m = g.degree_weights
    return (w @ (f * h) - f * (w @ h) - h * (w @ f) + m * f * h) / (2.0 * g.measure)


def gamma2_bilinear(g: Graph, f, h) -> np.ndarray:
    """2Γ₂(f,h) = ΔΓ(f,h) - Γ(f,Δh) - Γ(Δf,h)"""
    f = as_field(g, f)
    h = as_field(g, h)
    return 0.5 * (laplacian(g, gamma(g, f, h)) - gamma(g, f, laplacian(g, h)) - gamma(g, laplacian(g, f), h))


def gamma2(g: Graph, f) -> np.ndarray:
    f = as_field(g, f)
    return 0.5 * (laplacian(g, gamma(g, f, f)) - 2.0 * gamma(g, f, laplacian(g, f)))


def integrate(g: Graph, f) -> float:
    """∫ f dμ = Σ_x μ(x) f(x)"""
    f = as_field(g, f)
    return float(np.dot(g.measure, f))


def _condition(condition) -> CurvatureCondition:
    try:
        return CurvatureCondition(condition)
    except ValueError as e:
        raise InvalidParameterError(f"unknown curvature condition {condition!r}") from e


def _check_dimension(n: float) -> None:
    if not n > 0:
        raise InvalidParameterError(f"dimension parameter n must be positive, got {n}")


def curvature_terms(g: Graph, x: int, f, condition, n: float, K: float) -> Tuple[float, float]:
    """(LHS, RHS) of the CDE / CDE′ inequality at x for a test function f"""
    condition = _condition(condition)
    _check_dimension(n)
    x = g.check_vertex(x)
    f = as_field(g, f, 'test function')
    if np.any(f[ball(g, x, 2)] <= 0):
        raise InvalidParameterError(f"test function must be positive on B({x}, 2)")

    lap = laplacian(g, f)
    grad = gamma(g, f, f)
    if condition is CurvatureCondition.CDE and not lap[x] < 0:
        raise InvalidParameterError(f"CDE needs Δf(x) < 0 at x={x}, got {lap[x]!r}")

    # outside B(x,2) the quotient never reaches x; any positive fill keeps it finite
    safe = np.where(f > 0, f, 1.0)
    lhs = gamma2(g, f)[x] - gamma(g, f, grad / safe)[x]
    if condition is CurvatureCondition.CDE:
        quadratic = lap[x] ** 2
    else:
        quadratic = f[x] ** 2 * laplacian(g, np.log(safe))[x] ** 2
    rhs = quadratic / n + K * grad[x]
    return float(lhs), float(rhs)


def curvature_residual(g: Graph, x: int, f, condition, n: float, K: float) -> float:
    """LHS - RHS of the defining inequality at x; negative means f violates it"""
    lhs, rhs = curvature_terms(g, x, f, condition, n, K)
    return lhs - rhs


@dataclass
class CurvatureReport:
    condition: CurvatureCondition
    n: float
    K: float
    vertex: int
    verdict: CurvatureVerdict
    witness: Optional[np.ndarray]
    witness_residual: float
    trials: int
    seed: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            'condition': self.condition.value,
            'n': self.n,
            'K': self.K,
            'vertex': self.vertex,
            'verdict': self.verdict.value,
            'witness': None if self.witness is None else [float(v) for v in self.witness],
            'witness_residual': self.witness_residual,
            'trials': self.trials,
            'seed': self.seed,
        }


class _LocalPatch:
    """Induced subgraph on B(x,2) evaluating the curvature terms at x for a batch of test functions.

    Every edge incident to B(x,1) lies inside the patch, which is all the
    terms at x ever touch; values at distance-2 vertices are never read.
    """

    def __init__(self, g: Graph, x: int):
        self.vertices = ball(g, x, 2)
        self.center = int(np.searchsorted(self.vertices, x))
        self.weights = g.dense_weights[np.ix_(self.vertices, self.vertices)]
        self.measure = g.measure[self.vertices]
        self.degree = g.degree_weights[self.vertices]

    def laplacian(self, F: np.ndarray) -> np.ndarray:
        return (F @ self.weights - F * self.degree) / self.measure

    def gamma(self, F: np.ndarray, H: np.ndarray) -> np.ndarray:
        w = self.weights
        return ((F * H) @ w - F * (H @ w) - H * (F @ w) + self.degree * F * H) / (2.0 * self.measure)

    def terms(self, log_f: np.ndarray, condition: CurvatureCondition, n: float, K: float):
        """LHS, RHS and the admissibility mask for a batch of log test functions"""
        F = np.exp(log_f)
        c = self.center
        lap = self.laplacian(F)
        grad = self.gamma(F, F)
        gamma2 = 0.5 * (self.laplacian(grad) - 2.0 * self.gamma(F, lap))
        lhs = gamma2[:, c] - self.gamma(F, grad / F)[:, c]
        if condition is CurvatureCondition.CDE:
            quadratic = lap[:, c] ** 2
            admissible = lap[:, c] < 0
        else:
            quadratic = F[:, c] ** 2 * self.laplacian(log_f)[:, c] ** 2
            admissible = np.ones(F.shape[0], dtype=bool)
        rhs = quadratic / n + K * grad[:, c]
        return lhs, rhs, admissible

    def scored(self, log_f: np.ndarray, condition: CurvatureCondition, n: float, K: float, rel_tol: float):
        """Residuals and violation margins; inadmissible rows score +inf"""
        lhs, rhs, admissible = self.terms(log_f, condition, n, K)
        residual = np.where(admissible, lhs - rhs, np.inf)
        margin = rel_tol * (1.0 + np.abs(lhs) + np.abs(rhs))
        return residual, margin


def _refine(patch: _LocalPatch, start: np.ndarray, condition: CurvatureCondition, n: float, K: float,
            log_box: float, rel_tol: float, rounds: int) -> Tuple[np.ndarray, float, float]:
    """Coordinate-wise descent on the residual, all coordinate moves evaluated as one batch"""
    best = start.copy()
    residual, margin = patch.scored(best[None, :], condition, n, K, rel_tol)
    best_residual, best_margin = float(residual[0]), float(margin[0])
    step = 0.5 * log_box
    k = best.size
    moves = np.vstack([np.eye(k), -np.eye(k)])

    for _ in range(rounds):
        trial = np.clip(best[None, :] + step * moves, -log_box, log_box)
        residual, margin = patch.scored(trial, condition, n, K, rel_tol)
        i = int(np.argmin(residual))
        if residual[i] < best_residual:
            best, best_residual, best_margin = trial[i], float(residual[i]), float(margin[i])
        else:
            step *= 0.5
            if step < 1e-8:
                break
    return best, best_residual, best_margin


def _draw(rng: np.random.Generator, distribution: SampleDistribution, log_box: float,
          shape: Tuple[int, int]) -> np.ndarray:
    """log f samples inside [-log_box, log_box]"""
    if distribution is SampleDistribution.UNIFORM:
        return rng.uniform(-log_box, log_box, size=shape)
    # log-normal f: most mass near f = 1, the box edges two standard deviations out
    return np.clip(rng.normal(0.0, 0.5 * log_box, size=shape), -log_box, log_box)


def _distribution(distribution) -> SampleDistribution:
    try:
        return SampleDistribution(distribution)
    except ValueError as e:
        raise InvalidParameterError(f"unknown sample distribution {distribution!r}") from e


def _falsify_vertex(g: Graph, x: int, condition: CurvatureCondition, n: float, K: float, budget: int,
                    seed: int, log_box: float, rel_tol: float, batch: int, candidates: int,
                    rounds: int, distribution: SampleDistribution) -> CurvatureReport:
    patch = _LocalPatch(g, x)
    rng = np.random.default_rng([seed, x])
    k = patch.vertices.size

    pool = np.empty((0, k))
    pool_residual = np.empty(0)
    trials = 0
    found = None

    while trials < budget:
        size = min(batch, budget - trials)
        samples = _draw(rng, distribution, log_box, (size, k))
        trials += size
        residual, margin = patch.scored(samples, condition, n, K, rel_tol)

        violating = np.flatnonzero(residual < -margin)
        if violating.size:
            i = violating[np.argmin(residual[violating])]
            found = (samples[i], float(residual[i]))
            break

        pool = np.vstack([pool, samples])
        pool_residual = np.concatenate([pool_residual, residual])
        keep = np.argsort(pool_residual, kind='stable')[:candidates]
        pool, pool_residual = pool[keep], pool_residual[keep]

    if found is None:
        for start, start_residual in zip(pool, pool_residual):
            if not np.isfinite(start_residual):
                continue
            refined, refined_residual, refined_margin = _refine(patch, start, condition, n, K, log_box, rel_tol, rounds)
            if refined_residual < -refined_margin:
                found = (refined, refined_residual)
                break

    if found is None:
        return CurvatureReport(condition, float(n), float(K), x, CurvatureVerdict.NO_VIOLATION_FOUND,
                               None, float(pool_residual.min()) if pool_residual.size else float('inf'),
                               trials, seed)

    log_witness, residual = found
    witness = np.ones(g.vertex_count)
    witness[patch.vertices] = np.exp(log_witness)
    return CurvatureReport(condition, float(n), float(K), x, CurvatureVerdict.VIOLATED,
                           witness, residual, trials, seed)


def falsify_curvature(g: Graph, condition, n: float, K: float, budget: int, seed: int = 0,
                      log_box: float = Config.LOG_BOX, rel_tol: float = Config.VIOLATION_REL_TOL,
                      batch: int = Config.FALSIFIER_BATCH, candidates: int = Config.FALSIFIER_CANDIDATES,
                      refine_rounds: int = Config.FALSIFIER_REFINE_ROUNDS,
                      distribution=Config.FALSIFIER_DISTRIBUTION) -> List[CurvatureReport]:
    """Search for positive test functions violating CDE(x,n,K) / CDE′(x,n,K) at every vertex.

    Test functions are exp of values drawn from [-log_box, log_box] on B(x,2)
    and equal 1 elsewhere: uniformly, or for ``distribution='lognormal'``
    normal with standard deviation log_box/2 clipped to the box.
    The best candidates are refined by
    coordinate descent. Each vertex draws from its own stream seeded by
    (seed, vertex), so results do not depend on evaluation order.
    A ``no_violation_found`` report records the best residual seen.
    """
    condition = _condition(condition)
    distribution = _distribution(distribution)
    _check_dimension(n)
    if budget < 1:
        raise InvalidParameterError(f"budget must be >= 1, got {budget}")
    if log_box <= 0:
        raise InvalidParameterError(f"log_box must be positive, got {log_box}")

    reports = [
        _falsify_vertex(g, x, condition, n, K, int(budget), int(seed), log_box, rel_tol, batch, candidates,
                        refine_rounds, distribution)
        for x in range(g.vertex_count)
    ]
    violated = sum(r.verdict is CurvatureVerdict.VIOLATED for r in reports)
    logger.info("%s(n=%g, K=%g): violated at %d/%d vertices (budget %d, seed %d)",
                condition.value, n, K, violated, len(reports), budget, seed)
    return reports
