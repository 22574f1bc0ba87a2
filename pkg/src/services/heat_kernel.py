"""
Heat kernel p(t,x,y) of the μ-Laplacian from a dense spectral decomposition,
the semigroup P_t, the kernel axiom checks and empirical checks of the
on-diagonal and Gaussian-type kernel bounds.
"""
import logging
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from ..config import Config
from ..utils.errors import (
    EigenSolverError,
    GraphTooLargeError,
    InvalidParameterError,
    SpecMismatchError,
    TruncationInsufficientError,
)
from ..utils.io import write_csv
from .graph_core import Graph, ball_volumes, distances_from, structural_constants
from .operators import as_field, laplacian_matrix

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_ORTHONORMAL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class HeatKernelOperator:
    """Eigen-decomposition of S = M^{-1/2}(W - diag m)M^{-1/2}.

    ``eigenvalues`` are sorted descending with eigenvalues[0] == 0 exactly and
    ``eigenbasis`` holds the orthonormal eigenvectors as columns.
    Kernel matrices are cached by time under a lock; everything else is
    read-only after construction.
    """
    graph: Graph
    eigenvalues: np.ndarray
    eigenbasis: np.ndarray
    measure_roots: np.ndarray
    _cache: 'OrderedDict[float, np.ndarray]' = field(default_factory=OrderedDict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def vertex_count(self) -> int:
        return self.graph.vertex_count

    @property
    def stationary_value(self) -> float:
        return 1.0 / self.graph.total_measure

    @cached_property
    def symmetric_generator(self) -> np.ndarray:
        g = self.graph
        s = g.dense_weights / np.outer(self.measure_roots, self.measure_roots)
        s[np.diag_indices_from(s)] -= g.degree_weights / g.measure
        return s


def spectral_decompose(g: Graph, max_vertices: int = Config.EIGEN_MAX_VERTICES) -> HeatKernelOperator:
    """Dense symmetric eigensolve of the μ-symmetrized generator"""
    n = g.vertex_count
    if n > max_vertices:
        raise GraphTooLargeError(f"graph has {n} vertices, dense eigensolver cap is {max_vertices}")

    roots = np.sqrt(g.measure)
    s = g.dense_weights / np.outer(roots, roots)
    s[np.diag_indices_from(s)] -= g.degree_weights / g.measure
    try:
        values, vectors = linalg.eigh(s)
    except (linalg.LinAlgError, ValueError) as e:
        logger.error("Eigensolver failed on %d vertices: %s", n, e)
        raise EigenSolverError(f"eigensolver did not converge: {e}") from e

    order = np.argsort(values)[::-1]
    values = values[order]
    vectors = vectors[:, order]

    scale = max(1.0, float(np.abs(values).max()))
    if values.size > 1 and not values[1] < -1e-10 * scale:
        raise EigenSolverError(f"second eigenvalue {values[1]!r} is not negative; generator has a multiple zero mode")

    # the ground state is known in closed form
    values[0] = 0.0
    vectors[:, 0] = roots / math.sqrt(g.total_measure)

    defect = float(np.abs(vectors.T @ vectors - np.eye(n)).max())
    if defect > _ORTHONORMAL_TOL * max(1.0, n / 100.0):
        raise EigenSolverError(f"eigenbasis orthonormality defect {defect:.3e}")

    logger.info("Spectral decomposition: %d vertices, spectral gap %.6g", n, -values[1] if n > 1 else 0.0)
    return HeatKernelOperator(graph=g, eigenvalues=values, eigenbasis=vectors, measure_roots=roots)


def _check_time(t: float) -> float:
    t = float(t)
    if not (math.isfinite(t) and t > 0):
        raise InvalidParameterError(f"time must be positive and finite, got {t}")
    return t


def _spectral_matrix(hk: HeatKernelOperator, t: float) -> np.ndarray:
    scaled = hk.eigenbasis * np.exp(hk.eigenvalues * t)
    p = (scaled @ hk.eigenbasis.T) / np.outer(hk.measure_roots, hk.measure_roots)
    return 0.5 * (p + p.T)


def _uniformized_matrix(hk: HeatKernelOperator, t: float) -> np.ndarray:
    """e^{tS} through the shifted series e^{-ct} e^{t(S + cI)} with scaling and squaring.

    S + cI is entrywise nonnegative for c = D_μ, so every term and every
    squaring is a sum of nonnegative numbers and tiny entries keep their
    relative accuracy.
    """
    shift = float(np.max(hk.graph.degree_weights / hk.graph.measure))
    a = hk.symmetric_generator + shift * np.eye(hk.vertex_count)
    norm = float(np.abs(a).sum(axis=0).max())
    squarings = max(0, math.ceil(math.log2(max(t * norm / 0.5, 1.0))))
    tau = t / 2 ** squarings

    total = np.eye(hk.vertex_count)
    term = np.eye(hk.vertex_count)
    for k in range(1, 400):
        term = (tau / k) * (term @ a)
        total += term
        if np.all(term <= _EPS * total):
            break
    total *= math.exp(-shift * tau)
    for _ in range(squarings):
        total = total @ total
        total = 0.5 * (total + total.T)
    return total / np.outer(hk.measure_roots, hk.measure_roots)


def _kernel_matrix_uncached(hk: HeatKernelOperator, t: float) -> np.ndarray:
    """Spectral sum while all entries are within KERNEL_RELATIVE_FLOOR of the largest.

    The spectral sum has absolute round-off near eps * max p, so smaller
    entries lose their relative accuracy and are recomputed by the
    nonnegative uniformized series.
    """
    p = _spectral_matrix(hk, t)
    floor = Config.KERNEL_RELATIVE_FLOOR * float(p.max())
    if float(p.min()) < floor:
        logger.debug("Kernel at t=%g spans more than the spectral floor; using uniformized series", t)
        p = _uniformized_matrix(hk, t)
    return p


def kernel_matrix(hk: HeatKernelOperator, t: float) -> np.ndarray:
    """All-pairs p(t,·,·) as a read-only array"""
    t = _check_time(t)
    with hk._lock:
        cached = hk._cache.get(t)
        if cached is not None:
            hk._cache.move_to_end(t)
            return cached
    p = _kernel_matrix_uncached(hk, t)
    p.setflags(write=False)
    with hk._lock:
        hk._cache[t] = p
        while len(hk._cache) > Config.KERNEL_CACHE_SIZE:
            hk._cache.popitem(last=False)
    return p


def kernel_stack(hk: HeatKernelOperator, times: Sequence[float]) -> np.ndarray:
    """p(t,·,·) for many times at once, shape (len(times), n, n); bypasses the cache"""
    return np.stack([_kernel_matrix_uncached(hk, _check_time(t)) for t in times])


def kernel_value(hk: HeatKernelOperator, t: float, x: int, y: int) -> float:
    t = _check_time(t)
    x = hk.graph.check_vertex(x)
    y = hk.graph.check_vertex(y)
    return float(kernel_matrix(hk, t)[x, y])


def kernel_diagonal(hk: HeatKernelOperator, times: Sequence[float], vertices: Optional[Sequence[int]] = None) -> np.ndarray:
    """p(t,x,x) for every t in ``times`` and x in ``vertices``, shape (len(times), len(vertices)).

    Every term of the diagonal spectral sum is nonnegative, so no fallback is needed.
    """
    times = np.array([_check_time(t) for t in np.atleast_1d(times)])
    if vertices is None:
        vertices = np.arange(hk.vertex_count)
    vertices = np.array([hk.graph.check_vertex(x) for x in vertices], dtype=int)
    squares = hk.eigenbasis[vertices] ** 2
    return (np.exp(np.outer(times, hk.eigenvalues)) @ squares.T) / hk.graph.measure[vertices]


def equilibrium_defect(hk: HeatKernelOperator, t: float) -> float:
    """max |p(t,x,y) - 1/Σμ|"""
    return float(np.abs(kernel_matrix(hk, t) - hk.stationary_value).max())


class SemigroupMethod(str, Enum):
    SPECTRAL = 'spectral'
    SERIES = 'series'


def series_truncation_bound(amplitude: float, d_mu: float, t: float, order: int) -> float:
    """A e^{2 D_μ t} (2 t D_μ)^N / N!, evaluated in logs"""
    if amplitude == 0:
        return 0.0
    x = 2.0 * t * d_mu
    if x == 0:
        return 0.0
    log_bound = math.log(amplitude) + x + order * math.log(x) - math.lgamma(order + 1)
    return math.exp(min(log_bound, 700.0))


def apply_semigroup(hk: HeatKernelOperator, t: float, f, method='spectral', order: Optional[int] = None,
                    tol: float = Config.SERIES_TOL) -> np.ndarray:
    """P_t f by the spectral sum or by the truncated exponential series.

    For the series, ``order=None`` picks the smallest N whose truncation bound
    is within ``tol``; an explicit N whose bound exceeds ``tol`` raises
    TruncationInsufficientError.
    """
    t = _check_time(t)
    f = as_field(hk.graph, f)
    try:
        method = SemigroupMethod(method)
    except ValueError as e:
        raise InvalidParameterError(f"unknown semigroup method {method!r}") from e

    if method is SemigroupMethod.SPECTRAL:
        coefficients = hk.eigenbasis.T @ (hk.measure_roots * f)
        return (hk.eigenbasis @ (np.exp(hk.eigenvalues * t) * coefficients)) / hk.measure_roots

    d_mu = structural_constants(hk.graph).d_mu
    amplitude = float(np.abs(f).max())
    if order is None:
        order = 1
        while series_truncation_bound(amplitude, d_mu, t, order) > tol:
            order += 1
            if order > 10_000:
                raise TruncationInsufficientError(
                    f"no series order up to 10000 reaches tolerance {tol:g} at t={t}",
                    series_truncation_bound(amplitude, d_mu, t, order), order)
    if order < 1:
        raise InvalidParameterError(f"series order must be >= 1, got {order}")
    bound = series_truncation_bound(amplitude, d_mu, t, order)
    if bound > tol:
        raise TruncationInsufficientError(
            f"series of order {order} has truncation bound {bound:.3e} > {tol:g} at t={t}", bound, order)

    generator = laplacian_matrix(hk.graph)
    term = f.copy()
    total = f.copy()
    for k in range(1, order + 1):
        term = (t / k) * (generator @ term)
        total += term
    return total


@dataclass
class KernelAxiomReport:
    symmetry_error: float
    min_value: float
    conservation_defect: float
    semigroup_error: float
    heat_equation_residual: float
    heat_equation_relative: float
    times: List[float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'symmetry_error': self.symmetry_error,
            'min_value': self.min_value,
            'conservation_defect': self.conservation_defect,
            'semigroup_error': self.semigroup_error,
            'heat_equation_residual': self.heat_equation_residual,
            'heat_equation_relative': self.heat_equation_relative,
            'times': list(self.times),
        }


def verify_kernel_axioms(hk: HeatKernelOperator, times: Sequence[float],
                         fd_step: float = Config.FD_STEP) -> KernelAxiomReport:
    """Check symmetry, positivity, conservation, the heat equation and the semigroup identity.

    The time derivative is a central difference of the spectral sum with step
    ``fd_step`` (halved towards t/2 for very small t). The semigroup identity
    is tested for every (t, t) and for consecutive pairs of the sorted times.
    """
    times = sorted(_check_time(t) for t in times)
    if not times:
        raise InvalidParameterError("need at least one time")

    mu = hk.graph.measure
    generator = laplacian_matrix(hk.graph)
    symmetry = conservation = heat_abs = heat_rel = semigroup = 0.0
    min_value = math.inf

    for t in times:
        p = kernel_matrix(hk, t)
        symmetry = max(symmetry, float(np.abs(p - p.T).max()))
        min_value = min(min_value, float(p.min()))
        conservation = max(conservation, float(np.abs(p @ mu - 1.0).max()))

        h = min(fd_step, 0.5 * t)
        dp_dt = (_spectral_matrix(hk, t + h) - _spectral_matrix(hk, t - h)) / (2.0 * h)
        lp = generator @ _spectral_matrix(hk, t)
        residual = float(np.abs(dp_dt - lp).max())
        heat_abs = max(heat_abs, residual)
        # ∂ₜp vanishes at equilibrium; max p keeps the scale away from zero
        scale = max(float(np.abs(dp_dt).max()), float(np.abs(lp).max()), float(p.max()))
        heat_rel = max(heat_rel, residual / scale)

    pairs = [(t, t) for t in times] + list(zip(times[:-1], times[1:]))
    for t, s in pairs:
        composed = kernel_matrix(hk, t) @ (mu[:, None] * kernel_matrix(hk, s))
        semigroup = max(semigroup, float(np.abs(kernel_matrix(hk, t + s) - composed).max()))

    report = KernelAxiomReport(symmetry, min_value, conservation, semigroup, heat_abs, heat_rel, list(times))
    logger.info("Kernel axioms at %d times: conservation %.2e, semigroup %.2e, heat residual %.2e",
                len(times), conservation, semigroup, heat_abs)
    return report


class BoundId(str, Enum):
    UPPER_2_1 = 'upper_2_1'
    GAUSSIAN_LOWER_2_2 = 'gaussian_lower_2_2'
    ONDIAG_LOWER_2_3 = 'ondiag_lower_2_3'
    VOLUME_LOWER_2_4 = 'volume_lower_2_4'


_UPPER_BOUNDS = {BoundId.UPPER_2_1}


@dataclass
class BoundSpec:
    """Sampling range and constants for one kernel bound.

    Times are ``samples`` geometrically spaced points of [t_min, t_max]
    unless ``times`` is given. For bounds (2.1) and (2.2) ``diagonal=False``
    samples every y for each x.
    """
    bound_id: BoundId
    t_min: float
    t_max: float
    samples: int = 50
    times: Optional[Sequence[float]] = None
    vertices: Optional[Sequence[int]] = None
    diagonal: bool = True
    C1: Optional[float] = None
    C2: Optional[float] = None
    C3: Optional[float] = None
    n: Optional[float] = None
    C: Optional[float] = None
    C0: Optional[float] = None
    c0: Optional[float] = None
    m: Optional[float] = None
    r0: Optional[float] = None


@dataclass
class BoundCheckReport:
    bound_id: BoundId
    constants: Dict[str, Optional[float]]
    t_range: Tuple[float, float]
    verdict: str
    worst_ratio: float
    worst_point: Tuple[float, int, int]
    sample_count: int
    clipped: bool

    @property
    def holds(self) -> bool:
        return self.verdict == 'holds'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'bound_id': self.bound_id.value,
            'constants': dict(self.constants),
            't_range': list(self.t_range),
            'verdict': self.verdict,
            'worst_ratio': self.worst_ratio,
            'worst_point': {'t': self.worst_point[0], 'x': self.worst_point[1], 'y': self.worst_point[2]},
            'sample_count': self.sample_count,
            'clipped': self.clipped,
        }


def wrap_time_limit(g: Graph, divisor: int = Config.TORUS_WRAP_DIVISOR) -> float:
    """Largest kernel time a torus can represent faithfully: (min L / divisor)^2"""
    if not g.lattice_dims:
        return math.inf
    return (min(g.lattice_dims) / divisor) ** 2


def _require(spec: BoundSpec, *names: str) -> None:
    missing = [name for name in names if getattr(spec, name) is None]
    if missing:
        raise InvalidParameterError(f"bound {spec.bound_id.value} needs constants {missing}")
    for name in names:
        if not getattr(spec, name) > 0:
            raise InvalidParameterError(f"constant {name} of bound {spec.bound_id.value} must be positive")


def _sample_times(spec: BoundSpec) -> np.ndarray:
    if spec.times is not None:
        times = np.array(sorted(float(t) for t in spec.times))
    else:
        if not 0 < spec.t_min <= spec.t_max:
            raise InvalidParameterError(f"need 0 < t_min <= t_max, got [{spec.t_min}, {spec.t_max}]")
        if spec.samples < 1:
            raise InvalidParameterError(f"samples must be >= 1, got {spec.samples}")
        times = np.geomspace(spec.t_min, spec.t_max, spec.samples)
    if times.size == 0:
        raise InvalidParameterError(f"empty sample range for bound {spec.bound_id.value}")
    return times


def _kernel_time(bound_id: BoundId, t: np.ndarray) -> np.ndarray:
    return 2.0 * t ** 2 if bound_id is BoundId.ONDIAG_LOWER_2_3 else t


def _samples_for(hk: HeatKernelOperator, spec: BoundSpec, times: np.ndarray,
                 vertices: np.ndarray) -> pd.DataFrame:
    """Kernel values at the sampled (t, x, y) and the bound's right-hand side"""
    g = hk.graph
    bound_id = spec.bound_id
    kernel_times = _kernel_time(bound_id, times)
    on_diagonal = spec.diagonal or bound_id in (BoundId.ONDIAG_LOWER_2_3, BoundId.VOLUME_LOWER_2_4)

    frames = []
    for t, kt in zip(times, kernel_times):
        if on_diagonal:
            xs = vertices
            ys = vertices
            p = kernel_diagonal(hk, [kt], vertices)[0]
        else:
            matrix = kernel_matrix(hk, kt)
            xs = np.repeat(vertices, g.vertex_count)
            ys = np.tile(np.arange(g.vertex_count), vertices.size)
            p = matrix[xs, ys]

        if bound_id is BoundId.UPPER_2_1:
            radius = math.floor(math.sqrt(t))
            volume = np.array([ball_volumes(g, x, [radius])[0] for x in xs])
            rhs = (spec.C1 if spec.C1 is not None else 1.0) / volume
        elif bound_id is BoundId.GAUSSIAN_LOWER_2_2:
            d = np.array([distances_from(g, x)[y] for x, y in zip(xs, ys)], dtype=float)
            rhs = spec.C2 / t ** spec.n * np.exp(-spec.C3 * d ** 2 / (t - 1.0))
        elif bound_id is BoundId.ONDIAG_LOWER_2_3:
            radius = math.floor(t)
            volume = np.array([ball_volumes(g, x, [radius])[0] for x in xs])
            rhs = spec.C / volume
        else:
            radius = math.floor(spec.C0 * t * math.log(t))
            volume = np.array([ball_volumes(g, x, [radius])[0] for x in xs])
            rhs = 1.0 / (4.0 * volume)

        frames.append(pd.DataFrame({
            'bound_id': bound_id.value, 't': t, 'x': xs, 'y': ys, 'p': p, 'bound_rhs': rhs,
        }))
    return pd.concat(frames, ignore_index=True)


def check_bound_spec(g: Graph, spec: BoundSpec) -> np.ndarray:
    """Validate constants and the sampling range of one bound against ``g``; returns the sample times.

    Needs only the structural constants of ``g``, so callers run it before
    any eigendecomposition.
    """
    try:
        bound_id = BoundId(spec.bound_id)
    except ValueError as e:
        raise InvalidParameterError(f"unknown bound {spec.bound_id!r}") from e
    spec.bound_id = bound_id
    times = _sample_times(spec)

    if bound_id is BoundId.GAUSSIAN_LOWER_2_2:
        _require(spec, 'C2', 'C3', 'n')
        if times[0] <= 1:
            raise InvalidParameterError("bound gaussian_lower_2_2 holds only for t > 1")
    elif bound_id is BoundId.ONDIAG_LOWER_2_3:
        _require(spec, 'C')
        if times[0] <= 0.5:
            raise InvalidParameterError("bound ondiag_lower_2_3 holds only for t > 1/2")
    elif bound_id is BoundId.VOLUME_LOWER_2_4:
        _require(spec, 'C0')
        threshold = 2.0 * structural_constants(g).d_mu * math.e
        if not spec.C0 > threshold:
            raise InvalidParameterError(f"C0={spec.C0} must exceed 2 D_mu e = {threshold:.6g}")
        if times[0] < math.e:
            raise InvalidParameterError("bound volume_lower_2_4 is sampled on t >= e")
    for x in spec.vertices or ():
        g.check_vertex(x)
    return times


def _check_one(hk: HeatKernelOperator, spec: BoundSpec, wrap_limit: float) -> Tuple[BoundCheckReport, pd.DataFrame]:
    times = check_bound_spec(hk.graph, spec)
    bound_id = spec.bound_id

    inside = _kernel_time(bound_id, times) <= wrap_limit
    clipped = not bool(inside.all())
    if clipped:
        logger.warning("Bound %s: %d sample times exceed the torus wrap limit %.6g and are dropped",
                       bound_id.value, int((~inside).sum()), wrap_limit)
    times = times[inside]
    if times.size == 0:
        raise InvalidParameterError(f"empty sample range for bound {bound_id.value} after the wrap guard")

    vertices = np.arange(hk.vertex_count) if spec.vertices is None else np.array(
        [hk.graph.check_vertex(x) for x in spec.vertices], dtype=int)
    samples = _samples_for(hk, spec, times, vertices)
    ratio = (samples['p'] / samples['bound_rhs']).to_numpy()

    constants = {name: getattr(spec, name) for name in ('C1', 'C2', 'C3', 'n', 'C', 'C0', 'c0', 'm', 'r0')}
    if bound_id in _UPPER_BOUNDS:
        worst = int(np.argmax(ratio))
        if spec.C1 is None:
            # ratio was taken against 1/V, so its maximum is the smallest admissible C1
            constants['C1'] = float(ratio[worst])
            samples['bound_rhs'] *= constants['C1']
            worst_ratio = 1.0
            holds = True
        else:
            worst_ratio = float(ratio[worst])
            holds = worst_ratio <= 1.0 + 1e-12
    else:
        worst = int(np.argmin(ratio))
        worst_ratio = float(ratio[worst])
        holds = worst_ratio >= 1.0 - 1e-12

    row = samples.iloc[worst]
    report = BoundCheckReport(
        bound_id=bound_id,
        constants=constants,
        t_range=(float(times[0]), float(times[-1])),
        verdict='holds' if holds else 'fails',
        worst_ratio=worst_ratio,
        worst_point=(float(row['t']), int(row['x']), int(row['y'])),
        sample_count=int(len(samples)),
        clipped=clipped,
    )
    logger.info("Bound %s on t in [%g, %g]: %s (worst ratio %.6g)", bound_id.value,
                report.t_range[0], report.t_range[1], report.verdict, worst_ratio)
    return report, samples


def verify_bounds(hk: HeatKernelOperator, g: Graph, specs: Sequence[BoundSpec],
                  samples_path: Optional[str] = None,
                  wrap_divisor: int = Config.TORUS_WRAP_DIVISOR) -> List[BoundCheckReport]:
    """Check each bound on its sampled range; (2.1) fits C1 unless one is supplied"""
    if g is not hk.graph and not g.same_as(hk.graph):
        raise SpecMismatchError("heat kernel operator was built for a different graph")
    if not specs:
        raise InvalidParameterError("need at least one bound to check")

    limit = wrap_time_limit(g, wrap_divisor)
    reports, frames = [], []
    for spec in specs:
        report, samples = _check_one(hk, spec, limit)
        reports.append(report)
        frames.append(samples)

    if samples_path:
        write_bound_samples(samples_path, pd.concat(frames, ignore_index=True))
    return reports


def write_bound_samples(path: str, samples: pd.DataFrame) -> str:
    """CSV of (bound_id, t, x, y, p, bound_rhs) sample points"""
    columns = ['bound_id', 't', 'x', 'y', 'p', 'bound_rhs']
    return write_csv(path, samples[columns])
