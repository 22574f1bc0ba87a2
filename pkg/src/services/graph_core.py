"""
Finite weighted graphs: construction, the graph file format, hop distances,
balls and volumes, structural constants and volume-growth fitting.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ..config import Config
from ..utils.errors import (
    AsymmetricWeightsError,
    DegenerateFitError,
    DisconnectedGraphError,
    GraphParseError,
    InvalidParameterError,
    IsolatedVertexError,
    NonPositiveMeasureError,
    UnknownVertexError,
)
from ..utils.io import write_text

logger = logging.getLogger(__name__)

MEASURE_MODES = ('unit', 'normalized')


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected, loop-free, symmetric weighted graph with a positive vertex measure.

    Vertices are the dense indices ``0..vertex_count-1``. ``weights`` is a
    symmetric CSR matrix whose stored entries are exactly the edges.
    Instances are immutable and safe to share between threads once built.
    """
    weights: sparse.csr_matrix
    measure: np.ndarray
    labels: Optional[Tuple[str, ...]] = None
    lattice_dims: Optional[Tuple[int, ...]] = None
    _distance_cache: Dict[int, np.ndarray] = field(default_factory=dict, repr=False, compare=False)

    @property
    def vertex_count(self) -> int:
        return int(self.measure.shape[0])

    @cached_property
    def degree_weights(self) -> np.ndarray:
        """m(x) = sum of the edge weights at x"""
        return np.asarray(self.weights.sum(axis=1)).ravel()

    @cached_property
    def dense_weights(self) -> np.ndarray:
        return self.weights.toarray()

    @cached_property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    def edges(self) -> List[Tuple[int, int, float]]:
        """Edges as (i, j, weight) with i < j, sorted by (i, j)"""
        upper = sparse.triu(self.weights, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        return [(int(upper.row[k]), int(upper.col[k]), float(upper.data[k])) for k in order]

    def neighbors(self, x: int) -> np.ndarray:
        self.check_vertex(x)
        start, stop = self.weights.indptr[x], self.weights.indptr[x + 1]
        return self.weights.indices[start:stop]

    def check_vertex(self, x: int) -> int:
        if not isinstance(x, (int, np.integer)) or not 0 <= int(x) < self.vertex_count:
            raise UnknownVertexError(f"Unknown vertex id {x!r} (graph has {self.vertex_count} vertices)")
        return int(x)

    def label(self, x: int) -> str:
        return self.labels[x] if self.labels else f"x{x}"

    def same_as(self, other: 'Graph') -> bool:
        """Exact equality of weights, measure and labels"""
        if self.vertex_count != other.vertex_count:
            return False
        return (self.edges() == other.edges()
                and np.array_equal(self.measure, other.measure)
                and self.labels == other.labels)


def build_graph(vertex_count: int, edges: Iterable[Sequence[float]], measure: Sequence[float],
                labels: Optional[Sequence[str]] = None,
                lattice_dims: Optional[Sequence[int]] = None) -> Graph:
    """Validate and build a Graph from an edge list with i < j entries.

    A reversed entry (i > j) is only accepted as the mirror of an (j, i)
    entry with the identical weight; anything else is an asymmetric input.
    """
    if not isinstance(vertex_count, (int, np.integer)) or vertex_count < 2:
        raise GraphParseError(f"vertex count must be an integer >= 2, got {vertex_count!r}")
    n = int(vertex_count)

    try:
        mu = np.asarray(measure, dtype=float)
    except (TypeError, ValueError) as e:
        raise GraphParseError(f"measure must be an array of numbers: {e}") from e
    if mu.shape != (n,):
        raise GraphParseError(f"measure has {mu.size} entries for {n} vertices")
    invalid = ~(np.isfinite(mu) & (mu > 0))
    if invalid.any():
        bad = int(np.flatnonzero(invalid)[0])
        raise NonPositiveMeasureError(f"measure must be positive and finite, vertex {bad} has {mu[bad]!r}")

    forward: Dict[Tuple[int, int], float] = {}
    backward: Dict[Tuple[int, int], float] = {}
    for entry in edges:
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise GraphParseError(f"edge entry must be [i, j, weight], got {entry!r}")
        i, j, w = entry
        if not all(isinstance(v, (int, np.integer)) for v in (i, j)):
            raise GraphParseError(f"edge endpoints must be integers, got {entry!r}")
        if not isinstance(w, (int, float, np.integer, np.floating)):
            raise GraphParseError(f"edge weight must be a number, got {entry!r}")
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise GraphParseError(f"edge {entry!r} references a vertex outside 0..{n - 1}")
        if i == j:
            raise GraphParseError(f"loops are not allowed (edge at vertex {i})")
        if not np.isfinite(w) or w <= 0:
            raise GraphParseError(f"edge weight must be positive and finite, got {entry!r}")
        target = forward if i < j else backward
        key = (min(i, j), max(i, j))
        if key in target:
            raise GraphParseError(f"duplicate edge {key}")
        target[key] = w

    for key, w in backward.items():
        if forward.get(key) != w:
            raise AsymmetricWeightsError(
                f"weight of ({key[1]}, {key[0]}) is {w!r} but ({key[0]}, {key[1]}) is {forward.get(key, 0.0)!r}"
            )

    rows = [i for i, _ in forward] + [j for _, j in forward]
    cols = [j for _, j in forward] + [i for i, _ in forward]
    data = list(forward.values()) * 2
    weights = sparse.csr_matrix((np.asarray(data, dtype=float), (rows, cols)), shape=(n, n))
    weights.sort_indices()

    degree = np.asarray(weights.sum(axis=1)).ravel()
    isolated = np.flatnonzero(degree <= 0)
    if isolated.size:
        raise IsolatedVertexError(f"vertex {int(isolated[0])} has no incident edges")

    n_components, _ = csgraph.connected_components(weights, directed=False)
    if n_components != 1:
        raise DisconnectedGraphError(f"graph has {n_components} connected components")

    if labels is not None:
        labels = tuple(str(label) for label in labels)
        if len(labels) != n:
            raise GraphParseError(f"{len(labels)} labels given for {n} vertices")

    return Graph(weights=weights, measure=mu, labels=labels,
                 lattice_dims=tuple(int(d) for d in lattice_dims) if lattice_dims else None)


def _measure_for(mode: str, degree: np.ndarray) -> np.ndarray:
    if mode == 'unit':
        return np.ones_like(degree)
    if mode == 'normalized':
        return degree.copy()
    raise InvalidParameterError(f"measure_mode must be one of {MEASURE_MODES}, got {mode!r}")


def build_cycle(n: int, weight: float = 1.0, measure_mode: str = 'unit') -> Graph:
    """Cycle C_n with constant edge weight"""
    if n < 3:
        raise InvalidParameterError(f"a cycle needs n >= 3 vertices, got {n}")
    return build_lattice_torus([n], measure_mode=measure_mode, weight=weight)


def build_lattice_torus(dims: Sequence[int], measure_mode: str = 'unit', weight: float = 1.0) -> Graph:
    """Discrete torus Z_{L_1} x ... x Z_{L_m} with nearest-neighbour edges"""
    dims = [int(d) for d in dims]
    if not dims or any(d < 3 for d in dims):
        raise InvalidParameterError(f"every torus side must be >= 3, got {dims}")
    if weight <= 0:
        raise InvalidParameterError(f"edge weight must be positive, got {weight}")

    n = int(np.prod(dims))
    index = np.arange(n).reshape(dims)
    edges = []
    for axis in range(len(dims)):
        shifted = np.roll(index, -1, axis=axis)
        for i, j in zip(index.ravel(), shifted.ravel()):
            edges.append((min(i, j), max(i, j), weight))

    degree = np.full(n, 2.0 * len(dims) * weight)
    graph = build_graph(n, edges, _measure_for(measure_mode, degree), lattice_dims=dims)
    logger.debug("Built torus %s with %d vertices (%s measure)", dims, n, measure_mode)
    return graph


def build_random_connected(n: int, edge_prob: float = 0.2, seed: int = 0,
                           weight_range: Tuple[float, float] = (0.5, 2.0),
                           measure_range: Optional[Tuple[float, float]] = (0.5, 2.0),
                           measure_mode: Optional[str] = None) -> Graph:
    """Random spanning tree plus independent extra edges.

    ``measure_mode`` ('unit' or 'normalized') overrides ``measure_range``.
    """
    if n < 2:
        raise InvalidParameterError(f"random graph needs n >= 2, got {n}")
    if not 0.0 <= edge_prob <= 1.0:
        raise InvalidParameterError(f"edge_prob must lie in [0, 1], got {edge_prob}")
    rng = np.random.default_rng(seed)

    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        parent = order[rng.integers(0, k)]
        child = order[k]
        pairs.add((min(parent, child), max(parent, child)))
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                pairs.add((i, j))

    pairs = sorted(pairs)
    weights = rng.uniform(*weight_range, size=len(pairs))
    edges = [(int(i), int(j), float(w)) for (i, j), w in zip(pairs, weights)]

    degree = np.zeros(n)
    for i, j, w in edges:
        degree[i] += w
        degree[j] += w
    if measure_mode is not None:
        measure = _measure_for(measure_mode, degree)
    else:
        measure = rng.uniform(*measure_range, size=n)
    return build_graph(n, edges, measure)


def load_graph(path: str) -> Graph:
    """Read and validate a graph file"""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            payload = json.load(f)
    except OSError as e:
        raise GraphParseError(f"cannot read graph file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise GraphParseError(f"graph file {path} is not valid JSON: {e.msg} (line {e.lineno}, column {e.colno})") from e

    if not isinstance(payload, dict):
        raise GraphParseError("graph file must hold a top-level object")
    unknown = set(payload) - {'vertices', 'mu', 'edges', 'labels'}
    if unknown:
        raise GraphParseError(f"unknown keys in graph file: {sorted(unknown)}")
    for key in ('vertices', 'mu', 'edges'):
        if key not in payload:
            raise GraphParseError(f"graph file is missing '{key}'")
    if not isinstance(payload['mu'], list) or not isinstance(payload['edges'], list):
        raise GraphParseError("'mu' and 'edges' must be arrays")

    graph = build_graph(payload['vertices'], payload['edges'], payload['mu'], payload.get('labels'))
    logger.info("Loaded graph from %s: %d vertices, %d edges", path, graph.vertex_count, len(graph.edges()))
    return graph


def graph_to_dict(g: Graph) -> Dict[str, object]:
    payload: Dict[str, object] = {
        'vertices': g.vertex_count,
        'mu': [float(v) for v in g.measure],
        'edges': [[i, j, w] for i, j, w in g.edges()],
    }
    if g.labels is not None:
        payload['labels'] = list(g.labels)
    return payload


def save_graph(g: Graph, path: str) -> str:
    """Write the graph file; floats use repr so they read back bit-exactly"""
    return write_text(path, json.dumps(graph_to_dict(g), indent=2) + '\n')


def distances_from(g: Graph, x: int) -> np.ndarray:
    """Hop distances from x to every vertex"""
    x = g.check_vertex(x)
    cached = g._distance_cache.get(x)
    if cached is None:
        dist = csgraph.shortest_path(g.weights, directed=False, unweighted=True, indices=x)
        cached = dist.astype(np.int64)
        cached.setflags(write=False)
        g._distance_cache[x] = cached
    return cached


def graph_distance(g: Graph, x: int, y: int) -> int:
    y = g.check_vertex(y)
    return int(distances_from(g, x)[y])


def diameter(g: Graph) -> int:
    dist = csgraph.shortest_path(g.weights, directed=False, unweighted=True)
    return int(dist.max())


def ball(g: Graph, x: int, r: int) -> np.ndarray:
    """Vertices of B(x, r), sorted"""
    return np.flatnonzero(distances_from(g, x) <= r)


def ball_volume(g: Graph, x: int, r: int) -> float:
    """V(x, r): measure of the hop ball of radius r"""
    if r < 0:
        raise InvalidParameterError(f"radius must be nonnegative, got {r}")
    return float(g.measure[distances_from(g, x) <= int(r)].sum())


def ball_volumes(g: Graph, x: int, radii: np.ndarray) -> np.ndarray:
    """V(x, r) for an array of integer radii"""
    dist = distances_from(g, x)
    order = np.argsort(dist, kind='stable')
    cumulative = np.cumsum(g.measure[order])
    counts = np.searchsorted(dist[order], np.asarray(radii), side='right')
    return cumulative[np.maximum(counts, 1) - 1]


@dataclass(frozen=True)
class StructuralConstants:
    d_omega: float
    d_mu: float
    omega_min: float
    mu_max: float

    def to_dict(self) -> Dict[str, float]:
        return {'d_omega': self.d_omega, 'd_mu': self.d_mu,
                'omega_min': self.omega_min, 'mu_max': self.mu_max}


def structural_constants(g: Graph) -> StructuralConstants:
    omega_min = float(g.weights.data.min())
    mu_max = float(g.measure.max())
    return StructuralConstants(
        d_omega=mu_max / omega_min,
        d_mu=float(np.max(g.degree_weights / g.measure)),
        omega_min=omega_min,
        mu_max=mu_max,
    )


@dataclass(frozen=True)
class VolumeGrowthFit:
    exponent_m: float
    prefactor_c: float
    residual: float
    radius_range: Tuple[int, int]
    clipped: bool

    def to_dict(self) -> Dict[str, object]:
        return {'exponent_m': self.exponent_m, 'prefactor_c': self.prefactor_c,
                'residual': self.residual, 'radius_range': list(self.radius_range),
                'clipped': self.clipped}


def fit_volume_growth(g: Graph, centers: Optional[Sequence[int]] = None, r_max: int = Config.VOLUME_FIT_MAX_RADIUS,
                      r_min: int = 1, radius_shift: float = Config.VOLUME_FIT_RADIUS_SHIFT) -> VolumeGrowthFit:
    """Least-squares fit of log V(x, r) = log c + m log(r + radius_shift), averaged over centers.

    ``radius_shift=0`` is the plain regression on log r. The default 1/2
    treats a hop ball of radius r as the continuum ball of radius r + 1/2;
    on lattices the plain slope is biased low at small r (about 1.67
    instead of 2 on a square torus for r <= 10). Radii where any sampled
    ball already holds the whole measure are dropped and the fit reports
    the clipped range.
    """
    if r_max < 2 or r_min < 1 or r_min >= r_max:
        raise InvalidParameterError(f"need 1 <= r_min < r_max and r_max >= 2, got [{r_min}, {r_max}]")
    if not (math.isfinite(radius_shift) and 0 <= radius_shift < 1):
        raise InvalidParameterError(f"radius_shift must lie in [0, 1), got {radius_shift}")
    if centers is None:
        centers = range(g.vertex_count)
    centers = [g.check_vertex(c) for c in centers]
    if not centers:
        raise InvalidParameterError("need at least one center")

    radii = np.arange(r_min, r_max + 1)
    volumes = np.vstack([ball_volumes(g, c, radii) for c in centers])
    saturated = np.any(volumes >= g.total_measure * (1 - 1e-12), axis=0)
    keep = ~saturated
    if np.count_nonzero(keep) < 2:
        raise DegenerateFitError(
            f"balls saturate the graph for radii in [{r_min}, {r_max}]; fewer than two usable radii"
        )
    radii, volumes = radii[keep], volumes[:, keep]

    log_r = np.log(radii + radius_shift)
    log_v = np.log(volumes).mean(axis=0)
    design = np.vstack([log_r, np.ones_like(log_r)]).T
    coef, *_ = np.linalg.lstsq(design, log_v, rcond=None)
    slope, intercept = coef
    misfit = float(np.sqrt(np.mean((design @ coef - log_v) ** 2)))

    fit = VolumeGrowthFit(
        exponent_m=float(slope),
        prefactor_c=float(np.exp(intercept)),
        residual=misfit,
        radius_range=(int(radii[0]), int(radii[-1])),
        clipped=bool(saturated.any()),
    )
    logger.info("Volume growth fit: m=%.4f over radii %s (shift %g)", fit.exponent_m, fit.radius_range, radius_shift)
    return fit
