"""
Semilinear heat equation u_t = Δu + u^{1+α} on a finite weighted graph:
adaptive integration with blow-up detection, finite-horizon classification,
the J₀ functional and its inequality, the nonexistence inequalities and
Fujita-threshold sweeps.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import optimize

from ..config import Config
from ..utils.errors import (
    DegenerateFitError,
    IntegrationError,
    InvalidParameterError,
    MalformedInputError,
    SingularEvaluationError,
    SpecMismatchError,
)
from ..utils.io import write_csv
from .graph_core import Graph, fit_volume_growth, structural_constants
from .heat_kernel import HeatKernelOperator, kernel_matrix
from .integrator import DormandPrince54, PIController, initial_step
from .operators import as_field, laplacian

logger = logging.getLogger(__name__)


@dataclass
class ProblemSpec:
    graph: Graph
    alpha: float
    initial: np.ndarray
    base_vertex: int

    @property
    def is_trivial(self) -> bool:
        return not np.any(self.initial > 0)


def make_problem(g: Graph, alpha: float, initial, base_vertex: Optional[int] = None) -> ProblemSpec:
    """Validate α > 0 and a ≥ 0; e defaults to the argmax of a (lowest index on ties).

    Identically zero data is accepted; operations that need a(e) > 0 check it themselves.
    """
    alpha = float(alpha)
    if not (math.isfinite(alpha) and alpha > 0):
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    a = as_field(g, initial, 'initial data')
    if np.any(a < 0):
        raise InvalidParameterError("initial data must be nonnegative")
    e = int(np.argmax(a)) if base_vertex is None else g.check_vertex(base_vertex)
    return ProblemSpec(graph=g, alpha=alpha, initial=a.copy(), base_vertex=e)


@dataclass
class IntegratorControl:
    rel_tol: float = Config.REL_TOL
    abs_tol: float = Config.ABS_TOL
    horizon: float = 1.0
    blow_up_threshold: float = Config.BLOW_UP_THRESHOLD
    min_step: float = Config.MIN_STEP
    max_steps: int = Config.MAX_STEPS
    output_times: Optional[Sequence[float]] = None

    def validate(self) -> None:
        for name in ('rel_tol', 'abs_tol', 'horizon', 'blow_up_threshold', 'min_step'):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"integrator control {name} must be positive, got {value}")
        if self.max_steps < 1:
            raise InvalidParameterError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.output_times is not None:
            times = np.asarray(self.output_times, dtype=float)
            if np.any(times < 0) or np.any(times > self.horizon) or np.any(np.diff(times) <= 0):
                raise InvalidParameterError("output_times must be strictly increasing within [0, horizon]")


class TrajectoryStatus(str, Enum):
    COMPLETED_HORIZON = 'completed_horizon'
    BLEW_UP = 'blew_up'
    STEP_UNDERFLOW = 'step_underflow'


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    status: TrajectoryStatus
    alpha: float
    measure: np.ndarray
    labels: List[str]
    horizon: float
    blow_up_time: Optional[float] = None
    blow_up_bracket: Optional[Tuple[float, float]] = None
    accepted_steps: int = 0
    rejected_steps: int = 0

    @property
    def bracket_width(self) -> Optional[float]:
        if self.blow_up_bracket is None:
            return None
        return self.blow_up_bracket[1] - self.blow_up_bracket[0]

    @property
    def mass_series(self) -> np.ndarray:
        return self.states @ self.measure

    @property
    def reaction_series(self) -> np.ndarray:
        return (self.states ** (1.0 + self.alpha)) @ self.measure

    @property
    def sup_series(self) -> np.ndarray:
        return self.states.max(axis=1)

    @property
    def spread_series(self) -> np.ndarray:
        return self.states.max(axis=1) - self.states.min(axis=1)

    def state_at(self, t: float) -> np.ndarray:
        """State at a recorded time, or linear interpolation between recorded times"""
        if not self.times[0] <= t <= self.times[-1]:
            raise InvalidParameterError(f"t={t} outside the trajectory range [{self.times[0]}, {self.times[-1]}]")
        i = int(np.searchsorted(self.times, t))
        if i < len(self.times) and math.isclose(self.times[i], t, rel_tol=0, abs_tol=1e-12 * max(1.0, t)):
            return self.states[i].copy()
        t0, t1 = self.times[i - 1], self.times[i]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.states[i - 1] + w * self.states[i]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.states, columns=self.labels)
        frame.insert(0, 'time', self.times)
        frame['mass'] = self.mass_series
        frame['reaction'] = self.reaction_series
        return frame

    def summary(self) -> Dict[str, Any]:
        return {
            'status': self.status.value,
            'alpha': self.alpha,
            'horizon': self.horizon,
            'final_time': float(self.times[-1]),
            'blow_up_time': self.blow_up_time,
            'bracket_width': self.bracket_width,
            'accepted_steps': self.accepted_steps,
            'rejected_steps': self.rejected_steps,
            'initial_sup': float(self.sup_series[0]),
            'final_sup': float(self.sup_series[-1]),
            'mass_initial': float(self.mass_series[0]),
            'mass_final': float(self.mass_series[-1]),
        }


def write_trajectory(path: str, traj: Trajectory) -> str:
    return write_csv(path, traj.to_frame())


def read_trajectory_frame(path: str) -> pd.DataFrame:
    """Load a trajectory CSV and check the toolkit's column layout"""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MalformedInputError(f"cannot read trajectory CSV {path}: {e}") from e
    columns = list(frame.columns)
    if len(columns) < 4 or columns[0] != 'time' or columns[-2:] != ['mass', 'reaction']:
        raise MalformedInputError(f"{path} is not a trajectory CSV (columns {columns})")
    if frame.empty:
        raise MalformedInputError(f"trajectory CSV {path} has no rows")
    if not all(pd.api.types.is_numeric_dtype(frame[c]) for c in columns):
        raise MalformedInputError(f"trajectory CSV {path} has non-numeric entries")
    return frame


def reaction_rhs(g: Graph, u, alpha: float) -> np.ndarray:
    """Δu + u^{1+α}"""
    u = as_field(g, u)
    if np.any(u < 0):
        raise InvalidParameterError("reaction term needs nonnegative u")
    return laplacian(g, u) + u ** (1.0 + alpha)


def _rhs_function(g: Graph, alpha: float):
    w = g.weights
    m = g.degree_weights
    mu = g.measure
    power = 1.0 + alpha

    def rhs(t: float, u: np.ndarray) -> np.ndarray:
        with np.errstate(over='ignore', invalid='ignore'):
            return (w @ u - m * u) / mu + np.maximum(u, 0.0) ** power
    return rhs


def _sup(y: np.ndarray) -> float:
    value = float(np.max(y))
    return value if math.isfinite(value) else math.inf


def _bisect_crossing(stepper: DormandPrince54, rhs, t_lo: float, y_lo: np.ndarray, t_hi: float,
                     y_hi: np.ndarray, threshold: float, rtol: float, atol: float):
    """Shrink [t_lo, t_hi] around the first time the sup-norm reaches the threshold"""
    for _ in range(80):
        if t_hi - t_lo <= 4 * np.finfo(float).eps * max(1.0, t_hi):
            break
        t_mid = 0.5 * (t_lo + t_hi)
        y_mid = np.maximum(stepper.attempt(rhs, t_lo, y_lo, t_mid - t_lo, rtol, atol).y_new, 0.0)
        if _sup(y_mid) >= threshold:
            t_hi, y_hi = t_mid, y_mid
        else:
            t_lo, y_lo = t_mid, y_mid
    return t_lo, y_lo, t_hi, y_hi


def _remaining_time(sup_value: float, alpha: float) -> float:
    """Blow-up time of v' = v^{1+α} from v = sup_value"""
    return sup_value ** (-alpha) / alpha if sup_value > 0 else math.inf


def integrate_semilinear(spec: ProblemSpec, control: Optional[IntegratorControl] = None) -> Trajectory:
    """Integrate u_t = Δu + u^{1+α} with Dormand-Prince 5(4) and PI step control.

    Steps are accepted when the scaled RMS error is at most one and no entry
    falls below -abs_tol; smaller negative entries are clamped to zero.
    When an accepted step reaches ``blow_up_threshold`` the crossing is
    bisected and T_b is the lower bracket end plus the remaining life of the
    scalar ODE from the sup-norm there. With ``output_times`` only those
    times are recorded; otherwise every accepted step is.
    """
    control = control or IntegratorControl()
    control.validate()
    g, alpha = spec.graph, spec.alpha
    rtol, atol = control.rel_tol, control.abs_tol
    rhs = _rhs_function(g, alpha)
    stepper = DormandPrince54()
    controller = PIController(order=stepper.m + 1)

    if control.output_times is not None:
        targets = [float(t) for t in control.output_times if t > 0]
        if not targets or targets[-1] < control.horizon:
            targets.append(float(control.horizon))
    else:
        targets = [float(control.horizon)]
    record_all = control.output_times is None

    t = 0.0
    y = spec.initial.astype(float).copy()
    times: List[float] = [t]
    states: List[np.ndarray] = [y.copy()]
    k_first = rhs(t, y)
    h = initial_step(rhs, t, y, stepper.n, rtol, atol, k_first)
    target_index = 0
    accepted = rejected = 0
    previous_sup = _sup(y)
    status = TrajectoryStatus.COMPLETED_HORIZON
    blow_up_time = None
    bracket = None

    while target_index < len(targets):
        if accepted + rejected >= control.max_steps:
            logger.error("Integration stopped at t=%g after %d steps", t, control.max_steps)
            raise IntegrationError(f"max_steps={control.max_steps} exhausted at t={t}")

        target = targets[target_index]
        landing = h >= target - t
        h_try = target - t if landing else h

        if h_try < control.min_step and not landing:
            # the last state is below blow_up_threshold, so this is never a blew_up trajectory
            status = TrajectoryStatus.STEP_UNDERFLOW
            sup_now = _sup(y)
            if sup_now > previous_sup:
                blow_up_time = t + _remaining_time(sup_now, alpha)
                bracket = (t, t + h_try)
            if times[-1] != t:
                times.append(t)
                states.append(y.copy())
            logger.warning("Step %.3e fell below min_step at t=%.12g with sup %.6g%s", h_try, t, sup_now,
                           "" if blow_up_time is None else f", extrapolated T_b={blow_up_time:.12g}")
            break

        attempt = stepper.attempt(rhs, t, y, h_try, rtol, atol, k_first)
        negative = bool(np.any(attempt.y_new < -atol))
        if attempt.error_norm > 1.0 or negative:
            rejected += 1
            factor = 0.5 if negative and attempt.error_norm <= 1.0 else controller.rejected_factor(attempt.error_norm)
            h = h_try * factor
            logger.debug("Rejected step at t=%.12g (error %.3g, negative %s)", t, attempt.error_norm, negative)
            continue

        t_new = target if landing else t + h_try
        y_new = np.maximum(attempt.y_new, 0.0)
        clamped = bool(np.any(attempt.y_new < 0))

        if _sup(y_new) >= control.blow_up_threshold:
            t_lo, y_lo, t_hi, y_hi = _bisect_crossing(stepper, rhs, t, y, t_new, y_new,
                                                      control.blow_up_threshold, rtol, atol)
            times.append(t_hi)
            states.append(y_hi)
            status = TrajectoryStatus.BLEW_UP
            blow_up_time = t_lo + _remaining_time(_sup(y_lo), alpha)
            bracket = (t_lo, t_hi)
            accepted += 1
            break

        accepted += 1
        previous_sup = _sup(y)
        t, y = t_new, y_new
        k_first = rhs(t, y) if clamped else attempt.k_last
        if landing:
            target_index += 1
        if record_all or landing:
            times.append(t)
            states.append(y.copy())
        proposal = h_try * controller.accepted_factor(attempt.error_norm)
        # a step shortened to hit an output time does not shrink the next one
        h = max(proposal, h) if landing else proposal

    traj = Trajectory(
        times=np.array(times),
        states=np.vstack(states),
        status=status,
        alpha=alpha,
        measure=g.measure.copy(),
        labels=[g.label(x) for x in range(g.vertex_count)],
        horizon=float(control.horizon),
        blow_up_time=blow_up_time,
        blow_up_bracket=bracket,
        accepted_steps=accepted,
        rejected_steps=rejected,
    )
    if status is TrajectoryStatus.BLEW_UP:
        logger.info("Blow-up detected: T_b=%.12g (bracket width %.3e, %d steps)",
                    blow_up_time, traj.bracket_width, accepted)
    else:
        logger.info("Integration finished: %s at t=%g, sup=%.6g (%d accepted, %d rejected)",
                    status.value, traj.times[-1], traj.sup_series[-1], accepted, rejected)
    return traj


class Verdict(str, Enum):
    BLOW_UP = 'blow_up'
    DECAY_ON_HORIZON = 'decay_on_horizon'
    UNDETERMINED = 'undetermined'


@dataclass
class Classification:
    verdict: Verdict
    horizon: float
    criterion: str
    evidence: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'verdict': self.verdict.value, 'horizon': self.horizon,
                'criterion': self.criterion, 'evidence': dict(self.evidence)}


def classify_trajectory(traj: Trajectory, horizon: Optional[float] = None,
                        decay_factor: float = Config.DECAY_FACTOR, criterion: str = 'sup') -> Classification:
    """Finite-horizon verdict.

    ``criterion='sup'`` compares final and initial sup-norms, ``'spread'``
    compares max - min across vertices. Zero data always decays.
    """
    if criterion not in ('sup', 'spread'):
        raise InvalidParameterError(f"criterion must be 'sup' or 'spread', got {criterion!r}")
    horizon = traj.horizon if horizon is None else float(horizon)
    sup = traj.sup_series
    spread = traj.spread_series
    duration = max(float(traj.times[-1]), np.finfo(float).tiny)
    evidence = {
        'sup_initial': float(sup[0]),
        'sup_final': float(sup[-1]),
        'sup_max': float(sup.max()),
        'spread_initial': float(spread[0]),
        'spread_final': float(spread[-1]),
        'mass_growth_rate': float((traj.mass_series[-1] - traj.mass_series[0]) / duration),
    }

    if traj.status is TrajectoryStatus.BLEW_UP:
        verdict = Verdict.BLOW_UP
    elif traj.status is TrajectoryStatus.STEP_UNDERFLOW or traj.times[-1] < horizon * (1 - 1e-12):
        verdict = Verdict.UNDETERMINED
    elif sup[0] == 0:
        verdict = Verdict.DECAY_ON_HORIZON
    else:
        series = sup if criterion == 'sup' else spread
        decayed = series[-1] <= decay_factor * series[0]
        verdict = Verdict.DECAY_ON_HORIZON if decayed else Verdict.UNDETERMINED
    return Classification(verdict=verdict, horizon=horizon, criterion=criterion, evidence=evidence)


def _check_graph(hk: HeatKernelOperator, g: Graph) -> None:
    if g is not hk.graph and not g.same_as(hk.graph):
        raise SpecMismatchError("heat kernel operator was built for a different graph")


def _admissible_data(hk: HeatKernelOperator, a, e: int) -> Tuple[np.ndarray, int]:
    a = as_field(hk.graph, a, 'initial data')
    e = hk.graph.check_vertex(e)
    if np.any(a < 0):
        raise InvalidParameterError("initial data must be nonnegative")
    if not a[e] > 0:
        raise InvalidParameterError(f"initial data must be positive at the base vertex {e}")
    return a, e


def j0_functional(hk: HeatKernelOperator, a, t: float, e: int) -> float:
    """J₀(t) = Σ_x μ(x) p(t,e,x) a(x)"""
    a, e = _admissible_data(hk, a, e)
    row = kernel_matrix(hk, t)[e]
    return float(np.dot(row, hk.graph.measure * a))


def verify_lemma41(traj: Trajectory, hk: HeatKernelOperator, e: int, alpha: float,
                   times: Optional[Sequence[float]] = None) -> np.ndarray:
    """Residuals J₀(t)^{-α} - u(t,e)^{-α} - αt at recorded times (default: every t > 0)"""
    if not np.array_equal(traj.measure, hk.graph.measure):
        raise SpecMismatchError("trajectory and heat kernel operator belong to different graphs")
    e = hk.graph.check_vertex(e)
    a = traj.states[0]
    if times is None:
        indices = np.flatnonzero(traj.times > 0)
    else:
        indices = []
        for t in times:
            i = int(np.argmin(np.abs(traj.times - t)))
            if not math.isclose(traj.times[i], t, rel_tol=1e-12, abs_tol=1e-14):
                raise InvalidParameterError(f"time {t} is not a recorded trajectory time")
            indices.append(i)
        indices = np.array(indices, dtype=int)

    residuals = np.empty(len(indices))
    for k, i in enumerate(indices):
        t = float(traj.times[i])
        u_e = float(traj.states[i, e])
        if not u_e > 0:
            raise SingularEvaluationError(f"u(t,e) = 0 at t={t}")
        j0 = j0_functional(hk, a, t, e)
        residuals[k] = j0 ** -alpha - u_e ** -alpha - alpha * t
    return residuals


def lifespan_upper_bound(hk: HeatKernelOperator, a, e: int, alpha: float, t_max: float,
                         samples: int = 400) -> Optional[float]:
    """First t with J₀(t)^{-α} ≤ αt; no nonnegative solution survives past it. None if beyond t_max."""
    a, e = _admissible_data(hk, a, e)
    if not t_max > 0:
        raise InvalidParameterError(f"t_max must be positive, got {t_max}")

    def gap(t: float) -> float:
        return j0_functional(hk, a, t, e) ** -alpha - alpha * t

    grid = np.geomspace(min(1e-6, t_max / 2), t_max, samples)
    values = np.array([gap(t) for t in grid])
    below = np.flatnonzero(values <= 0)
    if below.size == 0:
        return None
    i = int(below[0])
    if i == 0:
        return float(grid[0])
    return float(optimize.brentq(gap, grid[i - 1], grid[i], xtol=1e-14, rtol=4 * np.finfo(float).eps))


def mass_balance_defect(traj: Trajectory, g: Graph, alpha: float) -> float:
    """Largest cumulative |Δ∫u dμ - ∫∫u^{1+α} dμ dt| along the trajectory.

    The time integral of the reaction uses the trapezoid rule with the
    Hermite end correction, the derivative of ∫u^{1+α} dμ coming from the
    equation itself.
    """
    if not np.array_equal(traj.measure, g.measure):
        raise SpecMismatchError("trajectory belongs to a different graph")
    if len(traj.times) < 2:
        return 0.0
    mu = g.measure
    states = traj.states
    reaction = (states ** (1.0 + alpha)) @ mu
    rhs = np.vstack([reaction_rhs(g, u, alpha) for u in states])
    derivative = ((1.0 + alpha) * states ** alpha * rhs) @ mu

    h = np.diff(traj.times)
    quadrature = 0.5 * h * (reaction[:-1] + reaction[1:]) + h ** 2 / 12.0 * (derivative[:-1] - derivative[1:])
    increments = np.diff(states @ mu)
    return float(np.abs(np.cumsum(increments - quadrature)).max())


def c_bar(mu_e: float, a_e: float, c0: float, C0: float, m: float) -> float:
    """μ(e)a(e) / (4 c₀ C₀^m)"""
    for name, value in (('mu_e', mu_e), ('a_e', a_e), ('c0', c0), ('C0', C0), ('m', m)):
        if not value > 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    return mu_e * a_e / (4.0 * c0 * C0 ** m)


def c_bar_prime(mu_e: float, a_e: float, c0: float, C: float, m: float) -> float:
    """2^{m/2} c₀^{-1} C μ(e) a(e)"""
    for name, value in (('mu_e', mu_e), ('a_e', a_e), ('c0', c0), ('C', C), ('m', m)):
        if not value > 0:
            raise InvalidParameterError(f"{name} must be positive, got {value}")
    return 2.0 ** (m / 2.0) * C * mu_e * a_e / c0


@dataclass
class NonexistenceReport:
    mode: str
    constant: float
    m: float
    alpha: float
    crossing_time: Optional[float]
    fails_from_start: bool
    t_range: Tuple[float, float]

    @property
    def contradiction_found(self) -> bool:
        return self.crossing_time is not None

    def to_dict(self) -> Dict[str, Any]:
        return {'mode': self.mode, 'constant': self.constant, 'm': self.m, 'alpha': self.alpha,
                'crossing_time': self.crossing_time, 'fails_from_start': self.fails_from_start,
                't_range': list(self.t_range), 'contradiction_found': self.contradiction_found}


def nonexistence_inequality_check(g: Graph, hk: HeatKernelOperator, a, e: int, alpha: float, m: float,
                                  mode: str = 'corollary', c0: Optional[float] = None,
                                  C0: Optional[float] = None, C: Optional[float] = None,
                                  constant: Optional[float] = None,
                                  t_grid: Optional[Sequence[float]] = None) -> NonexistenceReport:
    """Evaluate the growth inequality a global solution would have to satisfy.

    ``mode='theorem'``: (t log t)^{mα} ≥ α C̄^α t with C̄ = μ(e)a(e)/(4c₀C₀^m), C₀ > 2D_μe.
    ``mode='corollary'``: t^{mα/2} ≥ α C̄′^α t with C̄′ given as ``constant``
    or built from c₀ and C. The crossing time is the point after which the
    inequality fails through the end of the grid; None if it holds at the end.
    """
    _check_graph(hk, g)
    if not alpha > 0 or not m > 0:
        raise InvalidParameterError(f"alpha and m must be positive, got alpha={alpha}, m={m}")

    if mode == 'theorem':
        if constant is None:
            if c0 is None or C0 is None:
                raise InvalidParameterError("theorem mode needs c0 and C0 (or the constant itself)")
            threshold = 2.0 * structural_constants(g).d_mu * math.e
            if not C0 > threshold:
                raise InvalidParameterError(f"C0={C0} must exceed 2 D_mu e = {threshold:.6g}")
            a_field, e = _admissible_data(hk, a, e)
            constant = c_bar(float(g.measure[e]), float(a_field[e]), c0, C0, m)
        default_grid = np.geomspace(math.e, 1e12, 4000)

        def log_gap(t: float) -> float:
            return m * alpha * math.log(t * math.log(t)) - math.log(alpha) - alpha * math.log(constant) - math.log(t)
    elif mode == 'corollary':
        if constant is None:
            if c0 is None or C is None:
                raise InvalidParameterError("corollary mode needs c0 and C (or the constant itself)")
            a_field, e = _admissible_data(hk, a, e)
            constant = c_bar_prime(float(g.measure[e]), float(a_field[e]), c0, C, m)
        default_grid = np.geomspace(0.5, 1e12, 4000)

        def log_gap(t: float) -> float:
            return 0.5 * m * alpha * math.log(t) - math.log(alpha) - alpha * math.log(constant) - math.log(t)
    else:
        raise InvalidParameterError(f"mode must be 'theorem' or 'corollary', got {mode!r}")
    if not constant > 0:
        raise InvalidParameterError(f"inequality constant must be positive, got {constant}")

    grid = np.asarray(default_grid if t_grid is None else sorted(t_grid), dtype=float)
    if grid.size < 2 or grid[0] <= (1.0 if mode == 'theorem' else 0.0):
        raise InvalidParameterError("time grid needs two points, above 1 in theorem mode and above 0 otherwise")

    values = np.array([log_gap(t) for t in grid])
    holding = np.flatnonzero(values >= 0)
    crossing = None
    fails_from_start = False
    if values[-1] < 0:
        if holding.size == 0:
            crossing = float(grid[0])
            fails_from_start = True
        else:
            i = int(holding[-1])
            crossing = float(optimize.brentq(log_gap, grid[i], grid[i + 1], xtol=1e-14,
                                             rtol=4 * np.finfo(float).eps))

    report = NonexistenceReport(mode=mode, constant=float(constant), m=float(m), alpha=float(alpha),
                                crossing_time=crossing, fails_from_start=fails_from_start,
                                t_range=(float(grid[0]), float(grid[-1])))
    logger.info("Nonexistence inequality (%s, m*alpha=%g): crossing time %s", mode, m * alpha, crossing)
    return report


def initial_profile(g: Graph, profile: str, scale: float) -> np.ndarray:
    """'ramp': a(x_k) = k+1, 'delta': indicator of vertex 0, 'constant': a ≡ 1; times scale"""
    n = g.vertex_count
    if profile == 'ramp':
        base = np.arange(1, n + 1, dtype=float)
    elif profile == 'delta':
        base = np.zeros(n)
        base[0] = 1.0
    elif profile == 'constant':
        base = np.ones(n)
    else:
        raise InvalidParameterError(f"unknown initial profile {profile!r}")
    return scale * base


def fujita_sweep(family: Mapping[str, Graph], alphas: Sequence[float], scales: Sequence[float],
                 control: Optional[IntegratorControl] = None, profile: str = 'ramp',
                 decay_factor: float = Config.DECAY_FACTOR, criterion: str = 'sup',
                 fit_radius: int = Config.VOLUME_FIT_MAX_RADIUS) -> pd.DataFrame:
    """Classify one run per (graph, α, scale) and tabulate against m·α"""
    if not family or not alphas or not scales:
        raise InvalidParameterError("sweep needs at least one graph, one alpha and one scale")
    if any(s < 0 for s in scales):
        raise InvalidParameterError("scales must be nonnegative")
    control = control or IntegratorControl()

    rows = []
    for name, g in family.items():
        try:
            m_fit = fit_volume_growth(g, r_max=fit_radius).exponent_m
        except DegenerateFitError:
            logger.warning("Volume growth fit failed on %s; m is reported as NaN", name)
            m_fit = math.nan
        for alpha in alphas:
            for scale in scales:
                spec = make_problem(g, alpha, initial_profile(g, profile, scale))
                traj = integrate_semilinear(spec, control)
                result = classify_trajectory(traj, decay_factor=decay_factor, criterion=criterion)
                rows.append({
                    'graph': name,
                    'm_fit': m_fit,
                    'alpha': float(alpha),
                    'm_alpha': m_fit * alpha,
                    'scale': float(scale),
                    'verdict': result.verdict.value,
                    't_b': traj.blow_up_time if traj.status is TrajectoryStatus.BLEW_UP else math.nan,
                    'final_sup': float(traj.sup_series[-1]),
                    'horizon': result.horizon,
                })
                logger.info("Sweep cell %s alpha=%g scale=%g: %s", name, alpha, scale, result.verdict.value)
    return pd.DataFrame(rows, columns=['graph', 'm_fit', 'alpha', 'm_alpha', 'scale', 'verdict',
                                       't_b', 'final_sup', 'horizon'])
