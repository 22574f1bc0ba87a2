"""
Run configuration models: one JSON file drives one command
"""
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import Config

Command = Literal['graph', 'kernel', 'curvature', 'simulate', 'sweep', 'picard']


class StrictModel(BaseModel):
    model_config = ConfigDict(extra='forbid')


class BuilderSpec(StrictModel):
    name: Literal['cycle', 'torus', 'random']
    n: Optional[int] = Field(default=None, ge=2)
    dims: Optional[List[int]] = None
    weight: float = Field(default=1.0, gt=0)
    measure_mode: Optional[Literal['unit', 'normalized']] = None
    edge_prob: float = Field(default=0.2, ge=0, le=1)

    @model_validator(mode='after')
    def check_shape(self) -> 'BuilderSpec':
        if self.name in ('cycle', 'random') and self.n is None:
            raise ValueError(f"builder '{self.name}' needs n")
        if self.name == 'cycle' and self.n < 3:
            raise ValueError(f"a cycle needs n >= 3 vertices, got {self.n}")
        if self.name == 'torus':
            if not self.dims:
                raise ValueError("builder 'torus' needs dims")
            if any(d < 3 for d in self.dims):
                raise ValueError(f"every torus side must be >= 3, got {self.dims}")
        return self


class GraphSource(StrictModel):
    builder: Optional[BuilderSpec] = None
    path: Optional[str] = None

    @model_validator(mode='after')
    def exactly_one_source(self) -> 'GraphSource':
        if (self.builder is None) == (self.path is None):
            raise ValueError("graph source needs exactly one of 'builder' or 'path'")
        return self


class NamedGraph(GraphSource):
    name: str


class GraphParams(StrictModel):
    fit_radius: int = Field(default=Config.VOLUME_FIT_MAX_RADIUS, ge=2)
    radius_shift: float = Field(default=Config.VOLUME_FIT_RADIUS_SHIFT, ge=0, lt=1)
    centers: Optional[List[int]] = None


class BoundParams(StrictModel):
    bound_id: Literal['upper_2_1', 'gaussian_lower_2_2', 'ondiag_lower_2_3', 'volume_lower_2_4']
    t_min: float = Field(default=1.0, gt=0)
    t_max: float = Field(default=100.0, gt=0)
    samples: int = Field(default=50, ge=1)
    times: Optional[List[float]] = None
    vertices: Optional[List[int]] = None
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

    @model_validator(mode='after')
    def static_preconditions(self) -> 'BoundParams':
        if self.times is None and self.t_min > self.t_max:
            raise ValueError(f"need t_min <= t_max, got [{self.t_min}, {self.t_max}]")
        if self.bound_id == 'volume_lower_2_4' and self.C0 is None:
            raise ValueError("bound volume_lower_2_4 needs C0")
        if self.bound_id == 'gaussian_lower_2_2' and None in (self.C2, self.C3, self.n):
            raise ValueError("bound gaussian_lower_2_2 needs C2, C3 and n")
        if self.bound_id == 'ondiag_lower_2_3' and self.C is None:
            raise ValueError("bound ondiag_lower_2_3 needs C")
        return self


class KernelParams(StrictModel):
    axiom_times: List[float] = Field(default_factory=lambda: [0.5, 1.0], min_length=1)
    bounds: List[BoundParams] = Field(default_factory=list)
    write_samples: bool = True


class CurvatureParams(StrictModel):
    condition: Literal['CDE', 'CDE_PRIME'] = 'CDE_PRIME'
    n: float = Field(gt=0)
    K: float = 0.0
    budget: int = Field(default=10_000, ge=1)
    distribution: Literal['uniform', 'lognormal'] = Config.FALSIFIER_DISTRIBUTION


class ControlParams(StrictModel):
    horizon: float = Field(default=1.0, gt=0)
    rel_tol: float = Field(default=Config.REL_TOL, gt=0)
    abs_tol: float = Field(default=Config.ABS_TOL, gt=0)
    blow_up_threshold: float = Field(default=Config.BLOW_UP_THRESHOLD, gt=0)
    min_step: float = Field(default=Config.MIN_STEP, gt=0)
    max_steps: int = Field(default=Config.MAX_STEPS, ge=1)
    output_step: Optional[float] = Field(default=None, gt=0)


class SimulateParams(ControlParams):
    alpha: float = Field(gt=0)
    initial: Optional[List[float]] = None
    profile: Literal['ramp', 'delta', 'constant'] = 'ramp'
    scale: float = Field(default=1.0, ge=0)
    base_vertex: Optional[int] = None
    decay_factor: float = Field(default=Config.DECAY_FACTOR, gt=0)
    criterion: Literal['sup', 'spread'] = 'sup'
    lemma41: bool = False

    @model_validator(mode='after')
    def nonnegative_initial(self) -> 'SimulateParams':
        if self.initial is not None and any(v < 0 for v in self.initial):
            raise ValueError("initial data must be nonnegative")
        return self


class SweepParams(ControlParams):
    family: List[NamedGraph] = Field(default_factory=list)
    alphas: List[float] = Field(min_length=1)
    scales: List[float] = Field(min_length=1)
    profile: Literal['ramp', 'delta', 'constant'] = 'ramp'
    decay_factor: float = Field(default=Config.DECAY_FACTOR, gt=0)
    criterion: Literal['sup', 'spread'] = 'sup'
    fit_radius: int = Field(default=Config.VOLUME_FIT_MAX_RADIUS, ge=2)

    @model_validator(mode='after')
    def positive_entries(self) -> 'SweepParams':
        if any(a <= 0 for a in self.alphas):
            raise ValueError("every alpha must be positive")
        if any(s < 0 for s in self.scales):
            raise ValueError("scales must be nonnegative")
        return self


class PicardParams(StrictModel):
    alpha: float = Field(gt=0)
    gamma: float = Field(default=1.0, gt=0)
    delta: Optional[float] = Field(default=None, ge=0)
    initial: Optional[List[float]] = None
    base_vertex: int = 0
    horizon: float = Field(default=10.0, gt=0)
    intervals: int = Field(default=200, ge=2)
    quadrature: Literal['trapezoid', 'midpoint'] = 'trapezoid'
    grid: Literal['uniform', 'geometric'] = 'uniform'
    first_step: Optional[float] = Field(default=None, gt=0)
    max_iter: int = Field(default=Config.PICARD_MAX_ITER, ge=1)
    tol: float = Field(default=Config.PICARD_TOL, gt=0)
    crosscheck: bool = False
    refinement: bool = False

    @model_validator(mode='after')
    def one_data_source(self) -> 'PicardParams':
        if (self.delta is None) == (self.initial is None):
            raise ValueError("picard needs exactly one of 'delta' or 'initial'")
        if self.grid == 'geometric' and self.first_step is None:
            raise ValueError("geometric grid needs first_step")
        return self


class Tolerances(StrictModel):
    eigen_max_vertices: int = Field(default=Config.EIGEN_MAX_VERTICES, ge=2)
    violation_rel_tol: float = Field(default=Config.VIOLATION_REL_TOL, gt=0)
    log_box: float = Field(default=Config.LOG_BOX, gt=0)
    fd_step: float = Field(default=Config.FD_STEP, gt=0)
    torus_wrap_divisor: int = Field(default=Config.TORUS_WRAP_DIVISOR, ge=1)


COMMAND_BLOCKS = {
    'graph': 'graph_params',
    'kernel': 'kernel',
    'curvature': 'curvature',
    'simulate': 'simulate',
    'sweep': 'sweep',
    'picard': 'picard',
}
_DEFAULT_BLOCKS = {'graph_params': GraphParams, 'kernel': KernelParams}


class RunConfig(StrictModel):
    command: Command
    graph: Optional[GraphSource] = None
    output_dir: str = Config.OUTPUT_DIR
    seed: int = 0
    log_level: Literal['DEBUG', 'INFO', 'WARNING', 'ERROR'] = 'INFO'
    tolerances: Tolerances = Field(default_factory=Tolerances)
    graph_params: Optional[GraphParams] = None
    kernel: Optional[KernelParams] = None
    curvature: Optional[CurvatureParams] = None
    simulate: Optional[SimulateParams] = None
    sweep: Optional[SweepParams] = None
    picard: Optional[PicardParams] = None

    @model_validator(mode='after')
    def one_command_block(self) -> 'RunConfig':
        wanted = COMMAND_BLOCKS[self.command]
        for block in COMMAND_BLOCKS.values():
            if block != wanted and getattr(self, block) is not None:
                raise ValueError(f"block '{block}' does not belong to command '{self.command}'")
        if getattr(self, wanted) is None:
            if wanted not in _DEFAULT_BLOCKS:
                raise ValueError(f"command '{self.command}' needs a '{wanted}' block")
            setattr(self, wanted, _DEFAULT_BLOCKS[wanted]())
        needs_graph = not (self.command == 'sweep' and self.sweep.family)
        if needs_graph and self.graph is None:
            raise ValueError(f"command '{self.command}' needs a 'graph' source")
        return self

    @property
    def params(self) -> Any:
        return getattr(self, COMMAND_BLOCKS[self.command])


def apply_override(data: Dict[str, Any], dotted_key: str, value: Any) -> None:
    """Set data['a']['b'] = value for key 'a.b', creating objects on the way"""
    parts = dotted_key.split('.')
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if not isinstance(child, dict):
            child = {}
            node[part] = child
        node = child
    node[parts[-1]] = value
