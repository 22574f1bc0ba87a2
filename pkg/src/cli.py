"""
Command-line front end: one config file, one command, artifacts under --out
"""
import argparse
import json
import logging
import math
import os
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from .config import Config
from .run_config import BuilderSpec, GraphSource, RunConfig, apply_override
from .services.graph_core import (
    Graph,
    build_cycle,
    build_lattice_torus,
    build_random_connected,
    fit_volume_growth,
    load_graph,
    save_graph,
    structural_constants,
)
from .services.heat_kernel import (
    BoundId,
    BoundSpec,
    check_bound_spec,
    kernel_matrix,
    spectral_decompose,
    verify_bounds,
    verify_kernel_axioms,
)
from .services.operators import CurvatureVerdict, falsify_curvature
from .services.picard import (
    crosscheck_with_integrator,
    geometric_grid,
    picard_solve,
    refinement_order,
    uniform_grid,
    write_picard_trajectory,
)
from .services.plotting import emit_plots
from .services.semilinear import (
    IntegratorControl,
    TrajectoryStatus,
    classify_trajectory,
    fujita_sweep,
    initial_profile,
    integrate_semilinear,
    make_problem,
    verify_lemma41,
    write_trajectory,
)
from .utils.errors import ConfigParseError, InvalidParameterError, ToolkitError, UnknownKeyError
from .utils.io import write_csv, write_json
from .utils.logger import setup_logger

logger = logging.getLogger(__name__)


def _read_config_text(path: str) -> str:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return f.read()
    except OSError as e:
        raise ConfigParseError(f"cannot read config {path}: {e}") from e


def _parse_override(item: str):
    key, sep, raw = item.partition('=')
    if not sep or not key:
        raise ConfigParseError(f"override must look like key=value, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _validation_error(e: ValidationError) -> ToolkitError:
    errors = e.errors()
    unknown = [err for err in errors if err['type'] == 'extra_forbidden']
    if unknown:
        keys = ', '.join('.'.join(str(p) for p in err['loc']) for err in unknown)
        return UnknownKeyError(f"unknown config keys: {keys}")
    details = '; '.join(f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in errors)
    return InvalidParameterError(details)


def parse_config(path: Optional[str] = None, overrides: Sequence[str] = (), out: Optional[str] = None,
                 seed: Optional[int] = None, text: Optional[str] = None) -> RunConfig:
    """Load a JSON RunConfig; --override, --out and --seed take precedence over file values"""
    if text is None:
        text = _read_config_text(path) if path else '{}'
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"invalid JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a JSON object")

    for item in overrides:
        key, value = _parse_override(item)
        apply_override(data, key, value)
    if out is not None:
        data['output_dir'] = out
    if seed is not None:
        data['seed'] = seed

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e) from e


def _build(builder: BuilderSpec, seed: int) -> Graph:
    if builder.name == 'cycle':
        return build_cycle(builder.n, builder.weight, builder.measure_mode or 'unit')
    if builder.name == 'torus':
        return build_lattice_torus(builder.dims, builder.measure_mode or 'unit', builder.weight)
    return build_random_connected(builder.n, builder.edge_prob, seed, measure_mode=builder.measure_mode)


def load_source(source: GraphSource, seed: int) -> Graph:
    if source.path is not None:
        return load_graph(source.path)
    return _build(source.builder, seed)


def _artifact(config: RunConfig, name: str) -> str:
    return os.path.join(config.output_dir, name)


def _finite(value: Any) -> Any:
    """JSON-safe float: NaN and infinities become null"""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _run_graph(config: RunConfig, g: Graph) -> str:
    params = config.graph_params
    save_graph(g, _artifact(config, 'graph.json'))
    constants = structural_constants(g)
    fit = fit_volume_growth(g, centers=params.centers, r_max=params.fit_radius, radius_shift=params.radius_shift)
    write_json(_artifact(config, 'graph_report.json'), {
        'vertices': g.vertex_count,
        'edges': len(g.edges()),
        'structural_constants': constants.to_dict(),
        'volume_growth': fit.to_dict(),
    })
    return f"graph vertices={g.vertex_count} d_mu={constants.d_mu:.6g} m={fit.exponent_m:.4f}"


def _run_kernel(config: RunConfig, g: Graph) -> str:
    params = config.kernel
    tol = config.tolerances
    specs = [BoundSpec(**{**b.model_dump(), 'bound_id': BoundId(b.bound_id)}) for b in params.bounds]
    for spec in specs:
        check_bound_spec(g, spec)
    hk = spectral_decompose(g, max_vertices=tol.eigen_max_vertices)
    axioms = verify_kernel_axioms(hk, params.axiom_times, fd_step=tol.fd_step)
    bounds = []
    if specs:
        samples = _artifact(config, 'bound_samples.csv') if params.write_samples else None
        bounds = verify_bounds(hk, g, specs, samples_path=samples, wrap_divisor=tol.torus_wrap_divisor)
    write_json(_artifact(config, 'kernel_report.json'), {
        'eigenvalues': [float(v) for v in hk.eigenvalues[:10]],
        'axioms': axioms.to_dict(),
        'bounds': [b.to_dict() for b in bounds],
    })
    worst = max(axioms.symmetry_error, axioms.conservation_defect, axioms.semigroup_error)
    holding = sum(b.holds for b in bounds)
    return f"kernel worst_defect={worst:.3e} heat_residual={axioms.heat_equation_relative:.3e} bounds_holding={holding}/{len(bounds)}"


def _run_curvature(config: RunConfig, g: Graph) -> str:
    params = config.curvature
    tol = config.tolerances
    reports = falsify_curvature(g, params.condition, params.n, params.K, params.budget, seed=config.seed,
                                log_box=tol.log_box, rel_tol=tol.violation_rel_tol,
                                distribution=params.distribution)
    write_json(_artifact(config, 'curvature_report.json'), {'reports': [r.to_dict() for r in reports]})
    violated = sum(r.verdict is CurvatureVerdict.VIOLATED for r in reports)
    if violated:
        return f"violated {violated}/{len(reports)} vertices"
    return f"no_violation_found {len(reports)}/{len(reports)} vertices"


def _control(params, output_times: Optional[List[float]] = None) -> IntegratorControl:
    if output_times is None and params.output_step is not None:
        count = int(math.floor(params.horizon / params.output_step + 1e-9))
        output_times = [min(k * params.output_step, params.horizon) for k in range(1, count + 1)]
    return IntegratorControl(
        rel_tol=params.rel_tol,
        abs_tol=params.abs_tol,
        horizon=params.horizon,
        blow_up_threshold=params.blow_up_threshold,
        min_step=params.min_step,
        max_steps=params.max_steps,
        output_times=output_times,
    )


def _run_simulate(config: RunConfig, g: Graph) -> str:
    params = config.simulate
    initial = params.initial if params.initial is not None else initial_profile(g, params.profile, params.scale)
    spec = make_problem(g, params.alpha, initial, params.base_vertex)
    traj = integrate_semilinear(spec, _control(params))
    classification = classify_trajectory(traj, decay_factor=params.decay_factor, criterion=params.criterion)

    csv_path = write_trajectory(_artifact(config, 'trajectory.csv'), traj)
    emit_plots(csv_path)
    report: Dict[str, Any] = {
        'trajectory': {k: _finite(v) for k, v in traj.summary().items()},
        'classification': classification.to_dict(),
        'base_vertex': spec.base_vertex,
    }
    if params.lemma41 and not spec.is_trivial:
        hk = spectral_decompose(g, max_vertices=config.tolerances.eigen_max_vertices)
        residuals = verify_lemma41(traj, hk, spec.base_vertex, spec.alpha)
        report['lemma41_min_residual'] = float(residuals.min()) if residuals.size else None
    write_json(_artifact(config, 'simulate_report.json'), report)

    if traj.status is TrajectoryStatus.BLEW_UP:
        return f"blew_up T_b={traj.blow_up_time:.10g}"
    return f"{traj.status.value} verdict={classification.verdict.value} final_sup={traj.sup_series[-1]:.6g}"


def _run_sweep(config: RunConfig, g: Optional[Graph]) -> str:
    params = config.sweep
    if params.family:
        family = {member.name: load_source(member, config.seed) for member in params.family}
    else:
        family = {'graph': g}
    table = fujita_sweep(family, params.alphas, params.scales, _control(params), profile=params.profile,
                         decay_factor=params.decay_factor, criterion=params.criterion,
                         fit_radius=params.fit_radius)
    csv_path = write_csv(_artifact(config, 'sweep.csv'), table)
    emit_plots(csv_path)
    counts = table['verdict'].value_counts()
    parts = ' '.join(f"{v}={int(counts.get(v, 0))}" for v in ('blow_up', 'decay_on_horizon', 'undetermined'))
    return f"sweep cells={len(table)} {parts}"


def _run_picard(config: RunConfig, g: Graph) -> str:
    params = config.picard
    hk = spectral_decompose(g, max_vertices=config.tolerances.eigen_max_vertices)
    if params.grid == 'uniform':
        grid = uniform_grid(params.horizon, params.intervals, params.quadrature)
    else:
        grid = geometric_grid(params.horizon, params.intervals, params.first_step, params.quadrature)
    e = g.check_vertex(params.base_vertex)
    if params.delta is not None:
        a = params.delta * kernel_matrix(hk, params.gamma)[e]
    else:
        a = np.asarray(params.initial, dtype=float)

    result = picard_solve(hk, a, params.alpha, params.gamma, grid, params.max_iter, params.tol, e=e)
    report = result.to_dict()
    csv_path = write_picard_trajectory(_artifact(config, 'picard_trajectory.csv'), result, hk)
    emit_plots(csv_path)

    if params.crosscheck:
        control = IntegratorControl(horizon=grid.horizon, output_times=list(grid.nodes[1:]))
        traj = integrate_semilinear(make_problem(g, params.alpha, a, e), control)
        report['crosscheck_gap'] = crosscheck_with_integrator(hk, result, traj)
    if params.refinement:
        study = refinement_order(hk, a, params.alpha, params.gamma, params.horizon, params.intervals,
                                 params.quadrature, e=e, tol=params.tol)
        report['refinement'] = {k: _finite(v) for k, v in study.to_dict().items()}
    write_json(_artifact(config, 'picard_report.json'), {k: _finite(v) for k, v in report.items()})

    state = 'converged' if result.converged else 'not_converged'
    return (f"{state} iterations={result.iterations} kappa={result.kappa_empirical:.3e} "
            f"residual={result.fixed_point_residual:.3e}")


_COMMANDS = {
    'graph': _run_graph,
    'kernel': _run_kernel,
    'curvature': _run_curvature,
    'simulate': _run_simulate,
    'sweep': _run_sweep,
    'picard': _run_picard,
}


def run(config: RunConfig) -> str:
    """Execute the configured command, write its artifacts and return the one-line summary"""
    os.makedirs(config.output_dir, exist_ok=True)
    setup_logger('src', log_file=_artifact(config, Config.LOG_FILE_NAME), level=config.log_level)
    logger.info("Running command '%s' into %s", config.command, config.output_dir)

    g = load_source(config.graph, config.seed) if config.graph is not None else None
    summary = _COMMANDS[config.command](config, g)
    logger.info("Finished '%s': %s", config.command, summary)
    return summary


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='graph-fujita',
        description='Heat kernels, curvature checks and semilinear blow-up on finite weighted graphs',
    )
    parser.add_argument('--config', help='JSON run configuration')
    parser.add_argument('--out', help='output directory (overrides output_dir)')
    parser.add_argument('--seed', type=int, help='random seed (overrides seed)')
    parser.add_argument('--override', action='append', default=[], metavar='KEY=VALUE',
                        help='dotted config key with a JSON value; repeatable')
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, args.override, out=args.out, seed=args.seed)
        summary = run(config)
    except ToolkitError as e:
        logger.error("%s: %s", e.category, e)
        print(f"error category={e.category} message={e}", file=sys.stderr)
        return Config.EXIT_CODES[e.category]
    except Exception as e:
        logger.exception("Unexpected failure")
        print(f"error category=internal message={e}", file=sys.stderr)
        return Config.EXIT_CODES['internal']
    print(summary)
    return Config.EXIT_CODES['ok']
