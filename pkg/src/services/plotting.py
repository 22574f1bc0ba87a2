"""
Deterministic SVG plots of trajectory and sweep CSVs
"""
import logging
import os
from typing import List, Optional

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from ..utils.errors import MalformedInputError  # noqa: E402
from ..utils.io import atomic_path  # noqa: E402
from .semilinear import read_trajectory_frame  # noqa: E402

logger = logging.getLogger(__name__)

# fixed salt and no timestamp keep the SVG bytes reproducible
plt.rcParams['svg.hashsalt'] = 'graph-fujita-toolkit'
plt.rcParams['svg.fonttype'] = 'path'

SWEEP_COLUMNS = ['graph', 'm_fit', 'alpha', 'm_alpha', 'scale', 'verdict', 't_b', 'final_sup', 'horizon']
VERDICT_CODES = {'blow_up': 2, 'undetermined': 1, 'decay_on_horizon': 0}


def _save(fig, path: str) -> str:
    with atomic_path(path) as tmp:
        fig.savefig(tmp, format='svg', metadata={'Date': None})
    plt.close(fig)
    return path


def plot_trajectory(frame: pd.DataFrame, path: str, title: Optional[str] = None) -> str:
    """Time against the value at every vertex; a single row is drawn as markers"""
    vertex_columns = list(frame.columns[1:-2])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    style = 'o' if len(frame) == 1 else '-'
    for column in vertex_columns:
        ax.plot(frame['time'].to_numpy(), frame[column].to_numpy(), style, label=str(column), linewidth=1.2)
    ax.set_xlabel('t')
    ax.set_ylabel('u(t, x)')
    if title:
        ax.set_title(title)
    if len(vertex_columns) <= 12:
        ax.legend(loc='best', fontsize='small')
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_sweep(frame: pd.DataFrame, path: str) -> str:
    """One verdict table per graph, alpha against initial-data scale"""
    graphs = list(dict.fromkeys(frame['graph']))
    fig, axes = plt.subplots(1, len(graphs), figsize=(4.5 * len(graphs), 4), squeeze=False)
    for ax, name in zip(axes[0], graphs):
        part = frame[frame['graph'] == name]
        alphas = sorted(part['alpha'].unique())
        scales = sorted(part['scale'].unique())
        table = np.full((len(alphas), len(scales)), np.nan)
        for row in part.itertuples(index=False):
            table[alphas.index(row.alpha), scales.index(row.scale)] = VERDICT_CODES.get(row.verdict, np.nan)
        ax.imshow(table, cmap='RdYlGn_r', vmin=0, vmax=2, aspect='auto', origin='lower')
        for i, alpha in enumerate(alphas):
            for j, scale in enumerate(scales):
                cell = part[(part['alpha'] == alpha) & (part['scale'] == scale)]
                if not cell.empty:
                    ax.text(j, i, cell['verdict'].iloc[0].replace('_', '\n'), ha='center', va='center', fontsize=7)
        ax.set_xticks(range(len(scales)), [f"{s:g}" for s in scales])
        ax.set_yticks(range(len(alphas)), [f"{a:g}" for a in alphas])
        ax.set_xlabel('scale')
        ax.set_ylabel('alpha')
        ax.set_title(str(name))
    fig.tight_layout()
    return _save(fig, path)


def _read_sweep(path: str) -> Optional[pd.DataFrame]:
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise MalformedInputError(f"cannot read CSV {path}: {e}") from e
    if list(frame.columns) != SWEEP_COLUMNS:
        return None
    if frame.empty:
        raise MalformedInputError(f"sweep CSV {path} has no rows")
    return frame


def emit_plots(csv_path: str, out_dir: Optional[str] = None) -> List[str]:
    """SVG for a trajectory or sweep CSV written by this toolkit, placed next to it by default"""
    out_dir = out_dir or os.path.dirname(os.path.abspath(csv_path))
    stem = os.path.splitext(os.path.basename(csv_path))[0]
    target = os.path.join(out_dir, f"{stem}.svg")

    sweep = _read_sweep(csv_path)
    if sweep is not None:
        written = [plot_sweep(sweep, target)]
    else:
        frame = read_trajectory_frame(csv_path)
        written = [plot_trajectory(frame, target, title=stem)]
    logger.info("Wrote %s", ', '.join(written))
    return written
