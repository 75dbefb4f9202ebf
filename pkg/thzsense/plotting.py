"""Figures of a finished run: PDP overlays and attenuation probability functions."""

import glob
import logging
import math
import os

import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from thzsense.attenuation import sample_probability_function  # noqa: E402
from thzsense.errors import DataException  # noqa: E402

log = logging.getLogger(__name__)


def new_figure(width=8, height=None):
    """Figure with font sizes scaled to its width; height defaults to the golden ratio."""
    golden_ratio = (math.sqrt(5) - 1.0) / 2.0
    if not height:
        height = width * golden_ratio
    fig, ax = plt.subplots(figsize=(width, height), facecolor='w')
    ax.tick_params(labelsize=width * 1.5)
    return fig, ax


def plot_pdp_overlay(tables, path, max_path_length_cm=400.0, floor_db=-60.0):
    """Overlays PDP tables (path_length_cm, power_db) keyed by label."""
    fig, ax = new_figure()
    for label, frame in tables.items():
        shown = frame[frame['path_length_cm'] <= max_path_length_cm]
        ax.plot(shown['path_length_cm'], np.maximum(shown['power_db'], floor_db),
                linewidth=1.0, label=label)
    ax.set_xlabel('Path length [cm]', fontsize=12)
    ax.set_ylabel('Power [dB]', fontsize=12)
    ax.set_ylim(floor_db, 3)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    log.debug('wrote %s', path)


def plot_probability_functions(tables, path, bins=40):
    """Histogram probability functions of the A_k samples, one curve per offset."""
    if not tables:
        raise DataException('no attenuation tables to plot')
    pooled = np.concatenate([frame['a_db'].to_numpy() for frame in tables.values()])
    edges = np.histogram_bin_edges(pooled, bins=bins)
    centers = 0.5 * (edges[:-1] + edges[1:])
    fig, ax = new_figure()
    for label, frame in tables.items():
        probabilities = sample_probability_function(frame['a_db'].to_numpy(), edges)
        ax.plot(centers, probabilities, marker='.', linewidth=1.0, label=label)
    ax.set_xlabel('Excess attenuation [dB]', fontsize=12)
    ax.set_ylabel('Probability', fontsize=12)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    log.debug('wrote %s', path)


def _offset_key(directory):
    name = os.path.basename(directory)
    try:
        return float(name[2:-2])
    except ValueError:
        return math.inf


def plot_run(run_dir, out_dir, band_ids=None):
    """Draws the figures of every band directory in a run; returns the written paths."""
    written = []
    bands = band_ids or sorted(
        d for d in os.listdir(run_dir) if os.path.isdir(os.path.join(run_dir, d)))
    if not bands:
        raise DataException('%s holds no band directories' % run_dir)
    os.makedirs(out_dir, exist_ok=True)
    for band in bands:
        band_dir = os.path.join(run_dir, band)
        if not os.path.isdir(band_dir):
            raise DataException('band directory %s not found' % band_dir)
        offsets = sorted(glob.glob(os.path.join(band_dir, 'y_*cm')), key=_offset_key)
        pdps = {}
        baseline_pdp = os.path.join(band_dir, 'baseline_pdp.csv')
        if os.path.exists(baseline_pdp):
            pdps['no target'] = pd.read_csv(baseline_pdp)
        attenuation = {}
        for directory in offsets:
            label = os.path.basename(directory)
            pdps[label] = pd.read_csv(os.path.join(directory, 'pdp.csv'))
            attenuation[label] = pd.read_csv(os.path.join(directory, 'attenuation.csv'))

        path = os.path.join(out_dir, '%s_pdp.png' % band)
        plot_pdp_overlay(pdps, path)
        written.append(path)
        if attenuation:
            path = os.path.join(out_dir, '%s_probability.png' % band)
            plot_probability_functions(attenuation, path)
            written.append(path)
    return written
