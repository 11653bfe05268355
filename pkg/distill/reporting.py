"""
Report figures and tables derived from run outputs.

Every figure is written next to a CSV holding the numbers it plots, so
figures can be re-derived without re-training.
"""
import logging
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from matplotlib.figure import Figure

from django.conf import settings

from audio.features import STUDENT_MEL_BINS, log_mel, standardize
from audio.synth import CLASS_SPECS, render_event_with_events
from audio.types import CLASS_NAMES
from core.exceptions import InvalidInputError
from distill.kernels import (
    band_mean,
    channel_normalize,
    frame_gram,
    save_heatmap_png,
)
from distill.losses import Setup
from distill.training import summarize_scores

logger = logging.getLogger(__name__)

SAMPLE_CLASSES = ('alert-signal', 'human-voice')
CSV_OPTIONS = {'index': False, 'lineterminator': '\n', 'float_format': '%.9g'}


def utterance_similarity(spec):
    """frame gram of a (standardized) spectrogram seen as a 1-channel map"""
    values = torch.as_tensor(np.asarray(spec.values, dtype=np.float64))
    return frame_gram(channel_normalize(values[None, None]), 0)


def write_eval_results(result, out_dir):
    """``auprc.csv`` (micro plus per class) and ``pr_curve.png``"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = out_dir / 'auprc.csv'
    result.to_frame().to_csv(table, **CSV_OPTIONS)

    precision, recall = zip(*result.micro.points)
    figure = Figure(figsize=(5, 4))
    ax = figure.subplots()
    ax.plot(recall, precision, drawstyle='steps-post')
    ax.set_xlabel('recall')
    ax.set_ylabel('precision')
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.05)
    ax.set_title(f'micro AUPRC {result.micro_auprc:.3f}')
    figure.tight_layout()
    curve = out_dir / 'pr_curve.png'
    figure.savefig(curve)
    return table, curve


def _setup_order(values):
    order = [s.value for s in Setup]
    return sorted(set(values), key=order.index)


def plot_setup_bars(summary, path):
    """grouped bars: micro AUPRC per setup within each LSTM size, SEM bars"""
    sizes = sorted(summary.lstm_hidden.unique(), reverse=True)
    setups = _setup_order(summary.setup)
    width = 0.8 / len(setups)
    figure = Figure(figsize=(2 + 1.6 * len(sizes), 4))
    ax = figure.subplots()
    for i, setup in enumerate(setups):
        rows = summary[summary.setup == setup].set_index('lstm_hidden')
        means = [rows['mean'].get(size, np.nan) for size in sizes]
        errors = [rows['sem'].get(size, np.nan) for size in sizes]
        positions = np.arange(len(sizes)) + (i - (len(setups) - 1) / 2) * width
        ax.bar(positions, means, width, yerr=np.nan_to_num(errors),
               capsize=3, label=setup)
    ax.set_xticks(np.arange(len(sizes)))
    ax.set_xticklabels([f'LSTM {size}' for size in sizes])
    ax.set_ylabel('test micro AUPRC')
    ax.legend(fontsize='small')
    figure.tight_layout()
    figure.savefig(path)
    return path


def classwise_improvement(results):
    """mean class AUPRC of each setup minus the BCE mean, per class"""
    columns = [f'auprc_{k}' for k in range(len(CLASS_NAMES))]
    ok = results[results.test_micro_auprc.notna()] \
        if 'test_micro_auprc' in results else results.iloc[0:0]
    means = ok.groupby('setup')[columns].mean()
    if Setup.BCE.value not in means.index:
        return pd.DataFrame(columns=['setup', *CLASS_NAMES])
    gain = means.sub(means.loc[Setup.BCE.value], axis=1) \
        .drop(index=Setup.BCE.value)
    gain.columns = list(CLASS_NAMES)
    gain = gain.reindex(_setup_order(gain.index))
    gain.index.name = 'setup'
    return gain.reset_index()


def plot_classwise_improvement(gain, path):
    figure = Figure(figsize=(8, 4))
    ax = figure.subplots()
    width = 0.8 / max(len(gain), 1)
    x = np.arange(len(CLASS_NAMES))
    for i, (_, row) in enumerate(gain.iterrows()):
        values = [row[name] for name in CLASS_NAMES]
        ax.bar(x + (i - (len(gain) - 1) / 2) * width, values, width,
               label=row['setup'])
    ax.axhline(0.0, color='black', linewidth=0.8)
    ax.set_xticks(x)
    ax.set_xticklabels(CLASS_NAMES, rotation=30, ha='right')
    ax.set_ylabel('AUPRC gain over BCE')
    if len(gain):
        ax.legend(fontsize='small')
    figure.tight_layout()
    figure.savefig(path)
    return path


def sample_similarity_figures(out_dir, seed=0, classes=SAMPLE_CLASSES):
    """spectrogram plus frame-gram heatmap for one rendered clip per class"""
    out_dir = Path(out_dir)
    rows, written = [], []
    for name in classes:
        spec = CLASS_SPECS[CLASS_NAMES.index(name)]
        event = render_event_with_events(spec, seed)
        student = standardize(log_mel(event.waveform, STUDENT_MEL_BINS))
        gram = utterance_similarity(student)
        slug = name.replace('-', '_')

        heatmap = save_heatmap_png(gram, out_dir / f'{slug}_frame_gram.png')
        figure = Figure(figsize=(6, 8))
        top, bottom = figure.subplots(
            2, 1, gridspec_kw={'height_ratios': [1, 3]})
        top.imshow(student.values, origin='lower', aspect='auto')
        top.set_title(f'{name}: student log-mel')
        bottom.imshow(gram.values.numpy(), cmap='gray', origin='upper')
        bottom.set_title('frame similarity')
        figure.tight_layout()
        pair = out_dir / f'{slug}_spectrogram_gram.png'
        figure.savefig(pair)
        written += [heatmap, pair]

        row = {'class': name, 'seed': seed, 'period_s': event.period_s}
        if event.period_s:
            row['band_at_period'] = band_mean(gram,
                                              round(event.period_s * 100))
        rows.append(row)

    table = out_dir / 'sample_similarity.csv'
    pd.DataFrame(rows).to_csv(table, **CSV_OPTIONS)
    return [*written, table]


def report(run_dir, out_dir=None, seed=0):
    """figures and tables for a suite directory, written to ``out_dir``
    or ``IUSP_OUTPUT_DIR/report``; the suite directory is only read"""
    run_dir = Path(run_dir)
    source = run_dir / 'suite_results.csv'
    if not source.exists():
        raise InvalidInputError(f'{run_dir}: no suite results to report')
    results = pd.read_csv(source)
    if 'test_micro_auprc' not in results or \
            results.test_micro_auprc.notna().sum() == 0:
        raise InvalidInputError(f'{run_dir}: no completed runs to report')

    out_dir = Path(out_dir) if out_dir \
        else Path(settings.IUSP_OUTPUT_DIR) / 'report'
    out_dir.mkdir(parents=True, exist_ok=True)

    summary = summarize_scores(results)
    table = out_dir / 'improvements.csv'
    summary.to_csv(table, **CSV_OPTIONS)
    bars = plot_setup_bars(summary, out_dir / 'micro_auprc_by_setup.png')

    gain = classwise_improvement(results)
    gain_table = out_dir / 'classwise_improvement.csv'
    gain.to_csv(gain_table, **CSV_OPTIONS)
    gain_plot = plot_classwise_improvement(
        gain, out_dir / 'classwise_improvement.png')

    written = [table, bars, gain_table, gain_plot,
               *sample_similarity_figures(out_dir, seed)]
    logger.info('wrote %d report files to %s', len(written), out_dir)
    return written

