"""Deterministic standalone SVG figures."""

from __future__ import annotations

import io
from pathlib import Path

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ['save_svg', 'scatter_svg', 'prevalence_svg', 'profile_svg']


def save_svg(fig, path, provenance: str = ''):
    """Write ``fig`` as SVG with fixed ids and no timestamp, plus a provenance comment."""
    with matplotlib.rc_context({'svg.hashsalt': 'partialid', 'svg.fonttype': 'none'}):
        buf = io.StringIO()
        fig.savefig(buf, format='svg', metadata={'Date': None, 'Creator': None})
    plt.close(fig)
    text = buf.getvalue()
    if provenance:
        comment = '<!-- provenance: ' + provenance.replace('--', '- -') + ' -->\n'
        head, sep, rest = text.partition('?>\n')
        text = head + sep + comment + rest if sep else comment + text
    Path(path).write_text(text)


def scatter_svg(path, truth, estimates: dict, title='', provenance=''):
    fig, ax = plt.subplots(figsize=(5, 5))
    shades = ['0.1', '0.6', '0.35']
    for (name, e), col in zip(estimates.items(), shades):
        ax.scatter(truth, e, s=4, c=col, label=name)
    lim = [min(np.min(truth), *(np.min(e) for e in estimates.values())),
           max(np.max(truth), *(np.max(e) for e in estimates.values()))]
    ax.plot(lim, lim, 'k--', lw=0.8)
    ax.set_xlabel('true probit of Pr(Z=1|x)')
    ax.set_ylabel('estimated probit')
    ax.set_title(title)
    ax.legend()
    save_svg(fig, path, provenance)


def prevalence_svg(path, summaries: dict, provenance=''):
    """Boxplot-style 5/25/50/75/95 summaries of alpha, one per spec."""
    names = list(summaries)
    fig, ax = plt.subplots(figsize=(max(4, 0.8 * len(names)), 4))
    stats = []
    for n in names:
        a = np.asarray(summaries[n])
        q05, q25, q50, q75, q95 = np.quantile(a, [0.05, 0.25, 0.5, 0.75, 0.95])
        stats.append({'label': n, 'whislo': q05, 'q1': q25, 'med': q50, 'q3': q75,
                      'whishi': q95, 'fliers': []})
    ax.bxp(stats, showfliers=False)
    ax.set_ylabel('prevalence')
    ax.tick_params(axis='x', labelrotation=60)
    fig.tight_layout()
    save_svg(fig, path, provenance)


def profile_svg(path, x, bands: dict, xlabel='', provenance=''):
    """Median and 90% band of p along one covariate, one panel line per spec."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for name, draws in bands.items():
        lo, med, hi = np.quantile(draws, [0.05, 0.5, 0.95], axis=0)
        line, = ax.plot(x, med, label=name)
        ax.fill_between(x, lo, hi, alpha=0.25, color=line.get_color())
    ax.set_xlabel(xlabel)
    ax.set_ylabel('Pr(Z=1 | x)')
    ax.legend()
    fig.tight_layout()
    save_svg(fig, path, provenance)
