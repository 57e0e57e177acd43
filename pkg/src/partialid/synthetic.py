"""Synthetic stand-in for the firm-misconduct data.

The generator mimics the covariates used by the surveillance presets: fiscal
year, media hits, cash and net income as fractions of assets, a qui tam
industry dummy and a one-letter industry division. True misconduct ``z`` is
latent; only ``y = z * w`` is observed, where ``w`` is discovery.

True surveillance rises with net income, so the observed rate rises with
income even though misconduct itself does not. A surveillance model with no
income term (model A) therefore attributes the slope to misconduct, while
one with a strong income term (model B) reverses it.
"""

from __future__ import annotations

import numpy as np

from .dist import RngStream, gaussian_cdf

__all__ = ['MISCONDUCT_COLUMNS', 'simulate_misconduct', 'profile_points']

MISCONDUCT_COLUMNS = ('fiscal_year', 'ft_hits', 'cash', 'net_income', 'qui_tam')
SIC_DIVISIONS = tuple('ABCDEFGHIJ')
_QUI_TAM_RATE = {'D': 0.3, 'E': 0.4, 'I': 0.6}


def simulate_misconduct(n: int, seed: int, base_rate: float = -1.75):
    """Draw ``n`` firms.

    Returns
    -------
    data : dict of column arrays
        The covariates, ``sic`` (str labels) and binary ``y``.
    truth : dict
        ``p_true`` (misconduct probability), ``theta_true`` (discovery
        probability given misconduct) and ``phi_true = p_true * theta_true``.
    """
    gen = RngStream(seed).child('misconduct').generator()
    sic = np.array(SIC_DIVISIONS)[gen.integers(0, len(SIC_DIVISIONS), n)]
    rate = np.array([_QUI_TAM_RATE.get(s, 0.1) for s in sic])
    data = {
        'fiscal_year': gen.integers(1996, 2009, n).astype(float),
        'ft_hits': gen.negative_binomial(1, 0.15, n).astype(float),
        'cash': gen.beta(2.0, 6.0, n),
        'net_income': 0.3 * np.tanh(gen.normal(0.0, 0.8, n)),
        'qui_tam': (gen.uniform(size=n) < rate).astype(float),
        'sic': sic,
    }
    cash01 = data['cash'] / 0.6
    inc01 = (data['net_income'] + 0.3) / 0.6
    year01 = (data['fiscal_year'] - 1996) / 12
    hits01 = np.log1p(data['ft_hits']) / np.log1p(40)
    sic_shift = np.where(sic == 'D', -0.6, np.where(np.isin(sic, ['B', 'E', 'H']), 0.25, 0.0))
    p_true = gaussian_cdf(base_rate - 0.6 * cash01 + sic_shift)
    theta_true = gaussian_cdf(-1.3 + 1.25 * inc01 + 0.8 * hits01 - 0.5 * year01
                              + 0.4 * data['qui_tam'])
    u = gen.uniform(size=(2, n))
    z = u[0] < p_true
    w = u[1] < theta_true
    data['y'] = (z & w).astype(int)
    truth = {'p_true': p_true, 'theta_true': theta_true, 'phi_true': p_true * theta_true}
    return data, truth


def profile_points(data, row: int, vary: str, n_points: int = 20, qlo=0.05, qhi=0.95):
    """Copies of firm ``row`` with ``vary`` swept over its central quantile range."""
    vals = np.quantile(np.asarray(data[vary], dtype=float), np.linspace(qlo, qhi, n_points))
    out = {k: np.repeat(np.asarray(data[k])[row], n_points) for k in MISCONDUCT_COLUMNS}
    out[vary] = vals
    return out
