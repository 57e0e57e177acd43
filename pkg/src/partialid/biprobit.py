"""Partially observed bivariate probit: simulation designs and a Gibbs fit.

Latent utilities ``(Z*, W*)`` are bivariate normal with unit variances and
correlation ``rho``. Only ``Y = 1(Z* > 0) 1(W* > 0)`` is observed; ``Z`` is
misconduct and ``W`` its discovery. The target of inference is
``p(x) = Pr(Z = 1 | x)``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dist import (RngStream, binormal_cdf, gaussian_cdf, gaussian_quantile, open_uniform,
                   trunc_normal_draw)

__all__ = ['BiprobitParams', 'SimDesign', 'PAPER_PARAMS', 'wang_cell_probs',
           'cell_probs_from_means', 'latent_means', 'simulate', 'BiprobitDraws',
           'gibbs_fit', 'Comparison', 'evaluate_comparison', 'probit_scale']


@dataclass(frozen=True)
class BiprobitParams:
    gamma0: float
    gamma: tuple
    beta0: float
    beta: tuple
    rho: float

    def __post_init__(self):
        object.__setattr__(self, 'gamma', tuple(float(g) for g in self.gamma))
        object.__setattr__(self, 'beta', tuple(float(b) for b in self.beta))
        if not -1 < self.rho < 1:
            raise ValueError('rho must lie in (-1, 1)')
        if len(self.gamma) != len(self.beta):
            raise ValueError('gamma and beta must have the same length')

    def exclusions(self) -> tuple:
        """Indices active in only one equation: (z-only, w-only)."""
        g, b = np.asarray(self.gamma), np.asarray(self.beta)
        return (tuple(np.flatnonzero((g != 0) & (b == 0))),
                tuple(np.flatnonzero((b != 0) & (g == 0))))

    def has_exclusion_restriction(self) -> bool:
        zo, wo = self.exclusions()
        return len(zo) > 0 and len(wo) > 0


PAPER_PARAMS = BiprobitParams(gamma0=-0.5, gamma=(-1.0, 0.75, 0.0), beta0=-0.5,
                              beta=(-0.75, 0.0, -0.5), rho=0.5)


@dataclass(frozen=True)
class SimDesign:
    kind: str = 'linear'
    n: int = 2000
    x1_range: tuple = (-np.pi / 2, np.pi / 2)
    x23_range: tuple = (-1.5 * np.pi, 1.5 * np.pi)

    def __post_init__(self):
        if self.kind not in ('linear', 'sine'):
            raise ValueError("kind must be 'linear' or 'sine'")
        if self.n < 1:
            raise ValueError('n must be positive')


def latent_means(X, params: BiprobitParams, kind: str = 'linear'):
    """(mu_z, mu_w) for each row of X.

    The sine design follows the printed form literally: the first mean uses
    ``beta`` and the second ``gamma``, with no intercepts.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    g, b = np.asarray(params.gamma), np.asarray(params.beta)
    if kind == 'linear':
        return params.gamma0 + X @ g, params.beta0 + X @ b
    if kind == 'sine':
        return 0.5 + np.sin(X + np.pi) @ b, np.sin(X) @ g
    raise ValueError(f'unknown design kind {kind!r}')


def cell_probs_from_means(mz, mw, rho):
    """Cell probabilities (cc, cn, nc, nn) for (Z, W) given latent means."""
    pz = gaussian_cdf(mz)
    pcc = np.minimum(binormal_cdf(mz, mw, rho), pz)
    pcn = pz - pcc
    pnn = 1.0 - pz
    return pcc, pcn, np.zeros_like(pcc), pnn


def wang_cell_probs(x, params: BiprobitParams):
    mz, mw = latent_means(x, params, 'linear')
    out = cell_probs_from_means(mz, mw, params.rho)
    if np.ndim(x) == 1:
        return tuple(float(v[0]) for v in out)
    return out


def simulate(design: SimDesign, params: BiprobitParams = PAPER_PARAMS, seed: int = 0):
    """Draw covariates, latents and the observed product outcome.

    Returns
    -------
    X : (n, 3) array
    Y : (n,) int array
    truth : dict
        Hidden ``Z``, ``W``, ``p_true = Pr(Z=1|x)`` and
        ``theta_true = Pr(W=1 | Z=1, x)``; for evaluation only.
    """
    gen = RngStream(seed).child('biprobit-sim', design.kind).generator()
    n = design.n
    X = np.column_stack([gen.uniform(*design.x1_range, n),
                         gen.uniform(*design.x23_range, n),
                         gen.uniform(*design.x23_range, n)])
    mz, mw = latent_means(X, params, design.kind)
    e = gen.standard_normal((n, 2))
    r = params.rho
    zs = mz + e[:, 0]
    ws = mw + r * e[:, 0] + np.sqrt(1 - r * r) * e[:, 1]
    Z = (zs > 0).astype(int)
    W = (ws > 0).astype(int)
    p_true = gaussian_cdf(mz)
    pcc = np.minimum(binormal_cdf(mz, mw, r), p_true)
    truth = {'Z': Z, 'W': W, 'p_true': p_true, 'theta_true': pcc / p_true,
             'mu_z': mz, 'mu_w': mw}
    return X, Z * W, truth


@dataclass
class BiprobitDraws:
    gamma0: np.ndarray
    gamma: np.ndarray
    beta0: np.ndarray
    beta: np.ndarray
    rho: np.ndarray
    accept_rate: float = float('nan')
    z_vars: tuple = ()
    w_vars: tuple = ()

    def matrix(self):
        names = (['gamma0'] + [f'gamma{j + 1}' for j in range(self.gamma.shape[1])]
                 + ['beta0'] + [f'beta{j + 1}' for j in range(self.beta.shape[1])] + ['rho'])
        M = np.column_stack([self.gamma0, self.gamma, self.beta0, self.beta, self.rho])
        return names, M

    def free_parameters(self):
        """Names, draws and truth-index of the parameters actually sampled."""
        names, M = self.matrix()
        p = self.gamma.shape[1]
        keep = ([0] + [1 + j for j in self.z_vars] + [p + 1]
                + [p + 2 + j for j in self.w_vars] + [2 * p + 2])
        return [names[k] for k in keep], M[:, keep]

    def p_draws(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return gaussian_cdf(self.gamma0[:, None] + self.gamma @ X.T)

    def to_csv(self, path):
        names, M = self.matrix()
        with open(path, 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['iteration'] + names)
            for i, row in enumerate(M):
                w.writerow([i] + [repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> BiprobitDraws:
        """Read draws written by :meth:`to_csv`."""
        M = np.genfromtxt(path, delimiter=',', names=True)
        names = M.dtype.names
        gam = [n for n in names if re.fullmatch(r'gamma\d+', n) and n != 'gamma0']
        bet = [n for n in names if re.fullmatch(r'beta\d+', n) and n != 'beta0']

        def col(ns):
            return np.column_stack([np.atleast_1d(M[n]) for n in ns])

        return cls(np.atleast_1d(M['gamma0']), col(gam), np.atleast_1d(M['beta0']), col(bet),
                   np.atleast_1d(M['rho']))


def _conj_update(Xd, r, noise_var, prior_var, gen):
    prec = Xd.T @ Xd / noise_var + np.eye(Xd.shape[1]) / prior_var
    chol = np.linalg.cholesky(prec)
    mean = np.linalg.solve(prec, Xd.T @ r / noise_var)
    # mean + chol^-T eps has covariance prec^-1
    return mean + np.linalg.solve(chol.T, gen.standard_normal(Xd.shape[1]))


def _latent_loglik(rho, e1, e2):
    s = 1 - rho * rho
    return -0.5 * len(e1) * np.log(s) - np.sum(e1 * e1 - 2 * rho * e1 * e2 + e2 * e2) / (2 * s)


def _obs_loglik(rho, mz, mw, pos):
    # latents integrated out: Pr(Y=1) = Phi2(mu_z, mu_w, rho)
    p11 = binormal_cdf(mz, mw, rho)
    with np.errstate(divide='ignore'):
        return float(np.sum(np.log(np.where(pos, p11, 1.0 - p11))))


def gibbs_fit(X, Y, n_iter: int = 5000, n_burn: int = 1000, seed: int = 0,
              z_vars=(0, 1), w_vars=(0, 2), prior_var: float = 100.0,
              rho_step: float = 0.3, rho_update: str = 'collapsed',
              on_sweep=None) -> BiprobitDraws:
    """Gibbs sampler with a random-walk Metropolis step for rho.

    Parameters
    ----------
    X : (n, p) array
    Y : (n,) binary array
    n_iter, n_burn : int
        Total sweeps and how many of them to discard.
    z_vars, w_vars : sequences of int
        Columns of X entering each equation (both equations get an
        intercept); leaving a column out of one equation is the exclusion
        restriction that identifies the model.
    prior_var : float
        Variance of the independent normal priors on coefficients.
    on_sweep : callable, optional
        Called as ``on_sweep(it, zs, ws)`` after each latent update, for
        diagnostics.

    Returns
    -------
    BiprobitDraws with ``n_iter - n_burn`` rows.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.asarray(Y)
    if not np.all((Y == 0) | (Y == 1)):
        raise ValueError('Y must be binary (0/1)')
    if not 0 <= n_burn < n_iter:
        raise ValueError('need 0 <= n_burn < n_iter')
    n, p = X.shape
    Xz = np.column_stack([np.ones(n), X[:, list(z_vars)]])
    Xw = np.column_stack([np.ones(n), X[:, list(w_vars)]])
    pos = Y == 1
    gen = RngStream(seed).child('biprobit-gibbs').generator()

    g = np.zeros(Xz.shape[1])
    b = np.zeros(Xw.shape[1])
    rho = 0.0
    zs = np.where(pos, 1.0, -1.0)
    ws = np.where(pos, 1.0, -1.0)
    keep = n_iter - n_burn
    out = np.empty((keep, Xz.shape[1] + Xw.shape[1] + 1))
    acc = 0
    for it in range(n_iter):
        mz, mw = Xz @ g, Xw @ b
        sd = np.sqrt(1 - rho * rho)
        # Z* | W*: Y=1 forces Z*>0; Y=0 with W*>0 forces Z*<0; otherwise free
        lo = np.where(pos, 0.0, -np.inf)
        hi = np.where(~pos & (ws > 0), 0.0, np.inf)
        zs = trunc_normal_draw(mz + rho * (ws - mw), sd, lo, hi, open_uniform(gen, n), tail="log")
        hi = np.where(~pos & (zs > 0), 0.0, np.inf)
        ws = trunc_normal_draw(mw + rho * (zs - mz), sd, lo, hi, open_uniform(gen, n), tail="log")
        if on_sweep is not None:
            on_sweep(it, zs, ws)

        s2 = 1 - rho * rho
        g = _conj_update(Xz, zs - rho * (ws - Xw @ b), s2, prior_var, gen)
        b = _conj_update(Xw, ws - rho * (zs - Xz @ g), s2, prior_var, gen)

        # rho | gamma, beta, Y with the latents collapsed; the latent draw that
        # opens the next sweep completes a joint update of (rho, latents)
        mz, mw = Xz @ g, Xw @ b
        prop = rho + rho_step * gen.standard_normal()
        if prop > 1:
            prop = 2 - prop
        elif prop < -1:
            prop = -2 - prop
        if rho_update == 'collapsed':
            lr = _obs_loglik(prop, mz, mw, pos) - _obs_loglik(rho, mz, mw, pos)
        else:
            e1, e2 = zs - mz, ws - mw
            lr = _latent_loglik(prop, e1, e2) - _latent_loglik(rho, e1, e2)
        if abs(prop) < 1 and np.log(open_uniform(gen)) < lr:
            rho = prop
            if it >= n_burn:
                acc += 1
        if it >= n_burn:
            out[it - n_burn] = np.concatenate([g, b, [rho]])

    kz = Xz.shape[1]
    gamma = np.zeros((keep, p))
    beta = np.zeros((keep, p))
    gamma[:, list(z_vars)] = out[:, 1:kz]
    beta[:, list(w_vars)] = out[:, kz + 1:-1]
    return BiprobitDraws(out[:, 0], gamma, out[:, kz], beta, out[:, -1], acc / keep,
                         tuple(z_vars), tuple(w_vars))


def probit_scale(p, eps: float = 1e-6):
    """Phi^-1 of probabilities clipped to [eps, 1 - eps]."""
    return gaussian_quantile(np.clip(p, eps, 1 - eps))


@dataclass
class Comparison:
    truth: np.ndarray
    estimates: dict
    rmse: dict
    coverage: dict = field(default_factory=dict)

    def to_csv(self, path):
        names = list(self.estimates)
        with open(path, 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['point_index', 'true_probit'] + [f'{m}_probit' for m in names])
            for j, t in enumerate(self.truth):
                w.writerow([j, repr(float(t))] + [repr(float(self.estimates[m][j])) for m in names])

    def to_svg(self, path, title='', provenance=''):
        from .plotting import scatter_svg
        scatter_svg(path, self.truth, self.estimates, title, provenance)

    def table(self) -> str:
        lines = ['method,rmse_probit,coverage90']
        for m, r in self.rmse.items():
            lines.append(f'{m},{r!r},{self.coverage.get(m, float("nan"))!r}')
        return '\n'.join(lines) + '\n'


def evaluate_comparison(p_true, methods: dict, level: float = 0.9) -> Comparison:
    """Compare posterior draws of p from several methods against the truth.

    Parameters
    ----------
    p_true : (J,) array
    methods : dict of name -> (K, J) array of p draws
        Point estimates are posterior means, compared on the probit scale.
    """
    p_true = np.asarray(p_true, dtype=float)
    truth = probit_scale(p_true)
    est, rmse, cov = {}, {}, {}
    a = (1 - level) / 2
    for name, draws in methods.items():
        draws = np.atleast_2d(np.asarray(draws, dtype=float))
        if draws.shape[1] != p_true.shape[0]:
            raise ValueError(f'{name}: {draws.shape[1]} points, truth has {p_true.shape[0]}')
        e = probit_scale(draws.mean(axis=0))
        est[name] = e
        rmse[name] = float(np.sqrt(np.mean((e - truth) ** 2)))
        lo, hi = np.quantile(draws, [a, 1 - a], axis=0)
        cov[name] = float(np.mean((p_true >= lo) & (p_true <= hi)))
    return Comparison(truth, est, rmse, cov)


def save_truth(path, X, Y, truth):
    path = Path(path)
    with open(path, 'w', newline='') as f:
        w = csv.writer(f)
        w.writerow(['row', 'Z', 'W', 'p_true', 'theta_true'])
        for i in range(len(Y)):
            w.writerow([i, int(truth['Z'][i]), int(truth['W'][i]),
                        repr(float(truth['p_true'][i])), repr(float(truth['theta_true'][i]))])
