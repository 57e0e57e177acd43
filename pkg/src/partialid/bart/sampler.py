"""Probit sum-of-trees sampler: configuration, state and the fitting driver."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .._hashing import hash64
from ..dist import RngStream, gaussian_cdf, gaussian_quantile, open_uniform, trunc_normal_draw
from ..draws import PhiDraws, Provenance, grid_hash
from . import _kernels
from .tree import RegTree, TreeEnsemble

__all__ = ['BartConfig', 'BartState', 'ConstantCovariateWarning', 'FlatResponseWarning',
           'build_cutpoints', 'bin_covariates', 'init_state', 'mcmc_iteration',
           'fit_probit_bart', 'sample_prior_latent', 'phi_from_latent']

# largest double below one; keeps Phi(f) strictly inside (0, 1)
_ONE_MINUS = float(np.nextafter(1.0, 0.0))
_TINY = float(np.finfo(float).tiny)


class ConstantCovariateWarning(UserWarning):
    pass


class FlatResponseWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BartConfig:
    """Prior and chain settings for :func:`fit_probit_bart`.

    ``sigma_mu = 3 / (k sqrt(L))`` is derived, so the prior on the latent
    sum of trees puts about 95% of its mass inside (-3, 3) at every x.
    """

    L: int = 200
    alpha_split: float = 0.95
    beta_split: float = 2.0
    k: float = 2.0
    n_cutpoints: int = 100
    n_burn: int = 500
    n_keep: int = 1000
    thin: int = 1
    seed: int = 0
    max_leaves: int = 64

    def __post_init__(self):
        if self.L < 1:
            raise ValueError('L must be at least 1')
        if not 0 <= self.alpha_split < 1:
            raise ValueError('alpha_split must lie in [0, 1)')
        if self.beta_split < 0:
            raise ValueError('beta_split must be nonnegative')
        if self.k <= 0:
            raise ValueError('k must be positive')
        if self.n_cutpoints < 1:
            raise ValueError('n_cutpoints must be positive')
        if self.n_burn < 0 or self.thin < 1:
            raise ValueError('n_burn must be >= 0 and thin >= 1')
        if self.n_keep < 1:
            raise ValueError('n_keep must be positive')
        if self.max_leaves < 2:
            raise ValueError('max_leaves must be at least 2')
        if not 0 <= self.seed < 2**64:
            raise ValueError('seed must be a 64-bit unsigned integer')

    @property
    def sigma_mu(self) -> float:
        return 3.0 / (self.k * np.sqrt(self.L))

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> int:
        return hash64(self.to_dict())


def build_cutpoints(X, n_cutpoints: int) -> list:
    """Empirical-quantile split grids, one per covariate.

    Levels are ``i / (n_cutpoints + 1)`` with linear interpolation between
    order statistics. Cutpoints that induce the same partition of the data
    are merged, as are those that leave one side empty, so the grid depends
    on the data only through ranks. A constant column gets an empty grid and
    a :class:`ConstantCovariateWarning`.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    levels = np.arange(1, n_cutpoints + 1) / (n_cutpoints + 1)
    pos = (n - 1) * levels
    lo = np.floor(pos).astype(int)
    w = pos - lo
    hi = np.minimum(lo + 1, n - 1)
    grids = []
    for v in range(p):
        xs = np.sort(X[:, v])
        if xs[0] == xs[-1]:
            warnings.warn(f'covariate {v} is constant and is excluded from splitting',
                          ConstantCovariateWarning, stacklevel=2)
            grids.append(np.empty(0))
            continue
        a, b = xs[lo], xs[hi]
        q = a + w * (b - a)
        # a strictly interior level must not round back onto the lower value
        interior = (w > 0) & (b > a)
        q = np.where(interior & (q <= a), np.nextafter(a, np.inf), q)
        # rank of the rule "x < q" among the sorted values; q > a means x <= a
        ranks = np.where(interior, np.searchsorted(xs, a, 'right'),
                         np.searchsorted(xs, a, 'left'))
        keep = (ranks > 0) & (ranks < n)
        _, first = np.unique(ranks[keep], return_index=True)
        grids.append(q[keep][np.sort(first)])
    return grids


def bin_covariates(X, cutpoints) -> np.ndarray:
    """``xbin[i, v]`` = number of cutpoints of ``v`` that are <= ``X[i, v]``."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != len(cutpoints):
        raise ValueError(f'expected {len(cutpoints)} covariates, got {X.shape[1]}')
    out = np.empty(X.shape, dtype=np.int32)
    for v, cuts in enumerate(cutpoints):
        out[:, v] = np.searchsorted(cuts, X[:, v], side='right')
    return out


@dataclass
class BartState:
    """Mutable chain state: node arrays of all trees, latents and counters."""

    var: np.ndarray
    cut: np.ndarray
    left: np.ndarray
    right: np.ndarray
    parent: np.ndarray
    depth: np.ndarray
    mu: np.ndarray
    alive: np.ndarray
    leaf_of: np.ndarray
    z: np.ndarray
    fit: np.ndarray
    probit_offset: float
    cutpoints: list
    counters: np.ndarray = field(default_factory=lambda: np.zeros(6, dtype=np.int64))

    @property
    def L(self) -> int:
        return self.var.shape[0]

    def n_leaves(self) -> np.ndarray:
        return np.sum(self.alive & (self.left < 0), axis=1)

    def tree(self, l: int) -> RegTree:
        """Compact copy of tree ``l`` as a :class:`RegTree`."""
        order = []
        stack = [0]
        while stack:
            j = stack.pop()
            order.append(j)
            if self.left[l, j] >= 0:
                stack.extend([self.right[l, j], self.left[l, j]])
        idx = {j: i for i, j in enumerate(order)}
        ch = np.array([idx[self.left[l, j]] if self.left[l, j] >= 0 else -1 for j in order])
        rh = np.array([idx[self.right[l, j]] if self.right[l, j] >= 0 else -1 for j in order])
        o = np.array(order)
        return RegTree(self.var[l, o].copy(), self.cut[l, o].copy(), ch, rh,
                       self.mu[l, o].copy(), self.depth[l, o].copy())

    def ensemble(self) -> TreeEnsemble:
        return TreeEnsemble([self.tree(l) for l in range(self.L)], self.probit_offset,
                            self.cutpoints)

    def acceptance(self) -> dict:
        c = self.counters
        return {name: (int(c[2 * m + 1]), int(c[2 * m]))
                for m, name in enumerate(('grow', 'prune', 'change'))}


def init_state(n: int, cutpoints, config: BartConfig, probit_offset: float) -> BartState:
    L, cap = config.L, 2 * config.max_leaves
    alive = np.zeros((L, cap), dtype=np.bool_)
    alive[:, 0] = True
    return BartState(
        var=np.full((L, cap), -1, np.int32), cut=np.full((L, cap), -1, np.int32),
        left=np.full((L, cap), -1, np.int32), right=np.full((L, cap), -1, np.int32),
        parent=np.full((L, cap), -1, np.int32), depth=np.zeros((L, cap), np.int32),
        mu=np.zeros((L, cap)), alive=alive, leaf_of=np.zeros((L, n), np.int32),
        z=np.zeros(n), fit=np.zeros(n), probit_offset=float(probit_offset),
        cutpoints=list(cutpoints))


def _as_arrays(cutpoints):
    ncut = np.array([len(c) for c in cutpoints], dtype=np.int64)
    avail = np.flatnonzero(ncut > 0).astype(np.int64)
    return ncut, avail


def mcmc_iteration(state: BartState, xbin, y, config: BartConfig, gen: np.random.Generator,
                   prior_only: bool = False) -> BartState:
    """One Gibbs sweep, updating ``state`` in place.

    Latents are redrawn from their truncated full conditionals first
    (skipped when ``prior_only``), then every tree gets one GROW, PRUNE or
    CHANGE proposal followed by a conjugate draw of its leaf values.
    """
    n = xbin.shape[0]
    if not prior_only:
        y = np.asarray(y)
        pos = y == 1
        mean = state.probit_offset + state.fit
        lower = np.where(pos, 0.0, -np.inf)
        upper = np.where(pos, np.inf, 0.0)
        state.z = trunc_normal_draw(mean, 1.0, lower, upper, open_uniform(gen, n), tail="log")
    target = state.z - state.probit_offset
    unif = open_uniform(gen, (config.L, 5))
    normals = gen.standard_normal((config.L, config.max_leaves))
    ncut, avail = _as_arrays(state.cutpoints)
    state.fit = _kernels.sweep(
        xbin, ncut, avail, target, state.var, state.cut, state.left, state.right,
        state.parent, state.depth, state.mu, state.alive, state.leaf_of, unif, normals,
        config.alpha_split, config.beta_split, config.sigma_mu, prior_only, state.counters)
    return state


def phi_from_latent(f) -> np.ndarray:
    """Phi(f) guarded to stay strictly inside (0, 1)."""
    return np.clip(gaussian_cdf(f), _TINY, _ONE_MINUS)


def _prepare(X, grid):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]
    if grid.shape[1] != X.shape[1]:
        raise ValueError(f'grid has {grid.shape[1]} covariates, data has {X.shape[1]}')
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(grid))):
        raise ValueError('covariates must be finite')
    return X, grid


def fit_probit_bart(X, y, grid, config: BartConfig = BartConfig(), *,
                    return_state: bool = False):
    """Fit probit BART to ``(X, y)`` and return draws of Phi(f(x)) on ``grid``.

    Parameters
    ----------
    X : (n, p) array
    y : (n,) array of 0/1
    grid : (J, p) array
        Design points at which every kept draw is evaluated.
    config : BartConfig

    Returns
    -------
    PhiDraws
        ``config.n_keep`` draws; with ``return_state=True`` the final
        :class:`BartState` is returned as well.
    """
    X, grid = _prepare(X, grid)
    y = np.asarray(y)
    if y.shape != (X.shape[0],):
        raise ValueError('y must be a vector with one entry per row of X')
    if not np.all((y == 0) | (y == 1)):
        raise ValueError('y must be binary (0/1)')
    y = y.astype(np.int8)
    n = len(y)

    notes = []
    ybar = y.mean()
    if ybar in (0.0, 1.0):
        msg = f'response is constant (mean {ybar:g}); phi is identified only as flat'
        warnings.warn(msg, FlatResponseWarning, stacklevel=2)
        notes.append(msg)
    offset = float(gaussian_quantile(np.clip(ybar, 0.5 / n, 1 - 0.5 / n)))

    cutpoints = build_cutpoints(X, config.n_cutpoints)
    xbin = bin_covariates(X, cutpoints)
    gbin = bin_covariates(grid, cutpoints)
    state = init_state(n, cutpoints, config, offset)
    gen = RngStream(config.seed).child('bart').generator()

    draws = np.empty((config.n_keep, grid.shape[0]))
    total = config.n_burn + config.n_keep * config.thin
    k = 0
    for it in range(total):
        mcmc_iteration(state, xbin, y, config, gen)
        kept = it - config.n_burn
        if kept >= 0 and (kept + 1) % config.thin == 0:
            f = offset + _kernels.predict(gbin, state.var, state.cut, state.left,
                                          state.right, state.mu)
            draws[k] = phi_from_latent(f)
            k += 1

    for name, (acc, prop) in state.acceptance().items():
        notes.append(f'{name} accepted {acc}/{prop}')
    prov = Provenance(config.hash(), hash64(X, y.astype(np.int64)), grid_hash(grid),
                      config.seed)
    out = PhiDraws(grid, draws, prov, tuple(notes))
    return (out, state) if return_state else out


def sample_prior_latent(X, grid, config: BartConfig = BartConfig()) -> np.ndarray:
    """Draws of the sum of trees f(x) on ``grid`` with the likelihood switched off.

    The tree structures still respect the training design (no empty leaves),
    but neither moves nor leaf values see a response. Returns a
    ``(n_keep, J)`` array on the latent scale, offset excluded.
    """
    X, grid = _prepare(X, grid)
    cutpoints = build_cutpoints(X, config.n_cutpoints)
    xbin = bin_covariates(X, cutpoints)
    gbin = bin_covariates(grid, cutpoints)
    state = init_state(X.shape[0], cutpoints, config, 0.0)
    gen = RngStream(config.seed).child('bart-prior').generator()
    out = np.empty((config.n_keep, grid.shape[0]))
    k = 0
    for it in range(config.n_burn + config.n_keep * config.thin):
        mcmc_iteration(state, xbin, None, config, gen, prior_only=True)
        kept = it - config.n_burn
        if kept >= 0 and (kept + 1) % config.thin == 0:
            out[k] = _kernels.predict(gbin, state.var, state.cut, state.left, state.right,
                                      state.mu)
            k += 1
    return out
