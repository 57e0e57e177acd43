"""Principal strata for a binary encouragement design under monotonicity.

Strata are always-takers (a), compliers (c) and never-takers (n); defiers
are ruled out. ``gamma[s, t, z]`` is Pr(Y(t, z) = 1 | S = s, x). The
observables identify the strata probabilities, ``gamma[n, 0, 1]`` and
``gamma[a, 1, 0]``; the pairs (gamma[c,0,0], gamma[n,0,0]) and
(gamma[c,1,1], gamma[a,1,1]) are each known only to lie on a line segment.
Fixing theta = (gamma[n,0,0], gamma[a,1,1]) by a prior pins down the rest.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .bart import BartConfig, fit_probit_bart
from .dist import RngStream, open_uniform, trunc_normal_draw

__all__ = [
    'ObsRecord', 'Records', 'IdentifiedBasis', 'StrataModel', 'DirectEffectPrior',
    'MonotonicityError', 'VacuousParameterError', 'strata_probs', 'gamma_bounds',
    'bounds_a11', 'bounds_n00', 'mixture_forward', 'solve_compliers',
    'sample_direct_effects', 'monotone_filter', 'membership_probs', 'impute_and_itt',
    'population_itt', 'overall_itt', 'fit_identified_basis', 'posterior_itt',
    'simulate_encouragement', 'STRATA',
]

STRATA = ('n', 'c', 'a')
N, C, A = 0, 1, 2


class MonotonicityError(ValueError):
    pass


class VacuousParameterError(ValueError):
    """A stratum has zero probability, so its potential outcomes are vacuous."""


@dataclass(frozen=True)
class ObsRecord:
    z: int
    t: int
    y: int
    x: tuple = ()

    def __post_init__(self):
        for name in ('z', 't', 'y'):
            if getattr(self, name) not in (0, 1):
                raise ValueError(f'{name} must be 0 or 1')


@dataclass
class Records:
    """Column-wise records; ``point`` maps each record to a design-grid row."""

    z: np.ndarray
    t: np.ndarray
    y: np.ndarray
    point: np.ndarray
    x: np.ndarray | None = None

    def __post_init__(self):
        for name in ('z', 't', 'y'):
            a = np.asarray(getattr(self, name)).astype(np.int64)
            if not np.all((a == 0) | (a == 1)):
                raise ValueError(f'{name} must be binary')
            setattr(self, name, a)
        self.point = np.asarray(self.point, dtype=np.int64)

    @classmethod
    def from_records(cls, recs, grid=None):
        """Build from ObsRecord objects; records map to rows of ``grid`` by x."""
        z = [r.z for r in recs]
        t = [r.t for r in recs]
        y = [r.y for r in recs]
        if grid is None:
            point = np.zeros(len(recs), dtype=np.int64)
            x = None
        else:
            grid = np.atleast_2d(np.asarray(grid, dtype=float))
            x = np.array([r.x for r in recs], dtype=float).reshape(len(recs), -1)
            point = np.array([int(np.flatnonzero(np.all(grid == xi, axis=1))[0]) for xi in x])
        return cls(z, t, y, point, x)

    def __len__(self):
        return len(self.z)


_BASIS_FIELDS = ('pT_z0', 'pT_z1', 'pY_00', 'pY_01', 'pY_10', 'pY_11')


@dataclass
class IdentifiedBasis:
    """Observable probabilities per design point (or per draw and point).

    ``pY_tz`` is Pr(Y = 1 | T = t, Z = z, x).
    """

    pT_z0: np.ndarray
    pT_z1: np.ndarray
    pY_00: np.ndarray
    pY_01: np.ndarray
    pY_10: np.ndarray
    pY_11: np.ndarray

    def __post_init__(self):
        for f in _BASIS_FIELDS:
            setattr(self, f, np.asarray(getattr(self, f), dtype=float))

    def take(self, k) -> IdentifiedBasis:
        return IdentifiedBasis(*(getattr(self, f)[k] for f in _BASIS_FIELDS))

    def arrays(self) -> dict:
        return {f: getattr(self, f) for f in _BASIS_FIELDS}


@dataclass
class StrataModel:
    pi_a: np.ndarray
    pi_c: np.ndarray
    pi_n: np.ndarray
    gamma: dict
    identified: dict = field(default_factory=lambda: {
        ('n', 0, 1): True, ('a', 1, 0): True, ('n', 0, 0): False, ('a', 1, 1): False,
        ('c', 0, 0): False, ('c', 1, 1): False})

    def pi(self, s: str):
        return {'a': self.pi_a, 'c': self.pi_c, 'n': self.pi_n}[s]


# ------------------------------------------------------------ identification

def strata_probs(basis: IdentifiedBasis):
    """(pi_a, pi_c, pi_n) from the treatment-uptake probabilities.

    ``pi_n`` is computed as ``1 - (pi_a + pi_c)`` so the three sum to one
    exactly in floating point.
    """
    if np.any(basis.pT_z1 < basis.pT_z0):
        bad = np.flatnonzero(np.atleast_1d(basis.pT_z1 < basis.pT_z0).ravel())
        raise MonotonicityError(f'Pr(T=1|Z=1) < Pr(T=1|Z=0) at points {bad.tolist()}')
    pi_a = basis.pT_z0
    pi_c = basis.pT_z1 - basis.pT_z0
    pi_n = 1.0 - (pi_a + pi_c)
    return pi_a, pi_c, pi_n


def gamma_bounds(pi_s, pi_c, p_obs):
    """Feasible interval for a non-complier gamma mixed with compliers.

    With the observable cell ``p = (pi_c g_c + pi_s g_s) / (pi_c + pi_s)``
    and both gammas in [0, 1], ``g_s`` ranges over
    ``[max(0, (pi_s+pi_c)/pi_s p - pi_c/pi_s), min(1, (pi_s+pi_c)/pi_s p)]``.
    """
    pi_s, pi_c, p = (np.asarray(v, dtype=float) for v in (pi_s, pi_c, p_obs))
    if np.any(pi_s <= 0):
        raise VacuousParameterError('stratum absent, parameter vacuous')
    r = (pi_s + pi_c) / pi_s
    lo = np.maximum(0.0, r * p - pi_c / pi_s)
    hi = np.minimum(1.0, r * p)
    return lo, hi


def bounds_a11(basis: IdentifiedBasis):
    pi_a, pi_c, _ = strata_probs(basis)
    return gamma_bounds(pi_a, pi_c, basis.pY_11)


def bounds_n00(basis: IdentifiedBasis):
    _, pi_c, pi_n = strata_probs(basis)
    return gamma_bounds(pi_n, pi_c, basis.pY_00)


def mixture_forward(model: StrataModel) -> IdentifiedBasis:
    """Observable cell probabilities implied by a full strata model.

    A cell whose conditioning event has probability zero is returned as NaN.
    """
    g = model.gamma
    pa, pc, pn = (np.asarray(v, dtype=float) for v in (model.pi_a, model.pi_c, model.pi_n))
    with np.errstate(invalid='ignore', divide='ignore'):
        d00 = pc + pn
        d11 = pc + pa
        pY00 = np.where(d00 > 0, (pc * g['c', 0, 0] + pn * g['n', 0, 0]) / d00, np.nan)
        pY11 = np.where(d11 > 0, (pc * g['c', 1, 1] + pa * g['a', 1, 1]) / d11, np.nan)
    return IdentifiedBasis(pa, pa + pc, pY00, g['n', 0, 1], g['a', 1, 0], pY11)


def solve_compliers(basis: IdentifiedBasis, pi, theta):
    """Complier gammas implied by theta = (gamma_n00, gamma_a11).

    Returns
    -------
    gamma_c00, gamma_c11 : arrays
    ok : bool array
        False where either result leaves [0, 1], i.e. theta lies outside the
        identified set for this basis.
    """
    pi_a, pi_c, pi_n = pi
    g_n00, g_a11 = theta
    if np.any(np.asarray(pi_c) <= 0):
        raise VacuousParameterError('no compliers at some point; complier gammas vacuous')
    c00 = ((pi_c + pi_n) * basis.pY_00 - pi_n * g_n00) / pi_c
    c11 = ((pi_c + pi_a) * basis.pY_11 - pi_a * g_a11) / pi_c
    ok = (c00 >= 0) & (c00 <= 1) & (c11 >= 0) & (c11 <= 1)
    return c00, c11, ok


# ------------------------------------------------------------ priors

@dataclass(frozen=True)
class DirectEffectPrior:
    """Prior on the direct effects (b_a, b_n) of encouragement on the log-odds.

    ``centered``: independent Normal(0, sigma_a^2), Normal(0, sigma_n^2).
    ``informed``: Normal(b0, Sigma_b) truncated to b_a > 0, b_n > 0; only a
    diagonal Sigma_b is supported.
    """

    variant: str = 'centered'
    sigma_a: float = 0.1
    sigma_n: float = 0.1
    b0: tuple = (0.05, 0.0)
    Sigma_b: tuple = ((0.13**2, 0.0), (0.0, 0.05**2))
    v: float = 0.025

    def __post_init__(self):
        if self.variant not in ('centered', 'informed'):
            raise ValueError("variant must be 'centered' or 'informed'")
        S = np.asarray(self.Sigma_b, dtype=float)
        if S.shape != (2, 2) or S[0, 1] != 0 or S[1, 0] != 0:
            raise NotImplementedError('only a diagonal Sigma_b is supported')
        if self.v < 0:
            raise ValueError('v must be nonnegative')

    @classmethod
    def parse(cls, text: str, v: float = 0.025) -> DirectEffectPrior:
        """'centered:0.1', 'centered:0.1,0.25' or 'informed'."""
        m = re.fullmatch(r'centered:([0-9.eE+-]+)(?:,([0-9.eE+-]+))?', text)
        if m:
            sa = float(m.group(1))
            sn = float(m.group(2)) if m.group(2) else sa
            return cls('centered', sa, sn, v=v)
        if text == 'informed':
            return cls('informed', v=v)
        raise ValueError(f'unrecognized prior {text!r}')

    def draw_b(self, u):
        """(b_a, b_n) from two uniforms by inverse CDF."""
        u = np.asarray(u, dtype=float)
        if self.variant == 'centered':
            z = special.ndtri(u)
            return self.sigma_a * z[..., 0], self.sigma_n * z[..., 1]
        sd = np.sqrt(np.diag(np.asarray(self.Sigma_b, dtype=float)))
        ba = trunc_normal_draw(self.b0[0], sd[0], 0.0, np.inf, u[..., 0])
        bn = trunc_normal_draw(self.b0[1], sd[1], 0.0, np.inf, u[..., 1])
        return ba, bn


def sample_direct_effects(basis: IdentifiedBasis, prior: DirectEffectPrior, gen):
    """One draw of theta = (gamma_n00, gamma_a11) at every design point.

    ``logit gamma_a11 = logit gamma_a10 + b_a + eps`` and
    ``logit gamma_n00 = logit gamma_n01 - b_n + eps``, with independent
    ``eps ~ Normal(0, v^2)`` per point and equation.

    Returns
    -------
    gamma_n00, gamma_a11 : arrays
    b : (b_a, b_n)
    """
    J = np.shape(basis.pY_01)
    ba, bn = prior.draw_b(open_uniform(gen, 2))
    eps = prior.v * gen.standard_normal((2,) + J)
    g_a11 = special.expit(special.logit(basis.pY_10) + ba + eps[0])
    g_n00 = special.expit(special.logit(basis.pY_01) - bn + eps[1])
    return g_n00, g_a11, (float(ba), float(bn))


def monotone_filter(pT_z1_draws, pT_z0_draws):
    """Keep draws with Pr(T=1|Z=1) >= Pr(T=1|Z=0) at every grid point.

    Returns
    -------
    keep : int array of retained draw indices
    rejection_rate : float
    """
    p1 = np.atleast_2d(np.asarray(pT_z1_draws, dtype=float))
    p0 = np.atleast_2d(np.asarray(pT_z0_draws, dtype=float))
    ok = np.all(p1 >= p0, axis=1)
    keep = np.flatnonzero(ok)
    if keep.size == 0:
        raise MonotonicityError('every draw violates monotonicity somewhere; '
                                'collect more data or use a coarser grid')
    return keep, 1.0 - keep.size / ok.size


def build_model(basis: IdentifiedBasis, g_n00, g_a11):
    """Complete strata model from a basis and theta, plus the support mask."""
    pi = strata_probs(basis)
    c00, c11, ok = solve_compliers(basis, pi, (g_n00, g_a11))
    gamma = {('n', 0, 0): g_n00, ('n', 0, 1): basis.pY_01,
             ('a', 1, 0): basis.pY_10, ('a', 1, 1): g_a11,
             ('c', 0, 0): c00, ('c', 1, 1): c11}
    return StrataModel(*pi, gamma), ok


# ------------------------------------------------------------ imputation

def membership_probs(records: Records, model: StrataModel) -> np.ndarray:
    """(n_records, 3) full-conditional stratum probabilities, columns (n, c, a)."""
    j = records.point
    z, t, y = records.z, records.t, records.y
    g = model.gamma

    def lik(p):
        return np.where(y == 1, p, 1.0 - p)

    out = np.zeros((len(records), 3))
    w_a = np.where((z == 1) & (t == 1), np.asarray(model.pi_a)[j] * lik(g['a', 1, 1][j]), 0.0)
    w_n = np.where((z == 0) & (t == 0), np.asarray(model.pi_n)[j] * lik(g['n', 0, 0][j]), 0.0)
    gc = np.where(z == 1, g['c', 1, 1][j], g['c', 0, 0][j])
    w_c = np.where(z == t, np.asarray(model.pi_c)[j] * lik(gc), 0.0)
    # z=1, t=0 are never-takers and z=0, t=1 always-takers regardless of weights
    w_n = np.where((z == 1) & (t == 0), 1.0, w_n)
    w_a = np.where((z == 0) & (t == 1), 1.0, w_a)
    tot = w_n + w_c + w_a
    if np.any(tot <= 0):
        raise ValueError('record has zero probability under the model')
    out[:, N], out[:, C], out[:, A] = w_n / tot, w_c / tot, w_a / tot
    return out


def missing_outcome_probs(records: Records, model: StrataModel, S) -> np.ndarray:
    """Pr(missing potential outcome = 1) given stratum.

    Compliers miss Y(1-z, 1-z), never-takers Y(0, 1-z), always-takers
    Y(1, 1-z).
    """
    j, z = records.point, records.z
    g = model.gamma
    pc = np.where(z == 1, g['c', 0, 0][j], g['c', 1, 1][j])
    pn = np.where(z == 1, g['n', 0, 0][j], g['n', 0, 1][j])
    pa = np.where(z == 1, g['a', 1, 0][j], g['a', 1, 1][j])
    return np.choose(np.asarray(S), [pn, pc, pa])


def stratum_itt(records: Records, S, y_mis) -> dict:
    """Completed-data ITT per stratum; ``None`` for an empty stratum.

    For every stratum the unit-level effect is ``Y - Y_mis`` when ``z = 1``
    and ``Y_mis - Y`` when ``z = 0``.
    """
    z, y = records.z, records.y
    eff = np.where(z == 1, y - y_mis, y_mis - y)
    out = {}
    for k, s in enumerate(STRATA):
        m = S == k
        out[s] = float(eff[m].mean()) if m.any() else None
    return out


@dataclass
class Imputation:
    S: np.ndarray
    y_mis: np.ndarray
    itt: dict
    counts: dict


def impute_and_itt(records: Records, model: StrataModel, gen) -> Imputation:
    """Draw strata and missing potential outcomes, then per-stratum ITTs."""
    P = membership_probs(records, model)
    u = open_uniform(gen, (len(records), 2))
    S = (u[:, 0] > P[:, 0]).astype(np.int64) + (u[:, 0] > P[:, 0] + P[:, 1])
    S = np.where(P[:, A] == 1.0, A, np.where(P[:, N] == 1.0, N, S))
    y_mis = (u[:, 1] < missing_outcome_probs(records, model, S)).astype(np.int64)
    counts = {s: int(np.sum(S == k)) for k, s in enumerate(STRATA)}
    return Imputation(S, y_mis, stratum_itt(records, S, y_mis), counts)


def population_itt(model: StrataModel) -> dict:
    """Per-point stratum ITTs of the forward model."""
    g = model.gamma
    return {'c': g['c', 1, 1] - g['c', 0, 0], 'n': g['n', 0, 1] - g['n', 0, 0],
            'a': g['a', 1, 1] - g['a', 1, 0]}


def overall_itt(basis: IdentifiedBasis):
    """Identified per-point ITT: Pr(Y=1 | Z=1) - Pr(Y=1 | Z=0)."""
    y1 = basis.pT_z1 * basis.pY_11 + (1 - basis.pT_z1) * basis.pY_01
    y0 = basis.pT_z0 * basis.pY_10 + (1 - basis.pT_z0) * basis.pY_00
    return y1 - y0


# ------------------------------------------------------------ fitting

@dataclass
class BasisDraws:
    basis: IdentifiedBasis
    rejection_rate: float
    kept: np.ndarray
    grid: np.ndarray

    def to_csv(self, path):
        K, J = self.basis.pT_z0.shape
        with open(path, 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['draw_index', 'point_index', *_BASIS_FIELDS])
            for k in range(K):
                for j in range(J):
                    w.writerow([k, j, *(repr(float(getattr(self.basis, fld)[k, j]))
                                        for fld in _BASIS_FIELDS)])

    @classmethod
    def from_csv(cls, path, grid):
        rows = np.genfromtxt(path, delimiter=',', names=True)
        K = int(rows['draw_index'].max()) + 1
        J = int(rows['point_index'].max()) + 1
        arr = {f: np.empty((K, J)) for f in _BASIS_FIELDS}
        for f in _BASIS_FIELDS:
            arr[f][rows['draw_index'].astype(int), rows['point_index'].astype(int)] = rows[f]
        return cls(IdentifiedBasis(**arr), float('nan'), np.arange(K), np.asarray(grid))


def fit_identified_basis(records: Records, grid, config: BartConfig) -> BasisDraws:
    """Probit BART fits for the observable basis on ``grid``.

    Treatment uptake gets one fit per encouragement arm; the outcome gets a
    single fit with (t, z) appended as two binary covariates. Draws violating
    monotonicity at any grid point are dropped.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    X = records.x if records.x is not None else grid[records.point]
    J = grid.shape[0]
    pT = {}
    for arm in (0, 1):
        m = records.z == arm
        cfg = BartConfig(**{**config.to_dict(), 'seed': RngStream(config.seed).child('T', arm).stream_id})
        pT[arm] = fit_probit_bart(X[m], records.t[m], grid, cfg).draws
    Xo = np.column_stack([X, records.t, records.z])
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    go = np.vstack([np.column_stack([grid, np.full(J, t), np.full(J, z)]) for t, z in cells])
    cfg = BartConfig(**{**config.to_dict(), 'seed': RngStream(config.seed).child('Y').stream_id})
    pY = fit_probit_bart(Xo, records.y, go, cfg).draws
    keep, rate = monotone_filter(pT[1], pT[0])
    basis = IdentifiedBasis(pT[0][keep], pT[1][keep],
                            *(pY[keep][:, i * J:(i + 1) * J] for i in range(4)))
    return BasisDraws(basis, rate, keep, grid)


@dataclass
class ITTPosterior:
    itt: dict
    rejection_events: int
    dropped_draws: list
    counts: dict

    def summary(self) -> dict:
        out = {}
        for s, v in self.itt.items():
            v = np.asarray([x for x in v if x is not None], dtype=float)
            out[s] = (float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else float('nan'))
        return out

    def to_csv(self, path, prior_label=''):
        with open(path, 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['prior', 'stratum', 'mean', 'sd', 'n_draws'])
            for s, (m, sd) in self.summary().items():
                n = sum(x is not None for x in self.itt[s])
                w.writerow([prior_label, s, repr(m), repr(sd), n])


def posterior_itt(draws: IdentifiedBasis, records: Records, prior: DirectEffectPrior,
                  seed: int, max_tries: int = 100) -> ITTPosterior:
    """Stage 2 for the strata model, one theta and imputation per basis draw.

    A theta that puts a complier gamma outside [0, 1] is redrawn, counting a
    rejection event; after ``max_tries`` failures the basis draw is dropped
    and listed in ``dropped_draws``.
    """
    K = draws.pT_z0.shape[0]
    itt = {s: [] for s in STRATA}
    counts = {s: [] for s in STRATA}
    events = 0
    dropped = []
    root = RngStream(seed).child('strata-itt')
    for k in range(K):
        basis = draws.take(k)
        gen = root.child(k).generator()
        for _ in range(max_tries):
            g_n00, g_a11, _b = sample_direct_effects(basis, prior, gen)
            model, ok = build_model(basis, g_n00, g_a11)
            if np.all(ok):
                break
            events += 1
        else:
            dropped.append(k)
            continue
        imp = impute_and_itt(records, model, gen)
        for s in STRATA:
            itt[s].append(imp.itt[s])
            counts[s].append(imp.counts[s])
    if len(dropped) == K:
        raise ValueError('every basis draw conflicts with the direct-effect prior')
    return ITTPosterior(itt, events, dropped, counts)


# ------------------------------------------------------------ synthetic trial

def flu_grid(ages=(45, 55, 60, 64, 66, 70, 75, 85)):
    """Age x COPD design grid (COPD in {0, 1})."""
    return np.array([(a, c) for a in ages for c in (0, 1)], dtype=float)


def simulate_encouragement(n: int, seed: int, b_a: float = 0.0, b_n: float = 0.0,
                           grid=None):
    """Synthetic randomized encouragement trial over an age x COPD grid.

    Compliance shifts from never-takers toward always-takers at age 65;
    outcomes follow a proportional-odds direct effect ``b_a``, ``b_n`` on
    non-compliers (zero gives the exclusion restrictions).

    Returns
    -------
    records : Records
    grid : (J, 2) array
    truth : dict with the population StrataModel, per-record strata and all
        potential outcomes, and the sample and population complier ITT.
    """
    grid = flu_grid() if grid is None else np.asarray(grid, dtype=float)
    gen = RngStream(seed).child('encouragement').generator()
    age, copd = grid[:, 0], grid[:, 1]
    old = age >= 65
    pi_a = np.where(old, 0.25, 0.1) + 0.03 * copd
    pi_n = np.where(old, 0.1, 0.25) - 0.03 * copd
    pi_c = 1.0 - pi_a - pi_n
    base = special.logit(0.6) - 0.01 * (age - 65) + 0.3 * copd
    g = {('c', 1, 1): special.expit(base + 1.1), ('c', 0, 0): special.expit(base),
         ('n', 0, 1): special.expit(base - 0.2), ('a', 1, 0): special.expit(base + 0.9)}
    g['n', 0, 0] = special.expit(special.logit(g['n', 0, 1]) - b_n)
    g['a', 1, 1] = special.expit(special.logit(g['a', 1, 0]) + b_a)
    # complier gammas off the diagonal never enter the observables
    g['c', 0, 1] = g['c', 0, 0]
    g['c', 1, 0] = g['c', 1, 1]
    model = StrataModel(pi_a, pi_c, pi_n, {k: v for k, v in g.items()
                                             if k not in (('c', 0, 1), ('c', 1, 0))})

    point = gen.integers(0, grid.shape[0], n)
    P = np.column_stack([pi_n, pi_c, pi_a])[point]
    u = gen.uniform(size=n)
    S = (u > P[:, 0]).astype(int) + (u > P[:, 0] + P[:, 1])
    z = gen.integers(0, 2, n)
    t_of = np.array([[0, 0], [0, 1], [1, 1]])  # T(z) for n, c, a
    t = t_of[S, z]
    # potential outcomes Y(t(z'), z') for z' = 0, 1
    uy = gen.uniform(size=(n, 2))
    y_pot = np.empty((n, 2), dtype=int)
    for zz in (0, 1):
        tt = t_of[S, zz]
        p = np.empty(n)
        for k, s in enumerate(STRATA):
            m = S == k
            key = (s, int(t_of[k, zz]), zz)
            p[m] = g[key][point[m]]
        y_pot[:, zz] = (uy[:, zz] < p).astype(int)
        del tt
    y = y_pot[np.arange(n), z]
    x = grid[point]
    records = Records(z, t, y, point, x)
    eff = y_pot[:, 1] - y_pot[:, 0]
    truth = {
        'model': model, 'S': S, 'y_pot': y_pot,
        'itt_sample': {s: float(eff[S == k].mean()) for k, s in enumerate(STRATA)},
        'itt_c_population': float(np.sum(pi_c * (g['c', 1, 1] - g['c', 0, 0]))
                                  / np.sum(pi_c)),
    }
    return records, grid, truth
