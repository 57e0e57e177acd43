"""Stage 2: truncated priors on surveillance, reconstruction and sensitivity.

Given draws of the identified probability phi(x) = Pr(Y=1 | x), this module
draws a global bound ``c`` and a surveillance probability ``theta(x)`` from
priors restricted to the set where ``phi / c <= theta <= 1``, and returns
the partially identified probability ``p = phi / theta``. Nothing here reads
the raw response data; everything flows from a :class:`PhiDraws` artifact.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np
from scipy import optimize, special

from ._hashing import hash64
from .dist import (RngStream, TruncationUnderflowError, gaussian_cdf, trunc_beta_draw,
                   trunc_normal_draw)
from .draws import (PhiDraws, Provenance, ProvenanceError, grid_hash, write_draw_file,
                    write_draws_csv)

__all__ = [
    'VarTransform', 'BasisSpec', 'BasisError', 'make_basis', 'SurveillanceSpec',
    'preset', 'preset_grid', 'calibrate_intercept', 'link_cdf', 'link_quantile',
    'sample_c', 'ThetaDraw', 'DegeneratePriorError', 'theta_from_mean', 'sample_theta',
    'reconstruct_p', 'PrevalenceSummary', 'prevalence', 'SpecResult',
    'sensitivity_run', 'model_check_residual', 'SPEC_SCHEMA',
]

LINKS = ('probit', 'logit')


def link_cdf(link: str, v):
    if link == 'probit':
        return gaussian_cdf(v)
    if link == 'logit':
        return special.expit(v)
    raise ValueError(f'unknown link {link!r}')


def link_quantile(link: str, p):
    if link == 'probit':
        return special.ndtri(p)
    if link == 'logit':
        return special.logit(p)
    raise ValueError(f'unknown link {link!r}')


# ---------------------------------------------------------------- basis

class BasisError(ValueError):
    pass


@dataclass(frozen=True)
class VarTransform:
    """Rescale one variable to the unit interval, optionally after log(x + shift).

    ``lo`` and ``hi`` are the fitted extremes on the transformed scale; they
    are ``None`` until :func:`make_basis` has seen data.
    """

    var: str
    transform: str = 'affine'
    shift: float = 0.0
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.transform not in ('affine', 'shifted_log'):
            raise ValueError(f'unknown transform {self.transform!r} for {self.var}')

    @property
    def fitted(self) -> bool:
        return self.lo is not None and self.hi is not None

    def pre(self, col) -> np.ndarray:
        col = np.asarray(col, dtype=float)
        if self.transform == 'affine':
            return col
        arg = col + self.shift
        bad = np.flatnonzero(~(arg > 0))
        if bad.size:
            raise BasisError(f'variable {self.var!r}: log argument x + {self.shift} is '
                             f'nonpositive at row {bad[0]} (x = {col[bad[0]]})')
        return np.log(arg)

    def fit(self, col) -> VarTransform:
        t = self.pre(col)
        lo, hi = float(np.min(t)), float(np.max(t))
        if not hi > lo:
            raise BasisError(f'variable {self.var!r} is constant; cannot rescale')
        return replace(self, lo=lo, hi=hi)

    def apply(self, col) -> np.ndarray:
        if not self.fitted:
            raise BasisError(f'transform for {self.var!r} has not been fitted')
        return (self.pre(col) - self.lo) / (self.hi - self.lo)

    def invert(self, h) -> np.ndarray:
        t = self.lo + np.asarray(h, dtype=float) * (self.hi - self.lo)
        return t if self.transform == 'affine' else np.exp(t) - self.shift


@dataclass(frozen=True)
class BasisSpec:
    transforms: tuple
    include_intercept: bool = True

    @property
    def variables(self) -> list:
        return [t.var for t in self.transforms]

    @property
    def dim(self) -> int:
        return len(self.transforms) + int(self.include_intercept)

    def apply(self, data) -> np.ndarray:
        """Basis matrix for ``data``, a mapping from variable name to column."""
        cols = [t.apply(_column(data, t.var)) for t in self.transforms]
        n = len(cols[0]) if cols else len(next(iter(data.values())))
        if self.include_intercept:
            cols.insert(0, np.ones(n))
        return np.column_stack(cols)


def _column(data, name):
    try:
        return np.asarray(data[name], dtype=float)
    except KeyError:
        raise BasisError(f'variable {name!r} missing from data') from None


def make_basis(data, transforms, include_intercept: bool = True):
    """Fit unit-interval rescalings on ``data`` and return ``(BasisSpec, H)``.

    Parameters
    ----------
    data : mapping of str to array
    transforms : sequence of VarTransform or dicts with keys var/transform/shift
    """
    ts = []
    for t in transforms:
        if isinstance(t, dict):
            t = VarTransform(t['var'], t.get('transform', 'affine'), float(t.get('shift', 0.0)))
        ts.append(t.fit(_column(data, t.var)))
    basis = BasisSpec(tuple(ts), include_intercept)
    return basis, basis.apply(data)


# ------------------------------------------------------------ spec

SPEC_SCHEMA = {
    'type': 'object',
    'required': ['name', 'link', 'sigma', 'c0', 'basis', 'beta'],
    'additionalProperties': False,
    'properties': {
        'name': {'type': 'string', 'minLength': 1},
        'link': {'enum': list(LINKS)},
        'sigma': {'type': 'number', 'minimum': 0},
        'c0': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
        'concentration': {'type': 'number', 'exclusiveMinimum': 0},
        'include_intercept': {'type': 'boolean'},
        'basis': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['var', 'transform'],
                'additionalProperties': False,
                'properties': {
                    'var': {'type': 'string'},
                    'transform': {'enum': ['affine', 'shifted_log']},
                    'shift': {'type': 'number'},
                },
            },
        },
        'beta': {'type': 'array', 'items': {'type': 'number'}},
    },
}


@dataclass(frozen=True)
class SurveillanceSpec:
    """Prior on the surveillance probability and the global bound.

    ``F^-1(theta(x)) ~ Normal(h(x)' beta, sigma^2)`` independently across
    distinct design points, truncated to the identified set, and
    ``c ~ Beta(concentration c0, concentration (1 - c0))`` truncated below at
    ``max phi``. ``c0 == 1`` fixes ``c = 1``.
    """

    name: str
    basis: tuple
    beta: tuple
    link: str = 'probit'
    sigma: float = 0.25
    c0: float = 0.4
    concentration: float = 10.0
    include_intercept: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'basis', tuple(
            VarTransform(**b) if isinstance(b, dict) else b for b in self.basis))
        object.__setattr__(self, 'beta', tuple(float(b) for b in self.beta))
        if self.link not in LINKS:
            raise ValueError(f'link must be one of {LINKS}')
        if self.sigma < 0:
            raise ValueError('sigma must be nonnegative')
        if not 0 < self.c0 <= 1:
            raise ValueError('c0 must lie in (0, 1]')
        if self.concentration <= 0:
            raise ValueError('concentration must be positive')
        if len(self.beta) != len(self.basis) + int(self.include_intercept):
            raise ValueError(f'beta has {len(self.beta)} entries; basis needs '
                             f'{len(self.basis) + int(self.include_intercept)}')

    def with_(self, **kw) -> SurveillanceSpec:
        return replace(self, **kw)

    def with_intercept(self, beta0: float) -> SurveillanceSpec:
        if not self.include_intercept:
            raise ValueError('spec has no intercept')
        return replace(self, beta=(float(beta0),) + self.beta[1:])

    def to_json(self) -> dict:
        d = {'name': self.name, 'link': self.link, 'sigma': self.sigma, 'c0': self.c0,
             'concentration': self.concentration,
             'include_intercept': self.include_intercept,
             'basis': [{'var': t.var, 'transform': t.transform, 'shift': t.shift}
                       for t in self.basis],
             'beta': list(self.beta)}
        return d

    @classmethod
    def from_json(cls, doc: dict) -> SurveillanceSpec:
        jsonschema.validate(doc, SPEC_SCHEMA)
        basis = tuple(VarTransform(b['var'], b['transform'], float(b.get('shift', 0.0)))
                      for b in doc['basis'])
        return cls(doc['name'], basis, tuple(doc['beta']), doc['link'], float(doc['sigma']),
                   float(doc['c0']), float(doc.get('concentration', 10.0)),
                   bool(doc.get('include_intercept', True)))

    @classmethod
    def load(cls, path) -> SurveillanceSpec:
        return cls.from_json(json.loads(Path(path).read_text()))

    def hash(self) -> int:
        return hash64(self.to_json())

    def design(self, data) -> tuple:
        """Fit this spec's basis on ``data``; returns ``(BasisSpec, H)``."""
        return make_basis(data, self.basis, self.include_intercept)


MISCONDUCT_BASIS = (
    VarTransform('fiscal_year'),
    VarTransform('ft_hits', 'shifted_log', 1.0),
    VarTransform('cash'),
    VarTransform('net_income', 'shifted_log', 1.0),
    VarTransform('qui_tam'),
)

_PRESET_BETA = {
    'model_A': (0.0, -2.5, 2.0, 0.0, 0.0, 1.0),
    'model_B': (-0.85, -2.5, 2.0, -1.5, 2.5, 1.0),
}

PRESET_SIGMAS = (0.25, 0.5)
PRESET_C0S = (0.4, 0.8)


def preset(name: str, **overrides) -> SurveillanceSpec:
    """Surveillance models A and B over (intercept, fiscal year, FT hits, cash,
    net income, qui tam)."""
    try:
        beta = _PRESET_BETA[name]
    except KeyError:
        raise ValueError(f'unknown preset {name!r}; choose from {sorted(_PRESET_BETA)}') from None
    return SurveillanceSpec(name, MISCONDUCT_BASIS, beta, **overrides)


def preset_grid(link: str = 'probit') -> list:
    """The eight (model, sigma, c0) combinations, model-major."""
    out = []
    for m in ('model_A', 'model_B'):
        for s in PRESET_SIGMAS:
            for c0 in PRESET_C0S:
                out.append(preset(m, link=link, sigma=s, c0=c0).with_(
                    name=f'{m}_s{s}_c{c0}'))
    return out


def calibrate_intercept(spec: SurveillanceSpec, H, target: float, tol: float = 1e-10) -> float:
    """Intercept that makes the mean surveillance probability over ``H`` equal ``target``.

    The mean of ``F(beta0 + h' beta_rest)`` is strictly increasing in
    ``beta0``, so the root is unique and bisection finds it.
    """
    if not 0 < target < 1:
        raise ValueError('target must lie in (0, 1)')
    if not spec.include_intercept:
        raise ValueError('spec has no intercept to calibrate')
    H = np.asarray(H, dtype=float)
    rest = H[:, 1:] @ np.asarray(spec.beta[1:])

    def gap(b0):
        return float(np.mean(link_cdf(spec.link, b0 + rest))) - target

    lo, hi = -1.0, 1.0
    while gap(lo) > 0:
        lo *= 2
    while gap(hi) < 0:
        hi *= 2
    b0 = optimize.bisect(gap, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(gap(b0)) > tol:
        raise ArithmeticError(f'calibration residual {gap(b0):.3g} exceeds {tol}')
    return float(b0)


# ------------------------------------------------------------ draws

def sample_c(phi_draw, c0: float, concentration: float, u, draw_index=None):
    """Bound ``c`` from Beta(conc c0, conc (1-c0)) truncated to (max phi, 1).

    ``phi_draw`` may be a (K, J) array, in which case ``u`` has length K and
    one bound is drawn per row.
    """
    phi = np.asarray(phi_draw, dtype=float)
    m = np.max(phi, axis=-1)
    if c0 == 1:
        return np.ones_like(m)[()] if np.ndim(m) else 1.0
    try:
        return trunc_beta_draw(concentration * c0, concentration * (1 - c0), m, u)
    except TruncationUnderflowError as e:
        idx = e.index if draw_index is None else np.atleast_1d(draw_index)[e.index]
        raise TruncationUnderflowError(
            f'bound prior has no mass above max phi at draw(s) {np.atleast_1d(idx).tolist()}: '
            'prior-data conflict', index=idx) from None


class DegeneratePriorError(ValueError):
    """sigma = 0 places the whole prior outside the identified set at some points."""

    def __init__(self, message, points):
        super().__init__(message)
        self.points = points


@dataclass(frozen=True)
class ThetaDraw:
    c: float
    theta: np.ndarray

    def check(self, phi) -> bool:
        """Exact support check: c >= max phi and phi/c <= theta <= 1."""
        phi = np.asarray(phi)
        return bool(self.c >= phi.max() and np.all(phi / self.c <= self.theta)
                    and np.all(self.theta <= 1) and np.all(phi / self.theta <= self.c))


def _lower_link_bound(phi, c, link):
    """Smallest link value v with F(v) >= phi/c and phi/F(v) <= c in floating point."""
    r = phi / c
    v = link_quantile(link, np.minimum(r, 1.0))
    if np.all(r >= 1):
        return v
    # step up by one ulp, then doubling steps where F is flat
    step = np.spacing(np.abs(v))
    for _ in range(200):
        t = link_cdf(link, v)
        bad = ((t < r) | (phi / t > c)) & (r < 1)
        if not np.any(bad):
            return v
        v = np.where(bad, v + step, v)
        step = np.where(bad, 2 * step, step)
    raise ArithmeticError('could not place the link bound inside the support')


def theta_from_mean(phi, c, mean, sigma: float, link: str, u):
    """Draw ``theta = F(v)`` with ``v ~ Normal(mean, sigma^2)`` truncated so
    that ``phi / c <= theta``.

    Shapes broadcast; ``c`` must broadcast against ``phi`` (use ``c[:, None]``
    for per-draw bounds). The lower link bound is nudged up by whole ulps
    until the support constraints hold exactly in floating point.

    Raises
    ------
    DegeneratePriorError
        ``sigma == 0`` and the prior point mass violates the bound.
    """
    phi, c, mean, u = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (phi, c, mean, u)))
    v0 = _lower_link_bound(phi, c, link)
    if sigma == 0:
        t = link_cdf(link, mean)
        bad = (mean < v0) | (t < phi / c) | (phi / t > c)
        if np.any(bad):
            pts = np.unique(np.nonzero(bad)[-1])
            raise DegeneratePriorError(
                f'sigma = 0 prior contradicts the bound at points {pts.tolist()}', pts)
        return t
    # where phi / c rounds to 1 the support is the single point theta = 1
    pinned = v0 == np.inf
    v = np.full(phi.shape, np.inf)
    free = ~pinned
    if np.any(free):
        v[free] = trunc_normal_draw(mean[free], sigma, v0[free], np.inf, u[free])
    th = link_cdf(link, v)
    return th[()] if th.ndim == 0 else th


def _unique_rows(H):
    _, first, inv = np.unique(np.asarray(H), axis=0, return_index=True, return_inverse=True)
    return first, inv.reshape(-1)


def sample_theta(phi_draw, c, spec: SurveillanceSpec, H_grid, u) -> ThetaDraw:
    """One surveillance draw at every design point.

    Rows of ``H_grid`` that are identical share a single value, drawn with
    the uniform of their first occurrence against the largest phi among them.
    """
    phi = np.asarray(phi_draw, dtype=float)
    H = np.asarray(H_grid, dtype=float)
    first, inv = _unique_rows(H)
    phi_u = np.zeros(len(first))
    np.maximum.at(phi_u, inv, phi)
    mean = H[first] @ np.asarray(spec.beta)
    th = theta_from_mean(phi_u, c, mean, spec.sigma, spec.link, np.asarray(u)[first])
    return ThetaDraw(float(c), th[inv])


def reconstruct_p(phi_draw, theta):
    """p = phi / theta."""
    theta = theta.theta if isinstance(theta, ThetaDraw) else theta
    return np.asarray(phi_draw, dtype=float) / np.asarray(theta, dtype=float)


# ------------------------------------------------------------ summaries

QUANTILES = (0.05, 0.5, 0.95)


@dataclass
class PrevalenceSummary:
    """Per-draw prevalence, as a mean over design points and as a count."""

    alpha: np.ndarray
    alpha_count: np.ndarray
    groups: dict = field(default_factory=dict)

    def quantiles(self, q=QUANTILES) -> dict:
        out = {'all': np.quantile(self.alpha, q)}
        for g, a in self.groups.items():
            out[g] = np.quantile(a, q)
        return out

    def to_csv(self, path, spec_name=''):
        with open(path, 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['spec', 'group', 'mean', 'q05', 'q50', 'q95'])
            rows = [('all', self.alpha)] + list(self.groups.items())
            for g, a in rows:
                q = np.quantile(a, QUANTILES)
                w.writerow([spec_name, g, repr(float(a.mean())), *(repr(float(x)) for x in q)])


def prevalence(p_draws, groups=None, labels=None) -> PrevalenceSummary:
    """Summarize a (K, J) matrix of p draws.

    ``groups`` gives a label per design point; ``labels`` restricts the
    grouped output to those labels and raises on any label not present.
    """
    p = np.atleast_2d(np.asarray(p_draws, dtype=float))
    if p.size == 0:
        raise ValueError('no draws to summarize')
    count = p.sum(axis=1)
    out = PrevalenceSummary(count / p.shape[1], count)
    if groups is not None:
        groups = np.asarray(groups)
        if groups.shape != (p.shape[1],):
            raise ValueError('one group label per design point is required')
        present = list(dict.fromkeys(groups.tolist()))
        wanted = present if labels is None else list(labels)
        for g in wanted:
            if g not in present:
                raise KeyError(f'unknown group label {g!r}')
            out.groups[g] = p[:, groups == g].mean(axis=1)
    return out


def pointwise_summary_csv(path, draws):
    q = np.quantile(draws, QUANTILES, axis=0)
    with open(path, 'w', newline='') as f:
        w = csv.writer(f)
        w.writerow(['point_index', 'q05', 'q50', 'q95'])
        for j in range(q.shape[1]):
            w.writerow([j, *(repr(float(v)) for v in q[:, j])])


# ------------------------------------------------------------ sensitivity

@dataclass
class SpecResult:
    spec: SurveillanceSpec
    c: np.ndarray
    theta: np.ndarray
    p: np.ndarray
    summary: PrevalenceSummary
    phi_digest: str
    provenance: Provenance

    def support_ok(self, phi) -> bool:
        phi = np.asarray(phi)
        c = self.c[:, None]
        return bool(np.all(self.c >= phi.max(axis=1)) and np.all(phi / c <= self.theta)
                    and np.all(self.theta <= 1) and np.all(self.p <= c)
                    and np.all(self.p >= phi))

    def write(self, out_dir, fmt='binary') -> dict:
        """Write p draws, pointwise summary, prevalence and alpha draws; returns name -> path."""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = self.spec.name
        paths = {}
        if fmt == 'binary':
            paths['p_draws'] = out_dir / f'{name}.pdrw'
            write_draw_file(paths['p_draws'], b'PDRW', self.p, self.provenance)
        else:
            paths['p_draws'] = out_dir / f'{name}_p_draws.csv'
            write_draws_csv(paths['p_draws'], self.p, 'p')
        paths['summary'] = out_dir / f'{name}_summary.csv'
        pointwise_summary_csv(paths['summary'], self.p)
        paths['prevalence'] = out_dir / f'{name}_prevalence.csv'
        self.summary.to_csv(paths['prevalence'], name)
        paths['alpha'] = out_dir / f'{name}_alpha.csv'
        with open(paths['alpha'], 'w', newline='') as f:
            w = csv.writer(f)
            w.writerow(['draw_index', 'alpha'])
            for k, a in enumerate(self.summary.alpha):
                w.writerow([k, repr(float(a))])
        return paths


def stage2_uniforms(seed: int, K: int, J: int, tag=None) -> np.ndarray:
    """(K, J + 1) open uniforms, one row per phi draw; column 0 feeds the bound.

    Rows depend only on ``(seed, draw index)`` and the optional ``tag``, so
    specs replayed with the same tag share uniforms draw by draw.
    """
    base = RngStream(seed).child('stage2')
    if tag is not None:
        base = base.child(tag)
    return np.stack([base.child(k).uniform(J + 1) for k in range(K)])


def run_spec(phi: np.ndarray, spec: SurveillanceSpec, H, U) -> tuple:
    """Stage 2 for one spec over all draws; returns ``(c, theta, p)``."""
    K = phi.shape[0]
    c = sample_c(phi, spec.c0, spec.concentration, U[:, 0], draw_index=np.arange(K))
    c = np.broadcast_to(np.asarray(c, dtype=float), (K,)).copy()
    first, inv = _unique_rows(H)
    phi_u = np.zeros((K, len(first)))
    np.maximum.at(phi_u, (slice(None), inv), phi)
    mean = H[first] @ np.asarray(spec.beta)
    th = theta_from_mean(phi_u, c[:, None], mean[None, :], spec.sigma, spec.link,
                         U[:, 1:][:, first])[:, inv]
    return c, th, phi / th


def sensitivity_run(phi: PhiDraws, specs, H, seed: int, *, crn: bool = True,
                    groups=None, expected_digest: str | None = None) -> list:
    """Replay stage 2 for every spec against one set of phi draws.

    Parameters
    ----------
    phi : PhiDraws
    specs : sequence of SurveillanceSpec
    H : array or mapping
        Basis matrix at the grid points, either shared by all specs or a
        mapping from spec name to matrix.
    seed : int
        Stage-2 seed. With ``crn`` every spec sees the same uniforms for
        each (draw, point); otherwise each spec position gets its own stream.
    expected_digest : str, optional
        sha256 of the phi artifact; a mismatch raises ProvenanceError.

    Returns
    -------
    list of SpecResult, in the order of ``specs``.
    """
    if grid_hash(phi.grid) != phi.provenance.grid_hash:
        raise ProvenanceError('phi draws do not match their recorded grid hash')
    digest = phi.digest()
    if expected_digest is not None and digest != expected_digest:
        raise ProvenanceError('phi artifact digest differs from the expected value')
    K, J = phi.draws.shape
    U_shared = stage2_uniforms(seed, K, J) if crn else None
    results = []
    for i, spec in enumerate(specs):
        Hs = np.asarray(H[spec.name] if isinstance(H, dict) else H, dtype=float)
        if Hs.shape[0] != J:
            raise ValueError(f'basis for {spec.name} has {Hs.shape[0]} rows, grid has {J}')
        U = U_shared if crn else stage2_uniforms(seed, K, J, tag=i)
        consumed = phi.digest()
        if consumed != digest:
            raise ProvenanceError('phi draws changed during the sensitivity run')
        c, th, p = run_spec(phi.draws, spec, Hs, U)
        prov = Provenance(spec.hash(), int(digest[:16], 16), phi.provenance.grid_hash, seed)
        results.append(SpecResult(spec, c, th, p, prevalence(p, groups), consumed, prov))
    return results


def model_check_residual(phi_draws, spec: SurveillanceSpec, H) -> np.ndarray:
    """Per-point prior mass below the identified-set bound, averaged over draws.

    The bound uses the prior mean ``c0`` for ``c``. Scores near one flag
    points where the surveillance prior sits mostly outside the set allowed
    by the data; with ``sigma == 0`` the score is the fraction of draws whose
    point mass lies below the bound.
    """
    phi = np.atleast_2d(np.asarray(phi_draws.draws if isinstance(phi_draws, PhiDraws)
                                   else phi_draws, dtype=float))
    mean = np.asarray(H, dtype=float) @ np.asarray(spec.beta)
    r = phi / spec.c0
    with np.errstate(divide='ignore', invalid='ignore'):
        bound = np.where(r >= 1, np.inf, link_quantile(spec.link, np.minimum(r, 1.0)))
    if spec.sigma == 0:
        return np.mean(bound > mean, axis=0)
    return np.mean(gaussian_cdf((bound - mean) / spec.sigma), axis=0)


def spec_dict(spec: SurveillanceSpec) -> dict:
    return asdict(spec)
