"""Command-line front end.

Every command writes its outputs plus ``manifest.json`` (sha256 of each
output, input hashes, seed, config hash) into ``--out``. Stage 1
(``fit-phi``) and stage 2 (``sample-theta``, ``sensitivity``, ``check``)
only communicate through the phi draw file.

Exit codes
----------
0 success, 2 usage, 3 schema violation, 4 hash mismatch, 5 missing input
artifact, 6 bad data, 7 numerical failure. Failures print one line
``error code=N kind=K message="..."`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from ._hashing import hash64, sha256_file
from .bart import BartConfig, fit_probit_bart
from .biprobit import (PAPER_PARAMS, BiprobitDraws, SimDesign, evaluate_comparison,
                       gibbs_fit, save_truth, simulate)
from .dist import gaussian_quantile
from .draws import PhiDraws, ProvenanceError, read_draw_file
from .modular import (SPEC_SCHEMA, BasisError, DegeneratePriorError, SurveillanceSpec,
                      calibrate_intercept, model_check_residual, preset, preset_grid,
                      sensitivity_run, stage2_uniforms, theta_from_mean)
from .plotting import prevalence_svg, profile_svg
from .strata import (BasisDraws, DirectEffectPrior, MonotonicityError, Records,
                     fit_identified_basis, posterior_itt, simulate_encouragement)
from .synthetic import MISCONDUCT_COLUMNS, profile_points, simulate_misconduct
from .tables import DataError, binary_column, numeric_matrix, read_table, write_table

EXIT_USAGE, EXIT_SCHEMA, EXIT_HASH, EXIT_MISSING, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4, 5, 6, 7

_BART_FIELDS = {
    'L': 'integer', 'alpha_split': 'number', 'beta_split': 'number', 'k': 'number',
    'n_cutpoints': 'integer', 'n_burn': 'integer', 'n_keep': 'integer', 'thin': 'integer',
    'max_leaves': 'integer',
}

CONFIG_SCHEMA = {
    'type': 'object',
    'additionalProperties': False,
    'properties': {
        'bart': {'type': 'object', 'additionalProperties': False,
                 'properties': {k: {'type': t} for k, t in _BART_FIELDS.items()}},
        'gibbs': {'type': 'object', 'additionalProperties': False,
                  'properties': {'n_iter': {'type': 'integer', 'minimum': 1},
                                 'n_burn': {'type': 'integer', 'minimum': 0},
                                 'rho_step': {'type': 'number', 'exclusiveMinimum': 0}}},
        'calibration_target': {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 1},
        'specs': {'type': 'array', 'items': SPEC_SCHEMA},
        'strata': {'type': 'object', 'additionalProperties': False,
                   'properties': {'max_tries': {'type': 'integer', 'minimum': 1},
                                  'v': {'type': 'number', 'minimum': 0}}},
    },
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code, self.kind = code, kind


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_USAGE, 'usage', message)


@dataclass
class RunManifest:
    command: list
    seed: int
    config_hash: str
    threads: int
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    version: str = __version__
    started: float = field(default_factory=time.perf_counter)

    def add_input(self, path):
        self.inputs[str(path)] = sha256_file(path)

    def write(self, out_dir: Path) -> Path:
        out_dir = Path(out_dir)
        for p in sorted(out_dir.rglob('*')):
            if p.is_file() and p.name != 'manifest.json':
                self.outputs[p.relative_to(out_dir).as_posix()] = sha256_file(p)
        doc = {'command': self.command, 'version': self.version, 'seed': self.seed,
               'config_hash': self.config_hash, 'threads': self.threads,
               'inputs': self.inputs, 'outputs': self.outputs, 'extra': self.extra,
               'wall_clock_s': round(time.perf_counter() - self.started, 3)}
        path = out_dir / 'manifest.json'
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + '\n')
        return path


# ------------------------------------------------------------ helpers

def _require(path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(EXIT_MISSING, 'missing_artifact', f'{p} does not exist')
    return p


def _load_config(args) -> dict:
    if not args.config:
        return {}
    path = _require(args.config)
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise CliError(EXIT_SCHEMA, 'schema', f'{path}: invalid JSON ({e.msg})') from None
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def _bart_config(cfg: dict, seed: int, args) -> BartConfig:
    kw = dict(cfg.get('bart', {}))
    for name in ('n_burn', 'n_keep', 'L'):
        v = getattr(args, name, None)
        if v is not None:
            kw[name] = v
    return BartConfig(seed=seed, **kw)


def _covariates(table: dict, args, exclude=()) -> list:
    if getattr(args, 'covariates', None):
        return args.covariates.split(',')
    skip = {args.response, *exclude}
    return [k for k, v in table.items() if k not in skip and v.dtype.kind in 'fiu']


def _load_phi(args):
    """Read the phi artifact, its sidecar metadata and the grid it was evaluated on."""
    path = _require(args.phi)
    meta = json.loads(_require(path.with_name(path.stem + '_meta.json')).read_text())
    grid = read_table(_require(args.grid))
    G = numeric_matrix(grid, meta['covariates'])
    phi = PhiDraws.read(path, G)
    return phi, grid, meta, sha256_file(path)


def _spec_list(args, cfg) -> list:
    specs = [SurveillanceSpec.from_json(d) for d in cfg.get('specs', [])]
    for s in args.spec or []:
        if s == 'grid':
            specs.extend(preset_grid(args.link))
        elif s in ('model_A', 'model_B'):
            specs.append(preset(s, link=args.link))
        else:
            p = _require(s)
            try:
                doc = json.loads(p.read_text())
            except json.JSONDecodeError as e:
                raise CliError(EXIT_SCHEMA, 'schema', f'{p}: invalid JSON ({e.msg})') from None
            specs.append(SurveillanceSpec.from_json(doc))
    return specs


def _designs(specs, grid, target):
    """Per-spec basis matrices on the grid, calibrating intercepts if asked."""
    out_specs, H, calib = [], {}, {}
    for s in specs:
        _, Hs = s.design(grid)
        if target is not None:
            b0 = calibrate_intercept(s, Hs, target)
            s = s.with_intercept(b0)
            calib[s.name] = b0
        if s.name in H:
            raise CliError(EXIT_SCHEMA, 'schema', f'duplicate spec name {s.name!r}')
        out_specs.append(s)
        H[s.name] = Hs
    return out_specs, H, calib


def _read_p_draws(out_dir: Path, name: str) -> np.ndarray:
    b = out_dir / f'{name}.pdrw'
    if b.is_file():
        return read_draw_file(b, b'PDRW')[1]
    c = _require(out_dir / f'{name}_p_draws.csv')
    rows = np.genfromtxt(c, delimiter=',', names=True)
    K = int(rows['draw_index'].max()) + 1
    J = int(rows['point_index'].max()) + 1
    p = np.empty((K, J))
    p[rows['draw_index'].astype(int), rows['point_index'].astype(int)] = rows['p']
    return p


def _grid_points(records_x, grid) -> np.ndarray:
    index = {tuple(r): j for j, r in enumerate(np.asarray(grid).tolist())}
    try:
        return np.array([index[tuple(r)] for r in np.asarray(records_x).tolist()])
    except KeyError as e:
        raise DataError(f'record covariates {e.args[0]} are not on the grid') from None


# ------------------------------------------------------------ commands

def cmd_simulate(args, cfg, man):
    out = Path(args.out)
    if args.design == 'misconduct':
        data, truth = simulate_misconduct(args.n, args.seed)
        cols = list(MISCONDUCT_COLUMNS) + ['sic', 'y']
        write_table(out / 'data.csv', {c: data[c] for c in cols})
        write_table(out / 'truth.csv', {'row': np.arange(args.n), **truth})
        J = min(args.grid_size, args.n)
        grid = {c: np.asarray(data[c])[:J] for c in list(MISCONDUCT_COLUMNS) + ['sic']}
        for vary in ('net_income', 'cash'):
            prof = profile_points(data, args.profile_row, vary)
            for c in MISCONDUCT_COLUMNS:
                grid[c] = np.concatenate([grid[c], prof[c]])
            grid['sic'] = np.concatenate([grid['sic'], np.repeat(data['sic'][args.profile_row],
                                                                 len(prof[vary]))])
        write_table(out / 'grid.csv', grid)
    else:
        X, Y, truth = simulate(SimDesign(args.design, args.n), PAPER_PARAMS, args.seed)
        write_table(out / 'data.csv', {'x1': X[:, 0], 'x2': X[:, 1], 'x3': X[:, 2], 'y': Y})
        save_truth(out / 'truth.csv', X, Y, truth)


def cmd_fit_phi(args, cfg, man):
    out = Path(args.out)
    data = read_table(_require(args.data))
    man.add_input(args.data)
    covs = _covariates(data, args, exclude=('row',))
    X = numeric_matrix(data, covs)
    y = binary_column(data, args.response)
    if args.grid:
        man.add_input(args.grid)
        G = numeric_matrix(read_table(_require(args.grid)), covs)
    else:
        G = X
    config = _bart_config(cfg, args.seed, args)
    phi = fit_probit_bart(X, y, G, config)
    phi.write(out / 'phi.phid')
    if args.format == 'csv':
        phi.to_csv(out / 'phi.csv')
    (out / 'phi_summary.csv').write_text(phi.summary_csv())
    meta = {'covariates': covs, 'response': args.response, 'config': config.to_dict(),
            'provenance': phi.provenance.as_dict(), 'notes': list(phi.notes),
            'K': phi.K, 'J': phi.J}
    (out / 'phi_meta.json').write_text(json.dumps(meta, indent=2, sort_keys=True) + '\n')
    print(f'phi draws K={phi.K} J={phi.J} written to {out / "phi.phid"}')


def _stage2(args, cfg, man, specs):
    phi, grid, meta, digest = _load_phi(args)
    man.add_input(args.phi)
    man.add_input(args.grid)
    target = args.calibrate if args.calibrate is not None else cfg.get('calibration_target')
    specs, H, calib = _designs(specs, grid, target)
    groups = None
    if args.group:
        if args.group not in grid:
            raise DataError(f'group column {args.group!r} not in grid')
        groups = grid[args.group].astype(str)
    results = sensitivity_run(phi, specs, H, args.seed, groups=groups, expected_digest=digest)
    out = Path(args.out)
    rows = {'spec': [], 'phi_sha256': [], 'beta0': [], 'support_ok': [], 'alpha_q05': [],
            'alpha_q50': [], 'alpha_q95': []}
    for r in results:
        if not r.support_ok(phi.draws):
            raise ArithmeticError(f'{r.spec.name}: draws left the identified set')
        r.write(out, args.format)
        (out / f'{r.spec.name}_spec.json').write_text(json.dumps(r.spec.to_json(), indent=2) + '\n')
        q = np.quantile(r.summary.alpha, [0.05, 0.5, 0.95])
        rows['spec'].append(r.spec.name)
        rows['phi_sha256'].append(r.phi_digest)
        rows['beta0'].append(float(r.spec.beta[0]))
        rows['support_ok'].append('true')
        for key, v in zip(('alpha_q05', 'alpha_q50', 'alpha_q95'), q):
            rows[key].append(float(v))
        print(f'{r.spec.name}: alpha median {q[1]:.4f} (90% {q[0]:.4f}-{q[2]:.4f})')
    write_table(out / 'sensitivity.csv', rows)
    man.extra.update({'phi_sha256': digest, 'stage1_fits': 0, 'calibrated_beta0': calib})
    return results


def cmd_sample_theta(args, cfg, man):
    specs = _spec_list(args, cfg)
    if len(specs) != 1:
        raise CliError(EXIT_USAGE, 'usage', f'sample-theta needs exactly one spec, got {len(specs)}')
    _stage2(args, cfg, man, specs)


def cmd_sensitivity(args, cfg, man):
    specs = _spec_list(args, cfg) or preset_grid(args.link)
    _stage2(args, cfg, man, specs)


def cmd_check(args, cfg, man):
    phi, grid, meta, digest = _load_phi(args)
    man.add_input(args.phi)
    specs = _spec_list(args, cfg) or preset_grid(args.link)
    target = args.calibrate if args.calibrate is not None else cfg.get('calibration_target')
    specs, H, _ = _designs(specs, grid, target)
    out = Path(args.out)
    summary = {'spec': [], 'mean_residual': [], 'n_flagged': []}
    for s in specs:
        r = model_check_residual(phi, s, H[s.name])
        write_table(out / f'check_{s.name}.csv', {'point_index': np.arange(len(r)), 'residual': r})
        summary['spec'].append(s.name)
        summary['mean_residual'].append(float(r.mean()))
        summary['n_flagged'].append(int(np.sum(r > args.threshold)))
        print(f'{s.name}: mean residual {r.mean():.4f}, '
              f'{int(np.sum(r > args.threshold))} points above {args.threshold}')
    write_table(out / 'check.csv', summary)


def cmd_fit_biprobit(args, cfg, man):
    data = read_table(_require(args.data))
    man.add_input(args.data)
    X = numeric_matrix(data, _covariates(data, args))
    y = binary_column(data, args.response)
    g = cfg.get('gibbs', {})
    z_vars = tuple(int(v) for v in args.z_vars.split(','))
    w_vars = tuple(int(v) for v in args.w_vars.split(','))
    d = gibbs_fit(X, y, n_iter=args.n_iter or g.get('n_iter', 5000),
                  n_burn=args.n_burn if args.n_burn is not None else g.get('n_burn', 1000),
                  seed=args.seed, z_vars=z_vars, w_vars=w_vars,
                  rho_step=g.get('rho_step', 0.3))
    d.to_csv(Path(args.out) / 'biprobit_draws.csv')
    names, M = d.free_parameters()
    for n, m, s in zip(names, M.mean(0), M.std(0, ddof=1)):
        print(f'{n}: mean {m:.4f} sd {s:.4f}')
    man.extra['rho_accept_rate'] = d.accept_rate


def cmd_compare(args, cfg, man):
    phi, data, meta, digest = _load_phi(args)
    truth = read_table(_require(args.truth))
    for p in (args.phi, args.grid, args.truth, args.biprobit):
        man.add_input(_require(p))
    bp = BiprobitDraws.from_csv(args.biprobit)
    X = numeric_matrix(data, meta['covariates'])
    K, J = phi.draws.shape
    if len(truth['p_true']) != J:
        raise DataError('truth rows do not match the phi grid')
    U = stage2_uniforms(args.seed, K, J)
    mean = gaussian_quantile(truth['theta_true'])[None, :]
    th = theta_from_mean(phi.draws, 1.0, mean, args.theta_sigma, 'probit', U[:, 1:])
    keep = np.linspace(0, len(bp.rho) - 1, min(K, len(bp.rho))).round().astype(int)
    cmp = evaluate_comparison(truth['p_true'], {'modular': phi.draws / th,
                                                'biprobit': bp.p_draws(X)[keep]})
    out = Path(args.out)
    cmp.to_csv(out / 'comparison.csv')
    (out / 'comparison_metrics.csv').write_text(cmp.table())
    cmp.to_svg(out / 'comparison.svg', title=args.title, provenance=f'phi sha256 {digest}')
    print(cmp.table(), end='')


def cmd_strata_simulate(args, cfg, man):
    rec, grid, truth = simulate_encouragement(args.n, args.seed, args.b_a, args.b_n)
    out = Path(args.out)
    write_table(out / 'strata_data.csv', {'z': rec.z, 't': rec.t, 'y': rec.y,
                                          'age': rec.x[:, 0], 'copd': rec.x[:, 1]})
    write_table(out / 'strata_grid.csv', {'age': grid[:, 0], 'copd': grid[:, 1]})
    doc = {'itt_sample': truth['itt_sample'], 'itt_c_population': truth['itt_c_population'],
           'b_a': args.b_a, 'b_n': args.b_n}
    (out / 'strata_truth.json').write_text(json.dumps(doc, indent=2, sort_keys=True) + '\n')


def _strata_inputs(args, man):
    data = read_table(_require(args.data))
    grid = numeric_matrix(read_table(_require(args.grid)), ['age', 'copd'])
    man.add_input(args.data)
    man.add_input(args.grid)
    x = numeric_matrix(data, ['age', 'copd'])
    rec = Records(binary_column(data, 'z'), binary_column(data, 't'), binary_column(data, 'y'),
                  _grid_points(x, grid), x)
    return rec, grid


def cmd_strata_fit(args, cfg, man):
    rec, grid = _strata_inputs(args, man)
    config = _bart_config(cfg, args.seed, args)
    bd = fit_identified_basis(rec, grid, config)
    out = Path(args.out)
    bd.to_csv(out / 'basis_draws.csv')
    info = {'rejection_rate': bd.rejection_rate, 'kept': int(len(bd.kept)), 'K': config.n_keep}
    (out / 'strata_fit.json').write_text(json.dumps(info, indent=2, sort_keys=True) + '\n')
    print(f'monotonicity rejection rate {bd.rejection_rate:.4f}; {len(bd.kept)} draws kept')


def cmd_strata_itt(args, cfg, man):
    rec, grid = _strata_inputs(args, man)
    man.add_input(_require(args.basis))
    bd = BasisDraws.from_csv(args.basis, grid)
    st = cfg.get('strata', {})
    out = Path(args.out)
    rows = {'prior': [], 'stratum': [], 'mean': [], 'sd': [], 'n_draws': []}
    events = {}
    for label in args.prior or ['centered:0.1']:
        prior = DirectEffectPrior.parse(label, v=st.get('v', 0.025))
        post = posterior_itt(bd.basis, rec, prior, args.seed, st.get('max_tries', 100))
        for s, (m, sd) in post.summary().items():
            rows['prior'].append(label)
            rows['stratum'].append(s)
            rows['mean'].append(m)
            rows['sd'].append(sd)
            rows['n_draws'].append(sum(x is not None for x in post.itt[s]))
            print(f'{label} ITT_{s}: mean {m:.4f} sd {sd:.4f}')
        events[label] = {'rejection_events': post.rejection_events,
                         'dropped_draws': len(post.dropped_draws)}
        print(f'{label}: {post.rejection_events} support rejections, '
              f'{len(post.dropped_draws)} draws dropped')
    write_table(out / 'itt.csv', rows)
    man.extra['support_rejections'] = events


def cmd_report(args, cfg, man):
    src = Path(args.input)
    index = read_table(_require(src / 'sensitivity.csv'))
    names = [str(n) for n in index['spec']]
    out = Path(args.out)
    alphas = {}
    for n in names:
        a = read_table(_require(src / f'{n}_alpha.csv'))
        alphas[n] = a['alpha']
    prov = 'phi sha256 ' + str(index['phi_sha256'][0])
    prevalence_svg(out / 'prevalence.svg', alphas, provenance=prov)
    if args.profile:
        if not args.vary or not args.grid:
            raise CliError(EXIT_USAGE, 'usage', '--profile needs --vary and --grid')
        try:
            key, val = args.profile.split('=')
            assert key == 'row'
            row = int(val)
        except (ValueError, AssertionError):
            raise CliError(EXIT_USAGE, 'usage', '--profile must look like row=R') from None
        grid = read_table(_require(args.grid))
        man.add_input(args.grid)
        if args.vary not in grid:
            raise DataError(f'column {args.vary!r} not in grid')
        others = [c for c in grid if c != args.vary]
        match = np.ones(len(grid[args.vary]), dtype=bool)
        for c in others:
            match &= grid[c] == grid[c][row]
        idx = np.flatnonzero(match)
        idx = idx[np.argsort(grid[args.vary][idx], kind='stable')]
        if len(idx) < 2:
            raise DataError(f'grid holds fewer than two points varying {args.vary!r} from row {row}')
        x = grid[args.vary][idx]
        bands = {n: _read_p_draws(src, n)[:, idx] for n in names}
        rows = {'spec': [], 'q50_first': [], 'q50_last': [], 'direction': []}
        for n, d in bands.items():
            med = np.median(d, axis=0)
            rows['spec'].append(n)
            rows['q50_first'].append(float(med[0]))
            rows['q50_last'].append(float(med[-1]))
            rows['direction'].append('up' if med[-1] > med[0] else 'down' if med[-1] < med[0]
                                     else 'flat')
        write_table(out / f'profile_{args.vary}.csv', rows)
        profile_svg(out / f'profile_{args.vary}.svg', x, bands, xlabel=args.vary,
                    provenance=prov + f' row={row}')


# ------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--config', help='JSON configuration file')
    common.add_argument('--out', default='.', help='output directory')
    common.add_argument('--threads', type=int, default=1,
                        help='worker threads; affects speed only')
    common.add_argument('--format', choices=('csv', 'binary'), default='binary')

    p = _Parser(prog='partialid', description='Bayesian partial identification toolkit')
    p.add_argument('--version', action='version', version=__version__)
    sub = p.add_subparsers(dest='command', required=True)

    s = sub.add_parser('simulate', parents=[common], help='synthetic datasets')
    s.add_argument('--design', choices=('misconduct', 'linear', 'sine'), required=True)
    s.add_argument('--n', type=int, default=2000)
    s.add_argument('--grid-size', type=int, default=500)
    s.add_argument('--profile-row', type=int, default=0)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser('fit-phi', parents=[common], help='stage 1: probit BART for phi')
    s.add_argument('--data', required=True)
    s.add_argument('--response', default='y')
    s.add_argument('--covariates', help='comma-separated; default all numeric columns')
    s.add_argument('--grid', help='CSV of design points; default the data rows')
    s.add_argument('--n-burn', dest='n_burn', type=int)
    s.add_argument('--n-keep', dest='n_keep', type=int)
    s.add_argument('--trees', dest='L', type=int)
    s.set_defaults(func=cmd_fit_phi)

    def stage2(name, func, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument('--phi', required=True, help='phi draw file from fit-phi')
        s.add_argument('--grid', required=True, help='grid CSV used by fit-phi')
        s.add_argument('--spec', action='append',
                       help='spec JSON path, model_A, model_B or grid; repeatable')
        s.add_argument('--link', choices=('probit', 'logit'), default='probit')
        s.add_argument('--calibrate', type=float,
                       help='calibrate each intercept to this mean surveillance rate')
        s.set_defaults(func=func)
        return s

    s = stage2('sample-theta', cmd_sample_theta, 'stage 2 for one spec')
    s.add_argument('--group')
    s = stage2('sensitivity', cmd_sensitivity, 'stage 2 over a grid of specs')
    s.add_argument('--group')
    s = stage2('check', cmd_check, 'per-point prior-vs-support residuals')
    s.add_argument('--threshold', type=float, default=0.5)

    s = sub.add_parser('fit-biprobit', parents=[common], help='Gibbs fit of the bivariate probit')
    s.add_argument('--data', required=True)
    s.add_argument('--response', default='y')
    s.add_argument('--covariates')
    s.add_argument('--n-iter', dest='n_iter', type=int)
    s.add_argument('--n-burn', dest='n_burn', type=int)
    s.add_argument('--z-vars', default='0,1')
    s.add_argument('--w-vars', default='0,2')
    s.set_defaults(func=cmd_fit_biprobit)

    s = sub.add_parser('compare', parents=[common], help='modular versus biprobit accuracy')
    s.add_argument('--phi', required=True)
    s.add_argument('--grid', required=True, help='the data CSV the phi grid was built from')
    s.add_argument('--truth', required=True)
    s.add_argument('--biprobit', required=True)
    s.add_argument('--theta-sigma', type=float, default=0.1)
    s.add_argument('--title', default='')
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser('strata', help='principal strata analysis')
    ssub = s.add_subparsers(dest='strata_command', required=True)
    t = ssub.add_parser('simulate', parents=[common])
    t.add_argument('--n', type=int, default=5000)
    t.add_argument('--b-a', dest='b_a', type=float, default=0.0)
    t.add_argument('--b-n', dest='b_n', type=float, default=0.0)
    t.set_defaults(func=cmd_strata_simulate)
    t = ssub.add_parser('fit', parents=[common])
    t.add_argument('--data', required=True)
    t.add_argument('--grid', required=True)
    t.add_argument('--n-burn', dest='n_burn', type=int)
    t.add_argument('--n-keep', dest='n_keep', type=int)
    t.set_defaults(func=cmd_strata_fit)
    t = ssub.add_parser('itt', parents=[common])
    t.add_argument('--data', required=True)
    t.add_argument('--grid', required=True)
    t.add_argument('--basis', required=True)
    t.add_argument('--prior', action='append',
                   help='centered:SIGMA, centered:SA,SN or informed; repeatable')
    t.set_defaults(func=cmd_strata_itt)

    s = sub.add_parser('report', parents=[common], help='SVG figures from sensitivity output')
    s.add_argument('--in', dest='input', required=True)
    s.add_argument('--grid')
    s.add_argument('--profile', help='row=R')
    s.add_argument('--vary')
    s.set_defaults(func=cmd_report)
    return p


def _fail(code, kind, message) -> int:
    print(f'error code={code} kind={kind} message={json.dumps(str(message))}', file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        cfg = _load_config(args)
        if args.threads < 1:
            raise CliError(EXIT_USAGE, 'usage', '--threads must be positive')
        Path(args.out).mkdir(parents=True, exist_ok=True)
        man = RunManifest(['partialid', *argv], args.seed, f'{hash64(cfg):016x}', args.threads)
        args.func(args, cfg, man)
        man.write(Path(args.out))
        return 0
    except CliError as e:
        return _fail(e.code, e.kind, e)
    except jsonschema.ValidationError as e:
        return _fail(EXIT_SCHEMA, 'schema', e.message)
    except ProvenanceError as e:
        return _fail(EXIT_HASH, 'hash_mismatch', e)
    except FileNotFoundError as e:
        return _fail(EXIT_MISSING, 'missing_artifact', e)
    except (DegeneratePriorError, ArithmeticError, FloatingPointError) as e:
        return _fail(EXIT_NUMERICAL, 'numerical', e)
    except (DataError, BasisError, MonotonicityError, KeyError, ValueError) as e:
        return _fail(EXIT_DATA, 'data', e)


if __name__ == '__main__':
    sys.exit(main())
