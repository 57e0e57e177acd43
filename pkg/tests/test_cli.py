import json

import numpy as np
import pytest

from partialid._hashing import sha256_file
from partialid.cli import main
from partialid.tables import read_table

SMALL = {'bart': {'L': 20, 'n_burn': 40, 'n_keep': 60}}


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope='module')
def misconduct(tmp_path_factory):
    root = tmp_path_factory.mktemp('misconduct')
    cfg = root / 'cfg.json'
    cfg.write_text(json.dumps(SMALL))
    assert run('simulate', '--design', 'misconduct', '--n', 800, '--grid-size', 120,
               '--seed', 4, '--out', root / 'data') == 0
    assert run('fit-phi', '--data', root / 'data/data.csv', '--grid', root / 'data/grid.csv',
               '--covariates', 'fiscal_year,ft_hits,cash,net_income,qui_tam', '--config', cfg,
               '--seed', 1, '--out', root / 'phi') == 0
    return root


def test_manifest_hashes_every_output(misconduct):
    man = json.loads((misconduct / 'phi/manifest.json').read_text())
    assert {'phi.phid', 'phi_meta.json', 'phi_summary.csv'} <= set(man['outputs'])
    for name, digest in man['outputs'].items():
        assert sha256_file(misconduct / 'phi' / name) == digest
    assert man['seed'] == 1 and len(man['inputs']) == 2


def test_fit_phi_is_reproducible(misconduct, tmp_path):
    cfg = misconduct / 'cfg.json'
    assert run('fit-phi', '--data', misconduct / 'data/data.csv',
               '--grid', misconduct / 'data/grid.csv',
               '--covariates', 'fiscal_year,ft_hits,cash,net_income,qui_tam', '--config', cfg,
               '--seed', 1, '--out', tmp_path) == 0
    assert sha256_file(tmp_path / 'phi.phid') == sha256_file(misconduct / 'phi/phi.phid')


def test_sensitivity_grid_from_one_fit(misconduct, tmp_path):
    assert run('sensitivity', '--phi', misconduct / 'phi/phi.phid',
               '--grid', misconduct / 'data/grid.csv', '--calibrate', 0.3,
               '--out', tmp_path) == 0
    idx = read_table(tmp_path / 'sensitivity.csv')
    assert len(idx['spec']) == 8
    assert len(set(idx['phi_sha256'])) == 1
    assert idx['phi_sha256'][0] == sha256_file(misconduct / 'phi/phi.phid')
    assert all(s == 'true' for s in idx['support_ok'])
    assert len(list(tmp_path.glob('*_summary.csv'))) == 8
    man = json.loads((tmp_path / 'manifest.json').read_text())
    assert man['extra']['stage1_fits'] == 0

    # the profile rows sit after the first grid-size rows
    rep = tmp_path / 'report'
    assert run('report', '--in', tmp_path, '--grid', misconduct / 'data/grid.csv',
               '--profile', 'row=120', '--vary', 'net_income', '--out', rep) == 0
    prof = read_table(rep / 'profile_net_income.csv')
    assert set(prof['direction']) <= {'up', 'down', 'flat'}
    assert (rep / 'prevalence.svg').read_text().rstrip().endswith('</svg>')


def test_sample_theta_and_check(misconduct, tmp_path):
    assert run('sample-theta', '--phi', misconduct / 'phi/phi.phid',
               '--grid', misconduct / 'data/grid.csv', '--spec', 'model_A',
               '--format', 'csv', '--out', tmp_path) == 0
    assert (tmp_path / 'model_A_p_draws.csv').is_file()
    assert run('check', '--phi', misconduct / 'phi/phi.phid',
               '--grid', misconduct / 'data/grid.csv', '--spec', 'model_B',
               '--out', tmp_path / 'chk') == 0
    r = read_table(tmp_path / 'chk/check_model_B.csv')['residual']
    assert np.all((r >= 0) & (r <= 1))


def test_exit_codes(misconduct, tmp_path, capsys):
    phi = misconduct / 'phi/phi.phid'
    grid = misconduct / 'data/grid.csv'
    assert run('sensitivity', '--phi', phi) == 2
    assert run('sample-theta', '--phi', phi, '--grid', grid, '--spec', 'model_A',
               '--spec', 'model_B', '--out', tmp_path) == 2
    assert run('sensitivity', '--phi', tmp_path / 'nope.phid', '--grid', grid,
               '--out', tmp_path) == 5
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'bart': {'trees': 5}}))
    assert run('fit-phi', '--data', misconduct / 'data/data.csv', '--config', bad,
               '--out', tmp_path) == 3
    # a grid that differs from the one phi was evaluated on
    rows = (grid.read_text().splitlines())
    other = tmp_path / 'grid.csv'
    other.write_text('\n'.join([rows[0], rows[2], rows[1], *rows[3:]]) + '\n')
    assert run('sensitivity', '--phi', phi, '--grid', other, '--out', tmp_path) == 4
    holes = tmp_path / 'holes.csv'
    holes.write_text('x1,y\n0.5,1\n,0\n')
    assert run('fit-phi', '--data', holes, '--out', tmp_path) == 6
    err = capsys.readouterr().err.strip().splitlines()
    assert all(line.startswith('error code=') and 'message="' in line for line in err)
    assert len(err) == 6


def test_strata_pipeline(tmp_path):
    cfg = tmp_path / 'cfg.json'
    cfg.write_text(json.dumps({'bart': {'L': 10, 'n_burn': 20, 'n_keep': 20}}))
    assert run('strata', 'simulate', '--n', 600, '--out', tmp_path) == 0
    truth = json.loads((tmp_path / 'strata_truth.json').read_text())
    assert -1 <= truth['itt_c_population'] <= 1
    common = ['--data', tmp_path / 'strata_data.csv', '--grid', tmp_path / 'strata_grid.csv']
    assert run('strata', 'fit', *common, '--config', cfg, '--out', tmp_path) == 0
    assert run('strata', 'itt', *common, '--basis', tmp_path / 'basis_draws.csv',
               '--prior', 'centered:0.1', '--prior', 'informed', '--out', tmp_path) == 0
    itt = read_table(tmp_path / 'itt.csv')
    assert len(itt['stratum']) == 6
    assert np.all(np.abs(itt['mean']) <= 1)


def test_biprobit_cli(tmp_path):
    assert run('simulate', '--design', 'linear', '--n', 300, '--out', tmp_path) == 0
    assert run('fit-biprobit', '--data', tmp_path / 'data.csv', '--n-iter', 200,
               '--n-burn', 50, '--out', tmp_path) == 0
    text = (tmp_path / 'biprobit_draws.csv').read_text().splitlines()
    assert len(text) == 151
