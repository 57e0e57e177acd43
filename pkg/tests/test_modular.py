import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special, stats

from partialid.dist import TruncationUnderflowError
from partialid.draws import PhiDraws, Provenance, ProvenanceError, grid_hash
from partialid.modular import (BasisError, DegeneratePriorError, SurveillanceSpec, ThetaDraw,
                               VarTransform, calibrate_intercept, link_quantile, make_basis,
                               model_check_residual, preset, preset_grid, prevalence,
                               reconstruct_p, run_spec, sample_c, sample_theta,
                               sensitivity_run, stage2_uniforms, theta_from_mean)

probs = st.floats(1e-12, 0.999, allow_nan=False)


def _phi(K=20, J=6, seed=0, hi=0.3):
    rng = np.random.default_rng(seed)
    grid = np.arange(J, dtype=float)[:, None]
    return PhiDraws(grid, rng.uniform(0.001, hi, (K, J)), Provenance(1, 2, grid_hash(grid), 0))


def _spec(**kw):
    base = dict(name='s', basis=(VarTransform('x'),), beta=(-0.5, 1.0), sigma=0.25, c0=0.4)
    base.update(kw)
    return SurveillanceSpec(**base)


# ------------------------------------------------------------ basis

def test_affine_and_log_transforms_map_to_unit_interval():
    data = {'a': np.array([2.0, 4.0, 3.0]), 'b': np.array([0.0, 9.0, 99.0])}
    basis, H = make_basis(data, [VarTransform('a'), VarTransform('b', 'shifted_log', 1.0)])
    assert np.allclose(H[:, 0], 1.0)
    assert np.allclose(H[:, 1], [0.0, 1.0, 0.5])
    assert np.allclose(H[:, 2], [0.0, 0.5, 1.0])
    for t, col in zip(basis.transforms, (data['a'], data['b'])):
        assert np.allclose(t.invert(t.apply(col)), col)


def test_log_transform_error_names_variable_and_row():
    with pytest.raises(BasisError, match=r"'inc'.*row 1"):
        make_basis({'inc': np.array([0.5, -2.0, 1.0])}, [VarTransform('inc', 'shifted_log', 1.0)])
    with pytest.raises(BasisError, match='missing'):
        make_basis({'x': np.arange(3.0)}, [VarTransform('y')])
    with pytest.raises(BasisError, match='constant'):
        make_basis({'x': np.ones(3)}, [VarTransform('x')])


# ------------------------------------------------------------ spec documents

def test_spec_json_roundtrip():
    s = preset('model_B', sigma=0.5, link='logit')
    doc = json.loads(json.dumps(s.to_json()))
    back = SurveillanceSpec.from_json(doc)
    assert back == s and back.hash() == s.hash()


def test_spec_schema_and_consistency_errors():
    doc = preset('model_A').to_json()
    for bad in ({**doc, 'link': 'cauchit'}, {k: v for k, v in doc.items() if k != 'beta'},
                {**doc, 'sigma': -1}, {**doc, 'extra': 1}):
        with pytest.raises(jsonschema.ValidationError):
            SurveillanceSpec.from_json(bad)
    with pytest.raises(ValueError, match='beta'):
        SurveillanceSpec.from_json({**doc, 'beta': [0.0, 1.0]})
    with pytest.raises(ValueError):
        _spec(c0=0.0)


def test_preset_grid_has_eight_named_specs():
    g = preset_grid()
    assert len(g) == 8 and len({s.name for s in g}) == 8
    assert {(s.sigma, s.c0) for s in g} == {(a, b) for a in (0.25, 0.5) for b in (0.4, 0.8)}
    a, b = preset('model_A'), preset('model_B')
    # the income coefficient (after intercept, year, hits, cash) flips on
    assert a.beta[4] == 0.0 and b.beta[4] > 0


# ------------------------------------------------------------ calibration

@pytest.mark.parametrize('target', [0.05, 0.3, 0.9])
def test_calibration_zero_slopes_is_closed_form(target):
    s = _spec(link='logit', beta=(0.0, 0.0))
    H = np.column_stack([np.ones(50), np.linspace(0, 1, 50)])
    b0 = calibrate_intercept(s, H, target)
    assert b0 == pytest.approx(np.log(target / (1 - target)), abs=1e-10)
    b0p = calibrate_intercept(s.with_(link='probit'), H, target)
    assert b0p == pytest.approx(special.ndtri(target), abs=1e-10)


@given(st.floats(0.01, 0.99), st.floats(-5, 5))
def test_calibration_residual(target, slope):
    s = _spec(beta=(0.0, slope))
    H = np.column_stack([np.ones(30), np.linspace(0, 1, 30)])
    b0 = calibrate_intercept(s, H, target)
    assert abs(np.mean(special.ndtr(b0 + slope * H[:, 1])) - target) <= 1e-10


# ------------------------------------------------------------ bound c

def test_sample_c_support_and_point_mass():
    phi = _phi().draws
    u = np.linspace(0.01, 0.99, phi.shape[0])
    c = sample_c(phi, 0.4, 10.0, u)
    assert np.all(c >= phi.max(axis=1))
    assert np.all(sample_c(phi, 1.0, 10.0, u) == 1.0)


def test_sample_c_distribution_matches_truncated_beta():
    m = 0.35
    u = (np.arange(20000) + 0.5) / 20000
    c = sample_c(np.array([[m]]), 0.4, 10.0, u)
    d = stats.beta(4.0, 6.0)
    cdf = lambda x: (d.cdf(x) - d.cdf(m)) / d.sf(m)  # noqa: E731
    assert stats.kstest(c, cdf).statistic < 1e-3


def test_sample_c_conflict_reports_draw():
    phi = np.array([[0.2], [0.9999999999]])
    with pytest.raises(TruncationUnderflowError, match=r'draw\(s\) \[7\]'):
        sample_c(phi, 0.01, 1000.0, np.array([0.5, 0.5]), draw_index=np.array([3, 7]))


# ------------------------------------------------------------ theta

@given(probs, st.floats(0.0, 1.0), st.floats(-8, 8), st.floats(0.01, 3), probs,
       st.sampled_from(['probit', 'logit']))
def test_theta_support_is_exact(phi, cgap, mean, sigma, u, link):
    c = phi + cgap * (1 - phi)
    try:
        th = theta_from_mean(phi, c, mean, sigma, link, u)
    except TruncationUnderflowError:
        # only a prior sitting tens of SDs below the bound may refuse to draw
        assert (link_quantile(link, phi / c) - mean) / sigma > 30
        return
    assert phi / c <= th <= 1
    assert phi / th <= c


def test_theta_distribution_matches_truncated_normal():
    phi, c, mean, sigma = 0.2, 0.5, 0.0, 0.5
    u = (np.arange(20000) + 0.5) / 20000
    v = special.ndtri(theta_from_mean(phi, c, mean, sigma, 'probit', u))
    a = (special.ndtri(phi / c) - mean) / sigma
    assert stats.kstest(v, stats.truncnorm(a, np.inf, loc=mean, scale=sigma).cdf).statistic < 1e-3


def test_theta_sigma_zero():
    assert theta_from_mean(0.1, 0.5, 1.0, 0.0, 'probit', 0.5) == special.ndtr(1.0)
    with pytest.raises(DegeneratePriorError) as e:
        theta_from_mean(np.array([0.1, 0.4]), 0.5, np.array([1.0, -2.0]), 0.0, 'probit', 0.5)
    assert list(e.value.points) == [1]


@given(st.floats(-3, 3), st.floats(0, 2), probs)
def test_theta_common_random_numbers_monotone(mean, delta, u):
    a = theta_from_mean(0.05, 0.6, mean, 0.3, 'probit', u)
    b = theta_from_mean(0.05, 0.6, mean + delta, 0.3, 'probit', u)
    # near the bound, mean + sd z cancels, so tiny shifts can lose a few ulps
    assert b >= a - 16 * np.spacing(a)
    if delta >= 0.01:
        assert b >= a


def test_duplicate_rows_share_theta_and_use_max_phi():
    s = _spec(sigma=0.3)
    H = np.array([[1, 0.0], [1, 0.5], [1, 0.0]])
    phi = np.array([0.1, 0.2, 0.35])
    d = sample_theta(phi, 0.5, s, H, np.array([0.001, 0.5, 0.9]))
    assert d.theta[0] == d.theta[2]
    assert d.theta[0] >= 0.35 / 0.5
    assert d.check(phi)
    assert np.array_equal(reconstruct_p(phi, d), phi / d.theta)


def test_thetadraw_check_catches_violations():
    assert not ThetaDraw(0.5, np.array([0.1])).check(np.array([0.2]))
    assert not ThetaDraw(0.1, np.array([1.0])).check(np.array([0.2]))


# ------------------------------------------------------------ sensitivity

def test_run_spec_support_and_shapes():
    phi = _phi()
    U = stage2_uniforms(3, phi.K, phi.J)
    assert U.shape == (phi.K, phi.J + 1)
    H = np.column_stack([np.ones(phi.J), np.linspace(0, 1, phi.J)])
    c, th, p = run_spec(phi.draws, _spec(), H, U)
    assert np.all(c >= phi.draws.max(axis=1))
    assert np.all((phi.draws / c[:, None] <= th) & (th <= 1))
    assert np.all((p >= phi.draws) & (p <= c[:, None]))


def test_sensitivity_duplicates_and_crn():
    phi = _phi()
    H = np.column_stack([np.ones(phi.J), np.linspace(0, 1, phi.J)])
    s = _spec()
    r = sensitivity_run(phi, [s, s.with_(name='copy'), s.with_(sigma=0.5, name='wide')], H, 4)
    assert np.array_equal(r[0].p, r[1].p) and np.array_equal(r[0].c, r[1].c)
    assert r[0].phi_digest == r[2].phi_digest == phi.digest()
    assert all(x.support_ok(phi.draws) for x in r)
    indep = sensitivity_run(phi, [s, s], H, 4, crn=False)
    assert not np.array_equal(indep[0].p, indep[1].p)


def test_sensitivity_provenance_checks():
    phi = _phi()
    H = np.ones((phi.J, 2))
    with pytest.raises(ProvenanceError):
        sensitivity_run(phi, [_spec()], H, 0, expected_digest='0' * 64)
    forged = PhiDraws(phi.grid + 1, phi.draws, phi.provenance)
    with pytest.raises(ProvenanceError):
        sensitivity_run(forged, [_spec()], H, 0)
    with pytest.raises(ValueError, match='rows'):
        sensitivity_run(phi, [_spec()], np.ones((phi.J + 1, 2)), 0)


def test_spec_result_write(tmp_path):
    phi = _phi()
    H = np.column_stack([np.ones(phi.J), np.linspace(0, 1, phi.J)])
    (res,) = sensitivity_run(phi, [_spec()], H, 1)
    paths = res.write(tmp_path, 'binary')
    assert paths['p_draws'].read_bytes()[:4] == b'PDRW'
    rows = np.genfromtxt(paths['summary'], delimiter=',', names=True)
    assert rows.dtype.names == ('point_index', 'q05', 'q50', 'q95')
    assert np.all(rows['q05'] <= rows['q95'])
    csv_paths = res.write(tmp_path / 'csv', 'csv')
    assert csv_paths['p_draws'].suffix == '.csv'


# ------------------------------------------------------------ summaries and checks

def test_prevalence_and_groups():
    p = np.array([[0.1, 0.3, 0.5, 0.7], [0.2, 0.2, 0.2, 0.2]])
    s = prevalence(p, groups=np.array(['a', 'b', 'a', 'b']))
    assert np.allclose(s.alpha, [0.4, 0.2])
    assert np.allclose(s.alpha_count, [1.6, 0.8])
    assert np.allclose(s.groups['a'], [0.3, 0.2])
    with pytest.raises(KeyError):
        prevalence(p, groups=np.array(['a', 'b', 'a', 'b']), labels=['z'])


def test_model_check_residual():
    phi = np.array([[0.1, 0.35], [0.1, 0.35]])
    s = _spec(sigma=0.0, c0=0.4, beta=(special.ndtri(0.5), 0.0))
    H = np.ones((2, 2))
    # bound Phi^-1(phi / 0.4): 0.25 is below theta = 0.5, 0.875 is above
    assert np.array_equal(model_check_residual(phi, s, H), [0.0, 1.0])
    r = model_check_residual(phi, s.with_(sigma=0.3), H)
    assert 0 < r[0] < 0.5 < r[1] < 1


def test_theta_without_binding_bound_is_pushed_forward_normal():
    u = (np.arange(20000) + 0.5) / 20000
    th = theta_from_mean(1e-300, 1.0, 0.3, 0.25, 'probit', u)
    ks = stats.kstest(special.ndtri(th), stats.norm(0.3, 0.25).cdf)
    assert ks.pvalue > 0.01


def test_theta_upper_tail_and_pinned_bound():
    th = theta_from_mean(0.25, 0.5, special.ndtri(0.5), 10.0, 'probit', 0.99)
    assert th > 0.999
    # phi / c rounding to one leaves theta = 1 as the only admissible value
    assert theta_from_mean(0.3, 0.3, 0.0, 0.25, 'probit', 0.5) == 1.0
