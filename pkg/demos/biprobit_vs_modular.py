"""When does a fully parametric model beat the modular approach?

Both designs hide a binary outcome Z behind a detection step W and only show
Y = Z W. The bivariate probit models (Z, W) jointly and is point identified
through exclusion restrictions; the modular approach fits Pr(Y=1 | x) with
BART and treats detection through a prior centred at the true detection
probability. Under the linear design the parametric model is correct and
wins; under the sine design it is misspecified and the modular estimate of
Pr(Z=1 | x) is closer to the truth.

Run from the repository root::

    python3 demos/biprobit_vs_modular.py [n]
"""

import sys

import numpy as np

from partialid.bart import BartConfig, fit_probit_bart
from partialid.biprobit import PAPER_PARAMS, SimDesign, evaluate_comparison, gibbs_fit, simulate
from partialid.dist import gaussian_quantile
from partialid.modular import stage2_uniforms, theta_from_mean

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1000

for kind in ('linear', 'sine'):
    X, Y, truth = simulate(SimDesign(kind, n), PAPER_PARAMS, seed=0)
    bp = gibbs_fit(X, Y, n_iter=3000, n_burn=500, seed=0)
    phi = fit_probit_bart(X, Y, X, BartConfig(n_burn=300, n_keep=500, seed=0))
    U = stage2_uniforms(0, phi.K, phi.J)
    mean = gaussian_quantile(truth['theta_true'])[None, :]
    theta = theta_from_mean(phi.draws, 1.0, mean, 0.1, 'probit', U[:, 1:])
    keep = np.linspace(0, len(bp.rho) - 1, phi.K).round().astype(int)
    cmp = evaluate_comparison(truth['p_true'], {'modular': phi.draws / theta,
                                                'biprobit': bp.p_draws(X)[keep]})
    print(f'\n{kind} design, n={n}, rho acceptance {bp.accept_rate:.2f}')
    names, M = bp.free_parameters()
    print('  biprobit posterior means: ' +
          ', '.join(f'{a}={m:.2f}' for a, m in zip(names, M.mean(0))))
    print('  RMSE of Pr(Z=1|x) on the probit scale and 90% coverage:')
    for m in ('modular', 'biprobit'):
        print(f'    {m:<9} {cmp.rmse[m]:.3f}   {cmp.coverage[m]:.2f}')
