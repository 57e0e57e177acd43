"""Bayesian inference for partially identified binary regression.

Stage 1 fits probit BART to the identified probability ``phi(x)``; stage 2
replays truncated priors for the unidentified part against stored draws of
``phi``. Submodules: :mod:`dist`, :mod:`bart`, :mod:`modular`,
:mod:`biprobit`, :mod:`strata` and :mod:`cli`.
"""

__version__ = '0.1.0'

from .draws import PhiDraws, Provenance, ProvenanceError  # noqa: E402

__all__ = ['PhiDraws', 'Provenance', 'ProvenanceError', '__version__']
