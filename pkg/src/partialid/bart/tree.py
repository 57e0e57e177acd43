"""Regression trees and tree ensembles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ['SplitRule', 'RegTree', 'TreeEnsemble', 'tree_log_prior', 'evaluate_ensemble']


@dataclass(frozen=True)
class SplitRule:
    """Send ``x`` left when ``x[var_index] < cutpoints[var_index][cut_index]``."""

    var_index: int
    cut_index: int


@dataclass
class RegTree:
    """A binary tree stored as parallel node arrays, root at index 0.

    ``left[j] == -1`` marks node ``j`` as a leaf, in which case ``mu[j]`` is
    its output. Build small trees by hand with :meth:`leaf` and :meth:`split`.
    """

    var: np.ndarray
    cut: np.ndarray
    left: np.ndarray
    right: np.ndarray
    mu: np.ndarray
    depth: np.ndarray

    @classmethod
    def leaf(cls, mu: float = 0.0) -> RegTree:
        return cls(np.array([-1]), np.array([-1]), np.array([-1]), np.array([-1]),
                   np.array([float(mu)]), np.array([0]))

    @classmethod
    def split(cls, rule: SplitRule, left: RegTree, right: RegTree) -> RegTree:
        nl = left.size
        off_l, off_r = 1, 1 + nl

        def shift(a, off):
            return np.where(a >= 0, a + off, -1)

        return cls(
            var=np.concatenate([[rule.var_index], left.var, right.var]),
            cut=np.concatenate([[rule.cut_index], left.cut, right.cut]),
            left=np.concatenate([[off_l], shift(left.left, off_l), shift(right.left, off_r)]),
            right=np.concatenate([[off_r], shift(left.right, off_l), shift(right.right, off_r)]),
            mu=np.concatenate([[0.0], left.mu, right.mu]),
            depth=np.concatenate([[0], left.depth + 1, right.depth + 1]),
        )

    @property
    def size(self) -> int:
        return len(self.var)

    def is_leaf(self, j: int) -> bool:
        return self.left[j] < 0

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.left < 0)

    def internal(self) -> np.ndarray:
        return np.flatnonzero(self.left >= 0)

    def rule(self, j: int) -> SplitRule:
        if self.is_leaf(j):
            raise ValueError(f'node {j} is a leaf')
        return SplitRule(int(self.var[j]), int(self.cut[j]))

    def route(self, x, cutpoints) -> int:
        """Index of the leaf containing the raw covariate vector ``x``."""
        j = 0
        while self.left[j] >= 0:
            v = self.var[j]
            j = self.left[j] if x[v] < cutpoints[v][self.cut[j]] else self.right[j]
        return int(j)

    def __call__(self, x, cutpoints) -> float:
        return float(self.mu[self.route(x, cutpoints)])


@dataclass
class TreeEnsemble:
    """Sum of trees plus a fixed probit offset, on the latent scale."""

    trees: list
    probit_offset: float = 0.0
    cutpoints: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.trees) < 1:
            raise ValueError('an ensemble needs at least one tree')

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return self.probit_offset + sum(t(x, self.cutpoints) for t in self.trees)


def evaluate_ensemble(ens: TreeEnsemble, x) -> float:
    return ens.evaluate(x)


def tree_log_prior(tree: RegTree, alpha_split: float, beta_split: float) -> float:
    """Log prior probability of the tree shape (split rules excluded).

    Internal nodes at depth ``d`` contribute ``log alpha (1+d)^-beta``;
    leaves contribute ``log(1 - alpha (1+d)^-beta)``.
    """
    p = alpha_split * (1.0 + tree.depth.astype(float)) ** (-beta_split)
    leaf = tree.left < 0
    with np.errstate(divide='ignore'):
        return float(np.sum(np.log(p[~leaf])) + np.sum(np.log1p(-p[leaf])))
