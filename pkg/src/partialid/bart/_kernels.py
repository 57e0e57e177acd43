"""Compiled inner loops of the probit sum-of-trees sampler.

Trees live in fixed-capacity node arrays of shape ``(L, cap)``; node 0 is the
root, ``left == -1`` marks a leaf and ``alive`` marks allocated slots.
Covariates are pre-binned: ``xbin[i, v]`` counts the cutpoints of variable
``v`` that are <= ``x[i, v]``, so the rule "x_v < cut_v[c]" is ``xbin <= c``.

All randomness is passed in as pre-drawn uniforms and normals so the kernels
are deterministic functions of their inputs.
"""

import numba as nb
import numpy as np

GROW, PRUNE, CHANGE = 0, 1, 2
P_GROW, P_PRUNE = 0.25, 0.25


@nb.njit(cache=True)
def split_prob(alpha, beta, depth):
    return alpha * (1.0 + depth) ** (-beta)


@nb.njit(cache=True)
def _log(x):
    if x <= 0.0:
        return -np.inf
    return np.log(x)


@nb.njit(cache=True)
def leaf_loglik(n, s, tau2):
    """Log marginal likelihood of one leaf, mu integrated out, up to a constant."""
    d = 1.0 + n * tau2
    return -0.5 * np.log(d) + 0.5 * tau2 * s * s / d


@nb.njit(cache=True)
def grow_prior_term(alpha, beta, d):
    return (_log(split_prob(alpha, beta, d))
            + 2.0 * _log(1.0 - split_prob(alpha, beta, d + 1))
            - _log(1.0 - split_prob(alpha, beta, d)))


@nb.njit(cache=True)
def grow_log_ratio(n_leaves, n_nog_after, d, alpha, beta, root_only, dloglik):
    """MH log ratio for growing a leaf at depth ``d``.

    ``n_leaves`` counts leaves before the move, ``n_nog_after`` counts nodes
    with two leaf children after it. A single-leaf tree proposes GROW with
    probability one.
    """
    p_grow = 1.0 if root_only else P_GROW
    return (np.log(P_PRUNE / p_grow) + np.log(n_leaves / n_nog_after)
            + grow_prior_term(alpha, beta, d) + dloglik)


@nb.njit(cache=True)
def prune_log_ratio(n_nog, n_leaves_after, d, alpha, beta, root_only_after, dloglik):
    p_grow_after = 1.0 if root_only_after else P_GROW
    return (np.log(p_grow_after / P_PRUNE) + np.log(n_nog / n_leaves_after)
            - grow_prior_term(alpha, beta, d) + dloglik)


@nb.njit(cache=True)
def _count(left, right, alive, l):
    """Return (leaves, internal, nog) counts for tree ``l``."""
    cap = left.shape[1]
    nl = 0
    ni = 0
    ng = 0
    for j in range(cap):
        if not alive[l, j]:
            continue
        if left[l, j] < 0:
            nl += 1
        else:
            ni += 1
            if left[l, left[l, j]] < 0 and left[l, right[l, j]] < 0:
                ng += 1
    return nl, ni, ng


@nb.njit(cache=True)
def _nth(left, right, alive, l, kind, k):
    # kind 0: leaf, 1: internal, 2: nog
    cap = left.shape[1]
    c = 0
    for j in range(cap):
        if not alive[l, j]:
            continue
        if kind == 0:
            ok = left[l, j] < 0
        elif kind == 1:
            ok = left[l, j] >= 0
        else:
            ok = left[l, j] >= 0 and left[l, left[l, j]] < 0 and left[l, right[l, j]] < 0
        if ok:
            if c == k:
                return j
            c += 1
    return -1


@nb.njit(cache=True)
def _free_slots(alive, l):
    cap = alive.shape[1]
    a = -1
    for j in range(1, cap):
        if not alive[l, j]:
            if a < 0:
                a = j
            else:
                return a, j
    return -1, -1


@nb.njit(cache=True)
def _route(xrow, var, cut, left, right, l, start):
    node = start
    while left[l, node] >= 0:
        if xrow[var[l, node]] <= cut[l, node]:
            node = left[l, node]
        else:
            node = right[l, node]
    return node


@nb.njit(cache=True)
def _in_subtree(node, top, parent, depth, l):
    dt = depth[l, top]
    while depth[l, node] > dt:
        node = parent[l, node]
    return node == top


@nb.njit(cache=True)
def sweep(xbin, ncut, avail, target, var, cut, left, right, parent, depth, mu,
          alive, leaf_of, unif, normals, alpha, beta, tau, prior_only, counters):
    """One backfitting pass over all trees; returns the summed tree fit.

    ``unif`` has shape (L, 5): move type, node choice, variable, cutpoint,
    acceptance. ``normals`` has shape (L, max_leaves). ``counters`` is a
    length-6 int array of (proposed, accepted) pairs for GROW/PRUNE/CHANGE.
    """
    L, cap = var.shape
    n = xbin.shape[0]
    tau2 = tau * tau
    n_avail = avail.shape[0]

    total = np.zeros(n)
    for l in range(L):
        for i in range(n):
            total[i] += mu[l, leaf_of[l, i]]

    resid = np.empty(n)
    cnt = np.zeros(cap)
    sm = np.zeros(cap)
    cnt2 = np.zeros(cap)
    sm2 = np.zeros(cap)
    newleaf = np.empty(n, np.int32)
    insub = np.zeros(n, np.bool_)

    for l in range(L):
        for i in range(n):
            total[i] -= mu[l, leaf_of[l, i]]
            resid[i] = target[i] - total[i]

        n_leaves, n_int, n_nog = _count(left, right, alive, l)
        u = unif[l]
        if n_int == 0 or u[0] < P_GROW:
            move = GROW
        elif u[0] < P_GROW + P_PRUNE:
            move = PRUNE
        else:
            move = CHANGE
        counters[2 * move] += 1

        if move == GROW:
            eta = _nth(left, right, alive, l, 0, int(u[1] * n_leaves))
            s1, s2 = _free_slots(alive, l)
            if n_avail > 0 and s1 >= 0:
                v = avail[int(u[2] * n_avail)]
                c = int(u[3] * ncut[v])
                nL = 0.0
                sL = 0.0
                nR = 0.0
                sR = 0.0
                for i in range(n):
                    if leaf_of[l, i] == eta:
                        if xbin[i, v] <= c:
                            nL += 1.0
                            sL += resid[i]
                        else:
                            nR += 1.0
                            sR += resid[i]
                if nL > 0 and nR > 0:
                    if prior_only:
                        dll = 0.0
                    else:
                        dll = (leaf_loglik(nL, sL, tau2) + leaf_loglik(nR, sR, tau2)
                               - leaf_loglik(nL + nR, sL + sR, tau2))
                    par = parent[l, eta]
                    n_nog_after = n_nog + 1
                    if par >= 0:
                        sib = right[l, par] if left[l, par] == eta else left[l, par]
                        if left[l, sib] < 0:
                            n_nog_after = n_nog
                    lr = grow_log_ratio(n_leaves, n_nog_after, depth[l, eta], alpha,
                                        beta, n_int == 0, dll)
                    if np.log(u[4]) < lr:
                        counters[1] += 1
                        var[l, eta] = v
                        cut[l, eta] = c
                        left[l, eta] = s1
                        right[l, eta] = s2
                        for s in (s1, s2):
                            alive[l, s] = True
                            left[l, s] = -1
                            right[l, s] = -1
                            var[l, s] = -1
                            cut[l, s] = -1
                            parent[l, s] = eta
                            depth[l, s] = depth[l, eta] + 1
                            mu[l, s] = 0.0
                        for i in range(n):
                            if leaf_of[l, i] == eta:
                                leaf_of[l, i] = s1 if xbin[i, v] <= c else s2

        elif move == PRUNE:
            nu = _nth(left, right, alive, l, 2, int(u[1] * n_nog))
            lc = left[l, nu]
            rc = right[l, nu]
            nL = 0.0
            sL = 0.0
            nR = 0.0
            sR = 0.0
            for i in range(n):
                if leaf_of[l, i] == lc:
                    nL += 1.0
                    sL += resid[i]
                elif leaf_of[l, i] == rc:
                    nR += 1.0
                    sR += resid[i]
            if prior_only:
                dll = 0.0
            else:
                dll = (leaf_loglik(nL + nR, sL + sR, tau2)
                       - leaf_loglik(nL, sL, tau2) - leaf_loglik(nR, sR, tau2))
            lr = prune_log_ratio(n_nog, n_leaves - 1, depth[l, nu], alpha, beta,
                                 nu == 0, dll)
            if np.log(u[4]) < lr:
                counters[3] += 1
                for i in range(n):
                    if leaf_of[l, i] == lc or leaf_of[l, i] == rc:
                        leaf_of[l, i] = nu
                for s in (lc, rc):
                    alive[l, s] = False
                    left[l, s] = -1
                    right[l, s] = -1
                left[l, nu] = -1
                right[l, nu] = -1
                var[l, nu] = -1
                cut[l, nu] = -1

        else:
            nu = _nth(left, right, alive, l, 1, int(u[1] * n_int))
            v = avail[int(u[2] * n_avail)]
            c = int(u[3] * ncut[v])
            if v == var[l, nu] and c == cut[l, nu]:
                counters[5] += 1
            else:
                for j in range(cap):
                    cnt[j] = 0.0
                    sm[j] = 0.0
                    cnt2[j] = 0.0
                    sm2[j] = 0.0
                old_v = var[l, nu]
                old_c = cut[l, nu]
                var[l, nu] = v
                cut[l, nu] = c
                for i in range(n):
                    lf = leaf_of[l, i]
                    if _in_subtree(lf, nu, parent, depth, l):
                        insub[i] = True
                        nl_ = _route(xbin[i], var, cut, left, right, l, nu)
                        newleaf[i] = nl_
                        cnt[lf] += 1.0
                        sm[lf] += resid[i]
                        cnt2[nl_] += 1.0
                        sm2[nl_] += resid[i]
                    else:
                        insub[i] = False
                var[l, nu] = old_v
                cut[l, nu] = old_c
                ok = True
                dll = 0.0
                for j in range(cap):
                    if alive[l, j] and left[l, j] < 0 and _in_subtree(j, nu, parent, depth, l):
                        if cnt2[j] == 0.0:
                            ok = False
                            break
                        if not prior_only:
                            dll += (leaf_loglik(cnt2[j], sm2[j], tau2)
                                    - leaf_loglik(cnt[j], sm[j], tau2))
                if ok and np.log(u[4]) < dll:
                    counters[5] += 1
                    var[l, nu] = v
                    cut[l, nu] = c
                    for i in range(n):
                        if insub[i]:
                            leaf_of[l, i] = newleaf[i]

        # conjugate leaf update
        for j in range(cap):
            cnt[j] = 0.0
            sm[j] = 0.0
        if not prior_only:
            for i in range(n):
                cnt[leaf_of[l, i]] += 1.0
                sm[leaf_of[l, i]] += resid[i]
        k = 0
        for j in range(cap):
            if alive[l, j] and left[l, j] < 0:
                pv = tau2 / (1.0 + cnt[j] * tau2)
                mu[l, j] = sm[j] * pv + np.sqrt(pv) * normals[l, k]
                k += 1

        for i in range(n):
            total[i] += mu[l, leaf_of[l, i]]
    return total


@nb.njit(cache=True)
def predict(xbin, var, cut, left, right, mu):
    """Sum of tree outputs at each row of ``xbin`` (offset excluded)."""
    L = var.shape[0]
    m = xbin.shape[0]
    out = np.zeros(m)
    for l in range(L):
        for i in range(m):
            out[i] += mu[l, _route(xbin[i], var, cut, left, right, l, 0)]
    return out
