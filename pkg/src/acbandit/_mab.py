"""Compiled fast path for multi-armed bandits with standard-basis arms.

With ``x_a = e_a`` every matrix the dense path touches stays diagonal, so a
round costs O(A M) instead of O(A M d).  The kernel repeats the dense path's
floating-point operations in the same order (Sherman-Morrison on the diagonal,
periodic refresh, ``moments @ sigma_inv``, the Polyak tail window), which makes
its traces bit-identical to the generic loop; the test suite checks this.

Covered: LinUCB, Greedy, Uniform and incremental ACB with either oracle, run
from a freshly constructed policy.
"""

import math
from collections import deque

import numpy as np
from numba import njit

from .ensemble import Mode, Oracle
from .linalg import REFRESH_EVERY
from .policies import Kind

K_LINUCB, K_GREEDY, K_UNIFORM, K_ACB_EXACT, K_ACB_SGD = range(5)


def supports(env, policy):
    if not (env.is_identity and policy.fresh):
        return False
    if policy.kind in (Kind.LINUCB, Kind.GREEDY, Kind.UNIFORM):
        return True
    return policy.kind is Kind.ACB_INCREMENTAL


@njit(cache=True)
def _log_det_diag(sig):
    acc = 0.0
    for i in range(sig.shape[0]):
        acc += math.log(abs(sig[i]))
    return acc


@njit(cache=True)
def _kernel(code, T, mu, sigma_noise, z, lam, beta, sig, s, log_det, count, rm, theta,
            W, mom, lr, frac, targets, uniforms, step_a, step_r, lag, win_sum, polyak,
            actions, rewards, regret, bonus_trace, log_det_trace, gains):
    A = mu.shape[0]
    M = W.shape[1]
    best = mu.max()
    maxabs = np.empty(A)
    if code == K_ACB_EXACT or code == K_ACB_SGD:
        for k in range(A):
            mx = 0.0
            for j in range(M):
                v = abs(W[k, j])
                if v > mx or j == 0:
                    mx = v
            maxabs[k] = mx
    n_iter = 0
    win_lo = 1
    lag_index = 0
    step_head = 0
    failed = -1
    started = 0  # rounds whose update began, including one that diverged mid-update
    for t in range(T):
        log_det_trace[t] = log_det
        # select
        if code == K_UNIFORM:
            a = int(uniforms[t] * A)
            b_a = 0.0
        else:
            a = 0
            b_a = 0.0
            best_score = -np.inf
            for k in range(A):
                if code == K_LINUCB:
                    bk = beta * math.sqrt(max(s[k], 0.0))
                elif code == K_GREEDY:
                    bk = 0.0
                else:
                    bk = beta * maxabs[k]
                sc = theta[k] + bk
                if not math.isfinite(sc):
                    failed = t
                    break
                if sc > best_score:
                    best_score = sc
                    a = k
                    b_a = bk
            if failed >= 0:
                break
        r = mu[a] + sigma_noise * z[t]
        actions[t] = a
        rewards[t] = r
        regret[t] = best - mu[a]
        bonus_trace[t] = b_a
        started += 1
        # covariance
        u = s[a]
        gains[t] = u
        s[a] = s[a] - (u * u) / (1.0 + u)
        sig[a] = sig[a] + 1.0
        log_det = log_det + math.log1p(u)
        count += 1
        refreshed = False
        if count % REFRESH_EVERY == 0:
            log_det = _log_det_diag(sig)
            for k in range(A):
                s[k] = 1.0 / sig[k]
            refreshed = True
        rm[a] = rm[a] + r
        if refreshed:
            for k in range(A):
                theta[k] = s[k] * rm[k]
        else:
            theta[a] = s[a] * rm[a]
        # ensemble
        if code == K_ACB_EXACT:
            for j in range(M):
                mom[a, j] = mom[a, j] + targets[j, t]
            if refreshed or t == 0:
                lo_k, hi_k = 0, A
            else:
                lo_k, hi_k = a, a + 1
            for k in range(lo_k, hi_k):
                mx = 0.0
                for j in range(M):
                    W[k, j] = mom[k, j] * s[k]
                    v = abs(W[k, j])
                    if v > mx or j == 0:
                        mx = v
                maxabs[k] = mx
        elif code == K_ACB_SGD:
            for j in range(M):
                rj = W[a, j] - targets[j, t]
                step_r[t, j] = rj
                W[a, j] = W[a, j] - lr * rj
                if not math.isfinite(W[a, j]):
                    failed = t
            if failed >= 0:
                break
            step_a[t] = a
            n_iter += 1
            for k in range(A):
                for j in range(M):
                    win_sum[k, j] += W[k, j]
            lo = min(math.floor(frac * n_iter) + 1, n_iter)
            while win_lo < lo:
                while lag_index < win_lo:
                    ka = step_a[step_head]
                    for j in range(M):
                        lag[ka, j] = lag[ka, j] - lr * step_r[step_head, j]
                    step_head += 1
                    lag_index += 1
                for k in range(A):
                    for j in range(M):
                        win_sum[k, j] -= lag[k, j]
                win_lo += 1
            denom = float(n_iter - win_lo + 1)
            for k in range(A):
                mx = 0.0
                for j in range(M):
                    polyak[k, j] = win_sum[k, j] / denom
                    v = abs(polyak[k, j])
                    if v > mx or j == 0:
                        mx = v
                maxabs[k] = mx
    if failed < 0:
        log_det_trace[T] = log_det
    return failed, started, log_det, count, n_iter, win_lo, lag_index, step_head


def run(env, policy, T):
    """Run ``T`` rounds from round 0 and write the final state back to ``policy``.

    Returns ``(actions, rewards, regret, bonus, log_det_trace, gains, failed)``
    where ``failed`` is the round of a numeric failure or -1.
    """
    cfg = policy.config
    A = env.a_count
    ens = policy.ensemble
    if policy.kind is Kind.LINUCB:
        code = K_LINUCB
    elif policy.kind is Kind.GREEDY:
        code = K_GREEDY
    elif policy.kind is Kind.UNIFORM:
        code = K_UNIFORM
    elif ens.oracle is Oracle.EXACT:
        code = K_ACB_EXACT
    else:
        code = K_ACB_SGD
    cov = policy.cov
    mu = np.ascontiguousarray(env.means(0), dtype=float)
    z = env._noise.take(0, T)[0].copy()
    sig = np.diag(cov.sigma).copy()
    s = np.diag(cov.sigma_inv).copy()
    rm = policy.reward_moment.copy()
    theta = policy.theta_hat.copy()
    m = ens.m if ens is not None else 1
    if ens is not None:
        W = np.ascontiguousarray(ens.weights.T)
        mom = np.ascontiguousarray(ens.moments.T) if ens.moments is not None else np.zeros((A, m))
        targets = ens._targets.take(ens.record_count, ens.record_count + T)
        polyak = (np.ascontiguousarray(ens.polyak_weights.T) if ens.polyak_weights is not None
                  else np.zeros((A, m)))
        lag = np.ascontiguousarray(ens._lag.T)
        win_sum = np.ascontiguousarray(ens._win_sum.T)
        lr = ens.sgd.learning_rate
        frac = ens.sgd.polyak_start_fraction
    else:
        W = np.zeros((A, 1))
        mom = np.zeros((A, 1))
        targets = np.zeros((1, T))
        polyak = np.zeros((A, 1))
        lag = np.zeros((A, 1))
        win_sum = np.zeros((A, 1))
        lr = 0.0
        frac = 0.5
    uniforms = policy._uniform.random(T) if code == K_UNIFORM else np.zeros(T)
    sgd = code == K_ACB_SGD
    step_a = np.zeros(T if sgd else 1, dtype=np.int64)
    step_r = np.zeros((T if sgd else 1, m))
    actions = np.zeros(T, dtype=np.int64)
    rewards = np.zeros(T)
    regret = np.zeros(T)
    bonus = np.zeros(T)
    log_det_trace = np.zeros(T + 1)
    gains = np.zeros(T)
    failed, started, log_det, count, n_iter, win_lo, lag_index, step_head = _kernel(
        code, T, mu, env.sigma_noise, z, cov.lam, float(cfg.beta), sig, s, cov.log_det,
        cov.update_count, rm, theta, W, mom, lr, frac, targets, uniforms, step_a, step_r,
        lag, win_sum, polyak, actions, rewards, regret, bonus, log_det_trace, gains)
    n = T if failed < 0 else failed
    # write back
    cov.sigma = np.diag(sig)
    cov.sigma_inv = np.diag(s)
    cov.log_det = float(log_det)
    cov.update_count = int(count)
    if n > 0:
        cov.last_gain = float(gains[n - 1])
    policy.reward_moment = rm
    policy.theta_hat = theta
    policy.t += n
    if ens is not None:
        ens.weights = np.ascontiguousarray(W.T)
        ens.record_count += started
        if ens.moments is not None:
            ens.moments = np.ascontiguousarray(mom.T)
        if sgd:
            eye = np.eye(A)
            ens.polyak_weights = np.ascontiguousarray(polyak.T)
            ens._lag = np.ascontiguousarray(lag.T)
            ens._win_sum = np.ascontiguousarray(win_sum.T)
            ens._n_iter = int(n_iter)
            ens._win_lo = int(win_lo)
            ens._lag_index = int(lag_index)
            ens._steps = deque((eye[step_a[i]].copy(), step_r[i].copy())
                               for i in range(step_head, n))
    if ens is not None and ens.mode is not Mode.INCREMENTAL:
        raise AssertionError("fast path only covers incremental ensembles")
    return actions[:n], rewards[:n], regret[:n], bonus[:n], log_det_trace[:n + 1], gains[:n], failed
