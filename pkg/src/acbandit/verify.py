"""Runtime checks of the analysis' inequalities and distributional claims.

Statistical checks accept an empirical failure rate up to the nominal level
plus a three-sigma binomial margin.  The determinant and potential checks are
deterministic inequalities and carry only a 1e-9 float slack.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import seeding
from .ensemble import Mode, Oracle, rerandomize, warm_start
from .errors import InvalidArgument
from .linalg import elliptical_norms, init_covariance, rank_one_update
from .theory import confidence_width, gaussian_max_bounds, lazy_growth_factor

SLACK = 1e-9
LOG_2E = math.log(2.0 * math.e)


@dataclass
class CheckReport:
    name: str
    trials: int
    observed: dict
    thresholds: dict
    passed: bool
    seed: int = 0
    params: dict = field(default_factory=dict)

    def to_json(self):
        def clean(v):
            if isinstance(v, (np.floating, np.integer)):
                v = v.item()
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v
        d = asdict(self)
        for key in ("observed", "thresholds", "params"):
            d[key] = {k: clean(v) for k, v in d[key].items()}
        d["passed"] = bool(d["passed"])
        return json.dumps(d, sort_keys=True)


def binomial_margin(delta, trials):
    return delta + 3.0 * math.sqrt(delta * (1.0 - delta) / trials)


def check_gaussian_max(m, delta, trials=100_000, seed=0):
    """Failure rates of both max-of-Gaussians thresholds against ``delta``."""
    lower, upper = gaussian_max_bounds(m, delta)
    rng = seeding.substream(seed, seeding.CHECK, 1, int(m))
    z = np.empty(trials)
    chunk = max(1, 2_000_000 // int(m))
    for s in range(0, trials, chunk):
        e = min(trials, s + chunk)
        z[s:e] = np.max(np.abs(rng.standard_normal((e - s, int(m)))), axis=1)
    fail_lo = float(np.mean(z < lower))
    fail_hi = float(np.mean(z > upper))
    limit = binomial_margin(delta, trials)
    return CheckReport(
        "gaussian_max", trials,
        {"lower_failure_rate": fail_lo, "upper_failure_rate": fail_hi},
        {"lower": lower, "upper": upper, "max_failure_rate": limit},
        fail_lo <= limit and fail_hi <= limit, seed, {"m": int(m), "delta": delta})


def check_ensemble_law(d, lam, history_length, trials=10_000, seed=0, tol=0.05, fast=False,
                       queries=10):
    """Re-randomize a single-regressor ensemble ``trials`` times over a fixed history.

    For each query ``x`` the sample variance of ``<w, x>`` must be within
    ``tol`` (relative) of ``|x|^2_{sigma^{-1}}``, and the empirical covariance
    of ``w`` within ``tol`` relative Frobenius error of ``sigma^{-1}``.
    """
    rng = seeding.substream(seed, seeding.CHECK, 2)
    cov = init_covariance(d, lam)
    ens = warm_start(d, lam, 1, Mode.RERANDOMIZED, Oracle.EXACT, seed=seed, fast_rerandomize=fast)
    for x in rng.standard_normal((history_length, d)):
        rank_one_update(cov, x)
        ens.push_history(x)
    draws = np.empty((trials, d))
    for i in range(trials):
        rerandomize(ens, cov)
        draws[i] = ens.weights[0]
    X = rng.standard_normal((queries, d))
    target = elliptical_norms(cov, X) ** 2
    proj = draws @ X.T
    var = proj.var(axis=0, ddof=1)
    rel = np.abs(var / target - 1.0)
    emp = np.cov(draws, rowvar=False).reshape(d, d)
    frob = float(np.linalg.norm(emp - cov.sigma_inv) / np.linalg.norm(cov.sigma_inv))
    # the zero query has exactly zero projection variance
    zero_var = float(np.var(draws @ np.zeros(d)))
    passed = bool(np.all(rel <= tol)) and frob <= tol and zero_var == 0.0
    return CheckReport(
        "ensemble_law", trials,
        {"max_variance_rel_error": float(rel.max()), "covariance_frobenius_rel_error": frob,
         "zero_query_variance": zero_var},
        {"variance_rel_tol": tol, "frobenius_rel_tol": tol},
        passed, seed, {"d": d, "lam": lam, "history_length": history_length, "fast": fast})


def check_elliptical_potential(run, lam=None, d=None):
    """``sum_t |x_t|^2`` in the covariance including ``x_t`` against ``2 log(det / lam^d)``."""
    lam = run.lam if lam is None else lam
    d = run.d if d is None else d
    g = np.asarray(run.gains, dtype=float)
    lhs = float(np.sum(g / (1.0 + g)))
    rhs = 2.0 * (float(run.log_det[-1]) - d * math.log(lam))
    return CheckReport(
        "elliptical_potential", 1, {"potential_sum": lhs, "rounds": int(len(g))},
        {"twice_log_det_ratio": rhs}, lhs <= rhs + SLACK, 0, {"lam": lam, "d": d})


def check_lazy_determinants(run, delta=0.05):
    """Determinant ratios of a lazy run against ``2e`` and the per-interval growth bound.

    At every round ``t`` with last anchor ``tau``, ``det(S_t)/det(S_tau) <= 2e``,
    where ``S_t`` holds the rows of rounds before ``t``.  Between consecutive
    anchors the ratio must reach the growth factor.
    """
    if run.kind != "acb_lazy":
        raise InvalidArgument(f"determinant check needs an acb_lazy run, got {run.kind}")
    anchors = np.asarray(run.anchors, dtype=np.int64)
    n = len(run.actions)
    ld = np.asarray(run.log_det, dtype=float)
    growth = lazy_growth_factor(run.a_count, max(run.horizon, 1), delta)
    worst_within = 0.0
    worst_growth = math.inf
    if n:
        if len(anchors) == 0 or anchors[0] != 0:
            raise InvalidArgument("lazy run must anchor at its first round")
        last = anchors[np.searchsorted(anchors, np.arange(n), side="right") - 1]
        worst_within = float(np.max(ld[:n] - ld[last]))
        if len(anchors) > 1:
            worst_growth = float(np.min(ld[anchors[1:]] - ld[anchors[:-1]]))
    ok_within = worst_within <= LOG_2E + SLACK
    ok_growth = worst_growth >= math.log(growth) - SLACK
    return CheckReport(
        "lazy_determinants", 1,
        {"max_within_ratio": math.exp(worst_within),
         "min_interval_growth": math.exp(worst_growth) if math.isfinite(worst_growth) else math.inf,
         "anchors": int(len(anchors))},
        {"within_ratio_max": 2.0 * math.e, "interval_growth_min": growth},
        ok_within and ok_growth, 0, {"delta": delta})


def check_rerandomize_count(run, p, lam=None):
    """``(1 + pi log 2 / (16 log(2AT/delta)))^(k/2) <= (1 + TB/(lam d))^d`` for ``k`` redraws."""
    lam = run.lam if lam is None else lam
    k = int(run.rerandomize_count)
    base = 1.0 + math.pi * math.log(2.0) / (16.0 * math.log(2.0 * p.a_count * p.t_horizon / p.delta))
    lhs = 0.5 * k * math.log(base)
    rhs = p.d * math.log1p(p.t_horizon * p.b_bound / (lam * p.d))
    return CheckReport(
        "rerandomize_count", 1, {"rerandomize_count": k, "log_lhs": lhs},
        {"log_rhs": rhs, "max_count": math.floor(2.0 * rhs / math.log(base))},
        lhs <= rhs + SLACK, 0, {"lam": lam, **p.to_dict()})


def check_confidence_width(p, trials=1000, seed=0, lam=None, a_count=None):
    """Empirical failure rate of the self-normalized confidence width.

    Each trial draws ``theta*`` with norm ``W``, ``A`` fixed unit actions, and
    plays uniformly random actions for ``T`` rounds; it fails when some
    action violates ``<a, theta* - theta_hat> <= beta_T |a|_{sigma^{-1}}``
    with ``delta_T = delta / T``.
    """
    if lam is None:
        lam = p.lam
    if not lam > 0:
        raise InvalidArgument("confidence check needs lam > 0 (pass lam when sigma_noise is 0)")
    d, T = p.d, p.t_horizon
    A = p.a_count if a_count is None else a_count
    failures = 0
    worst = -math.inf
    for i in range(trials):
        rng = seeding.substream(seed, seeding.CHECK, 3, i)
        g = rng.standard_normal(d)
        theta = p.w_bound * g / np.linalg.norm(g)
        acts = rng.standard_normal((A, d))
        acts /= np.linalg.norm(acts, axis=1, keepdims=True)
        picks = rng.integers(A, size=T)
        X = acts[picks]
        y = X @ theta + p.sigma_noise * rng.standard_normal(T)
        cov = init_covariance(d, lam)
        for x in X:
            rank_one_update(cov, x)
        theta_hat = cov.sigma_inv @ (X.T @ y)
        beta = confidence_width(lam, float(np.linalg.norm(theta)), p.sigma_noise, cov.log_det, d,
                                p.delta / T)
        gap = acts @ (theta - theta_hat) - beta * elliptical_norms(cov, acts)
        worst = max(worst, float(gap.max()))
        failures += bool(np.any(gap > SLACK))
    rate = failures / trials
    limit = binomial_margin(p.delta, trials)
    return CheckReport(
        "confidence_width", trials, {"failure_rate": rate, "max_violation": worst},
        {"max_failure_rate": limit}, rate <= limit, seed, {"lam": lam, **p.to_dict()})


def lazy_suite(n_runs=20, horizon=5000, seed=0, delta=0.05):
    """Lazy runs over a mix of fixed-action environments with random settings.

    Yields ``(description, run)`` pairs.  Ensemble sizes follow the lazy
    theory value for each environment.
    """
    from .env import make_figure2_mab, make_linear_env
    from .harness import run_episode
    from .policies import PolicyConfig, make_policy
    from .theory import theory_ensemble_size

    shapes = [("figure2", 50, 50), ("linear", 5, 20), ("linear", 10, 30), ("linear", 3, 8)]
    for i in range(n_runs):
        rng = seeding.substream(seed, seeding.CHECK, 4, i)
        kind, d, A = shapes[i % len(shapes)]
        env_seed = int(rng.integers(2 ** 32))
        if kind == "figure2":
            env = make_figure2_mab(env_seed, horizon)
        else:
            g = rng.standard_normal(d)
            theta = g / np.linalg.norm(g)
            env = make_linear_env(d, A, theta, float(rng.choice([0.05, 0.1, 0.5])), "fixed",
                                  seed=env_seed, horizon=horizon)
        beta = float(rng.choice([0.05, 0.1, 0.5, 1.0]))
        lam = float(rng.choice([0.01, 0.1, 1.0]))
        m = theory_ensemble_size(horizon, delta, "lazy", A)
        cfg = PolicyConfig(kind="acb_lazy", beta=beta, lam=lam, m=m, seed=int(rng.integers(2 ** 32)))
        desc = {"env": kind, "d": d, "a_count": A, "beta": beta, "lam": lam, "m": m}
        yield desc, run_episode(env, make_policy(cfg, d), horizon)


def default_suite(quick=False, seed=0):
    """Every check at its standard size; ``quick`` shrinks trial counts."""
    from .env import make_figure2_mab
    from .harness import run_episode
    from .policies import PolicyConfig, make_policy
    from .theory import TheoryParams, theory_ensemble_size

    g_trials = 20_000 if quick else 100_000
    for m in (8, 64, 256):
        for delta in (0.01, 0.1):
            yield check_gaussian_max(m, delta, g_trials, seed)
    for d in (2, 5, 10):
        yield check_ensemble_law(d, 1.0, 100, 10_000, seed)
    p = TheoryParams(200, 5, 10, 1.0, 1.0, 0.1, 0.05)
    yield check_confidence_width(p, 200 if quick else 1000, seed)
    for desc, run in lazy_suite(4 if quick else 20, 1000 if quick else 5000, seed):
        for rep in (check_elliptical_potential(run), check_lazy_determinants(run)):
            rep.params.update(desc)
            yield rep
    T = 2000 if quick else 10_000
    env = make_figure2_mab(seed, T)
    m = theory_ensemble_size(T, 0.05, "lazy", env.a_count)
    run = run_episode(env, make_policy(PolicyConfig(kind="acb_lazy", beta=0.1, lam=0.01, m=m,
                                                    seed=seed), env.d), T)
    p = TheoryParams(T, env.d, env.a_count, 1.0, float(np.linalg.norm(env.theta_star)), 0.1, 0.05)
    yield check_rerandomize_count(run, p)
