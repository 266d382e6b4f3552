"""Bandit decision rules: LinUCB, the ACB variants, and two baselines.

Every policy keeps the ridge estimate ``theta_hat = sigma^{-1} sum_t x_t r_t``.
Scores are ``<x, theta_hat> + bonus(x)`` and ties go to the lowest index.

* ``linucb``           bonus ``beta * |x|_{sigma^{-1}}``
* ``acb_incremental``  ensemble bonus, one fresh target per new row
* ``acb_rerandomized`` ensemble bonus, all targets redrawn every round
* ``acb_lazy``         redraws and re-scores only at anchor rounds; the anchor
  action is then repeated ``ceil(gamma / bonus^2)`` times
* ``greedy``           no bonus
* ``uniform``          uniformly random action
"""

import math
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from . import ensemble as ens_mod
from . import seeding
from .ensemble import Mode, Oracle, SgdConfig
from .errors import InvalidArgument, NumericFailure
from .linalg import elliptical_norms, init_covariance, rank_one_update
from .theory import lazy_gamma

# omega used when the anchor bonus is zero: the anchor is never left
OMEGA_CAP = 2 ** 62


class Kind(str, Enum):
    LINUCB = "linucb"
    ACB_RERANDOMIZED = "acb_rerandomized"
    ACB_INCREMENTAL = "acb_incremental"
    ACB_LAZY = "acb_lazy"
    GREEDY = "greedy"
    UNIFORM = "uniform"


_MODES = {
    Kind.ACB_RERANDOMIZED: Mode.RERANDOMIZED,
    Kind.ACB_INCREMENTAL: Mode.INCREMENTAL,
    Kind.ACB_LAZY: Mode.LAZY,
}


@dataclass
class PolicyConfig:
    kind: str = Kind.ACB_INCREMENTAL.value
    beta: float = 1.0
    lam: float = 1.0
    m: int = 1
    oracle: str = Oracle.EXACT.value
    gamma: float = None
    seed: int = 0
    sgd: SgdConfig = field(default_factory=SgdConfig)
    fast_rerandomize: bool = False

    def validate(self):
        try:
            kind = Kind(self.kind)
            Oracle(self.oracle)
        except ValueError as exc:
            raise InvalidArgument(str(exc)) from None
        if not (math.isfinite(self.beta) and self.beta >= 0):
            raise InvalidArgument(f"beta must be nonnegative, got {self.beta}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise InvalidArgument(f"lam must be positive, got {self.lam}")
        if int(self.m) != self.m or self.m < 1:
            raise InvalidArgument(f"m must be a positive integer, got {self.m}")
        if self.gamma is not None:
            if kind is not Kind.ACB_LAZY:
                raise InvalidArgument("gamma only applies to acb_lazy")
            if not (math.isfinite(self.gamma) and self.gamma > 0):
                raise InvalidArgument(f"gamma must be positive, got {self.gamma}")
        if isinstance(self.sgd, dict):
            self.sgd = SgdConfig(**self.sgd)
        self.sgd.validate()
        if int(self.seed) != self.seed or self.seed < 0:
            raise InvalidArgument(f"seed must be a nonnegative integer, got {self.seed}")
        return self

    @property
    def effective_gamma(self):
        """Configured gamma, or ``beta^2 pi log 2 / 2`` when unset."""
        return lazy_gamma(self.beta) if self.gamma is None else self.gamma

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if "sgd" in data and isinstance(data["sgd"], dict):
            data["sgd"] = SgdConfig(**data["sgd"])
        return cls(**data).validate()


class Policy:
    """Mutable policy state for one run; build with :func:`make_policy`."""

    def __init__(self, config, d):
        self.config = config.validate()
        self.kind = Kind(config.kind)
        self.d = int(d)
        self.cov = init_covariance(self.d, config.lam)
        self.reward_moment = np.zeros(self.d)
        self.theta_hat = np.zeros(self.d)
        self.ensemble = None
        if self.kind in _MODES:
            self.ensemble = ens_mod.warm_start(
                self.d, config.lam, config.m, _MODES[self.kind], config.oracle,
                seed=config.seed, sgd=config.sgd, fast_rerandomize=config.fast_rerandomize)
        self.gamma = config.effective_gamma if self.kind is Kind.ACB_LAZY else None
        self.omega = 0
        self.anchor_action = None
        self.anchor_time = None
        self.anchor_bonus = 0.0
        self.rerandomize_count = 0
        self.anchored = False
        self.last_bonus = 0.0
        self.t = 0
        self._uniform = seeding.substream(config.seed, seeding.UNIFORM)

    @property
    def fresh(self):
        return self.t == 0 and self.anchor_time is None

    def bonuses(self, features):
        beta = self.config.beta
        if self.kind is Kind.LINUCB:
            return beta * elliptical_norms(self.cov, features)
        if self.ensemble is not None:
            return ens_mod.bonuses(self.ensemble, features, beta)
        return np.zeros(len(features))

    def _argmax(self, features):
        b = self.bonuses(features)
        a = choose(features @ self.theta_hat + b)
        return a, float(b[a])

    def select_action(self, features):
        features = _check_features(features, self.d)
        self.anchored = False
        if self.kind is Kind.UNIFORM:
            a = int(self._uniform.random() * len(features))
            self.last_bonus = 0.0
            return a
        if self.kind is not Kind.ACB_LAZY:
            a, self.last_bonus = self._argmax(features)
            return a
        if self.omega == 0:
            self._anchor(features)
        self.omega -= 1
        self.last_bonus = self.anchor_bonus
        return self.anchor_action

    def _anchor(self, features):
        # theta_hat is kept current by update(), so only the ensemble is refit
        ens_mod.rerandomize(self.ensemble, self.cov)
        self.rerandomize_count += 1
        a, b = self._argmax(features)
        self.anchor_action = a
        self.anchor_time = self.t
        self.anchor_bonus = b
        self.anchored = True
        ratio = self.gamma / (b * b) if b > 0 else math.inf
        self.omega = OMEGA_CAP if not ratio < OMEGA_CAP else max(1, math.ceil(ratio))

    def update(self, x, reward, targets=None):
        """Fold in the observed reward for the chosen feature ``x``.

        ``targets`` overrides the incremental ensemble's fresh targets for
        this row (used for coupling constructions).
        """
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise InvalidArgument(f"x must have shape ({self.d},), got {x.shape}")
        reward = float(reward)
        if not math.isfinite(reward):
            raise InvalidArgument(f"reward must be finite, got {reward}")
        rank_one_update(self.cov, x)
        self.reward_moment = self.reward_moment + x * reward
        self.theta_hat = self.cov.sigma_inv @ self.reward_moment
        ens = self.ensemble
        if ens is not None:
            if ens.mode is Mode.INCREMENTAL:
                ens_mod.record(ens, self.cov, x, targets=targets)
            elif ens.mode is Mode.RERANDOMIZED:
                ens.push_history(x)
                ens_mod.rerandomize(ens, self.cov)
            else:
                ens.push_history(x)
        self.t += 1
        return self


def choose(scores):
    """Index of the largest score, lowest index on ties."""
    if not np.all(np.isfinite(scores)):
        raise NumericFailure("non-finite action scores")
    return int(np.argmax(scores))


def make_policy(config, d):
    return Policy(config, d)


def select_action(policy, features):
    return policy.select_action(features)


def update(policy, x, reward):
    return policy.update(x, reward)


def _check_features(features, d):
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or len(features) == 0:
        raise InvalidArgument("features must be a nonempty (A, d) array")
    if features.shape[1] != d:
        raise InvalidArgument(f"features must have {d} columns, got {features.shape[1]}")
    return features
