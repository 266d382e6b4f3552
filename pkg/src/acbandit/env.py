"""Stochastic linear bandit environments with Gaussian reward noise.

Rounds are indexed from 0.  Round ``t``'s noise is normal number ``t`` of the
environment's keyed noise stream, and per-round action sets are drawn from a
stream keyed by ``t``; both are independent of any policy randomness.
"""

import numpy as np

from . import seeding
from .errors import InvalidArgument

FIGURE2_ARMS = 50
FIGURE2_HIGH = 0.75
FIGURE2_LOW = 0.25
FIGURE2_SIGMA = 0.1


class Environment:
    """Ground truth ``theta_star``, action sets, and the noise stream.

    ``actions`` is an ``(A, d)`` array used every round, or ``None`` for a
    per-round generator of ``a_count`` uniform unit vectors.
    """

    def __init__(self, theta_star, sigma_noise, horizon, seed=0, actions=None, a_count=None,
                 w_bound=None, b_bound=None):
        self.theta_star = np.asarray(theta_star, dtype=float)
        if self.theta_star.ndim != 1 or len(self.theta_star) == 0:
            raise InvalidArgument("theta_star must be a nonempty vector")
        self.d = len(self.theta_star)
        if not (np.isfinite(sigma_noise) and sigma_noise >= 0):
            raise InvalidArgument(f"sigma_noise must be nonnegative, got {sigma_noise}")
        if int(horizon) != horizon or horizon < 1:
            raise InvalidArgument(f"horizon must be a positive integer, got {horizon}")
        self.sigma_noise = float(sigma_noise)
        self.horizon = int(horizon)
        self.seed = int(seed)
        if actions is not None:
            actions = np.asarray(actions, dtype=float)
            if actions.ndim != 2 or len(actions) == 0:
                raise InvalidArgument("actions must be a nonempty (A, d) array")
            if actions.shape[1] != self.d:
                raise InvalidArgument(f"actions must have {self.d} columns, got {actions.shape[1]}")
            self.actions = actions
            self.a_count = len(actions)
            self._fixed_means = actions @ self.theta_star
        else:
            if a_count is None or int(a_count) != a_count or a_count < 1:
                raise InvalidArgument("a_count must be a positive integer for generated actions")
            self.actions = None
            self.a_count = int(a_count)
        self.w_bound = w_bound
        self.b_bound = b_bound
        if w_bound is not None and np.linalg.norm(self.theta_star) > w_bound * (1 + 1e-12):
            raise InvalidArgument("|theta_star| exceeds the declared bound W")
        if b_bound is not None and self.actions is not None:
            if np.max(np.linalg.norm(self.actions, axis=1)) > b_bound * (1 + 1e-12):
                raise InvalidArgument("an action exceeds the declared bound B")
        self._noise = seeding.BlockNormals(self.seed, seeding.NOISE)
        self._round = -1
        self._round_actions = None

    @property
    def fixed(self):
        return self.actions is not None

    @property
    def is_identity(self):
        """True for a multi-armed bandit with standard-basis arms."""
        return (self.fixed and self.a_count == self.d
                and np.array_equal(self.actions, np.eye(self.d)))

    def features(self, t):
        if self.fixed:
            return self.actions
        if t != self._round:
            rng = seeding.substream(self.seed, seeding.ACTIONS, int(t))
            g = rng.standard_normal((self.a_count, self.d))
            self._round_actions = g / np.linalg.norm(g, axis=1, keepdims=True)
            self._round = t
        return self._round_actions

    def means(self, t):
        if self.fixed:
            return self._fixed_means
        return self.features(t) @ self.theta_star

    def noise(self, t):
        return self.sigma_noise * float(self._noise[int(t)][0])

    def _check_index(self, a):
        if int(a) != a or not 0 <= a < self.a_count:
            raise InvalidArgument(f"action index {a} out of range [0, {self.a_count})")
        return int(a)


def step(env, t, a):
    """Reward of action ``a`` at round ``t``: mean plus ``N(0, sigma^2)`` noise."""
    a = env._check_index(a)
    return float(env.means(t)[a]) + env.noise(t)


def instantaneous_regret(env, t, a):
    a = env._check_index(a)
    mu = env.means(t)
    return float(np.max(mu) - mu[a])


def optimal_action(env, t):
    return int(np.argmax(env.means(t)))


def make_figure2_mab(seed=0, horizon=10000):
    """Fifty standard-basis arms; one random arm pays 0.75 on average, the rest 0.25."""
    best = int(seeding.substream(seed, seeding.SETUP).integers(FIGURE2_ARMS))
    theta = np.full(FIGURE2_ARMS, FIGURE2_LOW)
    theta[best] = FIGURE2_HIGH
    return Environment(theta, FIGURE2_SIGMA, horizon, seed=seed, actions=np.eye(FIGURE2_ARMS),
                       b_bound=1.0)


def make_linear_env(d, a_count, theta_star, sigma_noise, action_mode="fixed", actions=None,
                    seed=0, horizon=1000):
    """Linear bandit with a fixed action set or fresh unit-vector actions each round.

    In ``fixed`` mode without explicit ``actions``, ``a_count`` unit vectors are
    drawn once from the setup stream.
    """
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (d,):
        raise InvalidArgument(f"theta_star must have shape ({d},), got {theta_star.shape}")
    if action_mode == "fixed":
        if actions is None:
            g = seeding.substream(seed, seeding.SETUP).standard_normal((a_count, d))
            actions = g / np.linalg.norm(g, axis=1, keepdims=True)
        actions = np.asarray(actions, dtype=float)
        if actions.ndim != 2 or actions.shape != (a_count, d):
            raise InvalidArgument(f"actions must have shape ({a_count}, {d})")
        return Environment(theta_star, sigma_noise, horizon, seed=seed, actions=actions)
    if action_mode == "per_round":
        if actions is not None:
            raise InvalidArgument("explicit actions are only used in fixed mode")
        return Environment(theta_star, sigma_noise, horizon, seed=seed, a_count=a_count, b_bound=1.0)
    raise InvalidArgument(f"unknown action_mode {action_mode!r}")
