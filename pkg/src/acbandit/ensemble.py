"""Random-target regression ensembles and the anti-concentrated bonus.

An ensemble holds ``m`` linear regressors, each fit to i.i.d. standard normal
targets on the features observed so far.  The history starts with ``d``
warm-start rows ``sqrt(lam) * e_i`` so that the *unregularized* least-squares
fit over the augmented history equals ridge regression with parameter ``lam``,
and ``Cov(w) = sigma^{-1}`` holds exactly.

Target sampling modes:

* ``incremental``  -- one fresh target per regressor for each new row; the fit
  is maintained by recursive least squares (or streaming SGD).
* ``rerandomized`` -- every target of every row is redrawn each round.
* ``lazy``         -- like ``rerandomized`` but redrawn only when the policy
  asks for it (at anchor rounds).

The bonus for a feature ``x`` is ``beta * max_j |<x, w_j>|``.
"""

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import seeding
from .errors import InvalidArgument, ModeViolation, NumericFailure
from .linalg import sample_from_inverse


class Mode(str, Enum):
    RERANDOMIZED = "rerandomized"
    INCREMENTAL = "incremental"
    LAZY = "lazy"


class Oracle(str, Enum):
    EXACT = "exact_rls"
    SGD = "sgd_polyak"


@dataclass
class SgdConfig:
    learning_rate: float = 0.1
    polyak_start_fraction: float = 0.5
    passes_per_refresh: int = 1

    def validate(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate >= 0):
            raise InvalidArgument(f"learning_rate must be nonnegative, got {self.learning_rate}")
        if not 0.0 <= self.polyak_start_fraction <= 1.0:
            raise InvalidArgument("polyak_start_fraction must lie in [0, 1]")
        if int(self.passes_per_refresh) != self.passes_per_refresh or self.passes_per_refresh < 1:
            raise InvalidArgument("passes_per_refresh must be a positive integer")
        return self


class _Rows:
    """Append-only row store with amortized growth."""

    def __init__(self, d, capacity=256):
        self._buf = np.empty((capacity, d))
        self.n = 0

    def append(self, x):
        if self.n == len(self._buf):
            grown = np.empty((2 * len(self._buf), self._buf.shape[1]))
            grown[:self.n] = self._buf[:self.n]
            self._buf = grown
        self._buf[self.n] = x
        self.n += 1

    @property
    def array(self):
        return self._buf[:self.n]

    def __len__(self):
        return self.n


class NoiseEnsemble:
    """M regressors ``w_j`` (stored as rows of ``weights``) and their targets.

    Use :func:`warm_start` to construct one.
    """

    def __init__(self, d, lam, m, mode, oracle, seed, sgd=None, fast_rerandomize=False):
        self.d = d
        self.lam = lam
        self.m = m
        self.mode = Mode(mode)
        self.oracle = Oracle(oracle)
        self.seed = seed
        self.sgd = (sgd or SgdConfig()).validate()
        self.fast_rerandomize = fast_rerandomize
        self.weights = np.zeros((m, d))
        self.moments = np.zeros((m, d)) if self.oracle is Oracle.EXACT else None
        self.polyak_weights = None
        self.history = _Rows(d) if self.mode is not Mode.INCREMENTAL else None
        self.record_count = 0
        self.rerandomize_count = 0
        self.refresh_count = 0
        self._targets = seeding.BlockNormals(seed, seeding.TARGETS, rows=m)
        self._reset_window()

    @property
    def effective_weights(self):
        """Weights used for bonuses: the Polyak average under the SGD oracle."""
        if self.oracle is Oracle.SGD:
            return self.polyak_weights
        return self.weights

    def targets_for(self, index):
        """Targets of the ``index``-th incremental record (one per regressor)."""
        return self._targets[index]

    def push_history(self, x):
        if self.history is None:
            raise ModeViolation("history is not retained in incremental mode")
        self.history.append(x)

    # streaming SGD with an exact tail window over iterates
    def _reset_window(self):
        self._n_iter = 0
        self._win_lo = 1
        self._win_sum = np.zeros((self.m, self.d))
        self._lag = self.weights.copy()
        self._lag_index = 0
        self._steps = deque()
        if self.oracle is Oracle.SGD:
            self.polyak_weights = self.weights.copy()

    def _sgd_stream_step(self, x, y):
        lr = self.sgd.learning_rate
        r = self.weights @ x - y
        with np.errstate(over="ignore", invalid="ignore"):
            self.weights = self.weights - lr * np.outer(r, x)
        if not np.all(np.isfinite(self.weights)):
            raise NumericFailure("SGD iterates diverged")
        self._steps.append((x, r))
        self._n_iter += 1
        n = self._n_iter
        self._win_sum += self.weights
        lo = min(math.floor(self.sgd.polyak_start_fraction * n) + 1, n)
        while self._win_lo < lo:
            while self._lag_index < self._win_lo:
                xs, rs = self._steps.popleft()
                self._lag = self._lag - lr * np.outer(rs, xs)
                self._lag_index += 1
            self._win_sum -= self._lag
            self._win_lo += 1
        self.polyak_weights = self._win_sum / float(n - self._win_lo + 1)


def warm_start(d, lam, m, mode, oracle, seed=0, sgd=None, fast_rerandomize=False, targets=None):
    """Build an ensemble fit to ``d`` warm-start rows ``sqrt(lam) * e_i``.

    ``targets`` (shape ``(m, d)``) overrides the sampled warm targets.
    """
    for name, value in (("d", d), ("m", m)):
        if int(value) != value or value < 1:
            raise InvalidArgument(f"{name} must be a positive integer, got {value}")
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidArgument(f"lambda must be positive, got {lam}")
    d, m = int(d), int(m)
    ens = NoiseEnsemble(d, float(lam), m, mode, oracle, seed, sgd, fast_rerandomize)
    if targets is None:
        targets = seeding.substream(seed, seeding.WARM).standard_normal((m, d))
    else:
        targets = np.asarray(targets, dtype=float).reshape(m, d)
    root = np.sqrt(ens.lam)
    ens.weights = targets / root
    if ens.moments is not None:
        ens.moments = targets * root
    if ens.history is not None:
        for i in range(d):
            row = np.zeros(d)
            row[i] = root
            ens.history.append(row)
    ens._reset_window()
    return ens


def record(ens, cov, x, targets=None):
    """Fold a newly observed feature row into the ensemble.

    ``cov`` must already contain ``x``.  In lazy mode the row only joins the
    history; its targets are drawn at the next :func:`rerandomize`.
    """
    if ens.mode is Mode.RERANDOMIZED:
        raise ModeViolation("record is not defined for re-randomized ensembles")
    x = np.asarray(x, dtype=float)
    if x.shape != (ens.d,):
        raise InvalidArgument(f"x must have shape ({ens.d},), got {x.shape}")
    if ens.mode is Mode.LAZY:
        ens.push_history(x)
        return ens
    if targets is None:
        y = ens.targets_for(ens.record_count)
    else:
        y = np.asarray(targets, dtype=float).reshape(ens.m)
    ens.record_count += 1
    if ens.oracle is Oracle.EXACT:
        ens.moments = ens.moments + np.outer(y, x)
        ens.weights = ens.moments @ cov.sigma_inv
    else:
        ens._sgd_stream_step(x, y)
    return ens


def rerandomize(ens, cov):
    """Redraw every target over the full history and refit all regressors.

    The stream is keyed by the history length and the call count, so each
    refit is reproducible and repeated calls draw fresh targets.
    With ``fast_rerandomize`` the weights are drawn directly from
    ``N(0, sigma^{-1})``, which is the law of the literal refit.
    """
    if ens.mode is Mode.INCREMENTAL:
        raise ModeViolation("rerandomize is not defined for incremental ensembles")
    rows = ens.history.array
    n = len(rows)
    call = ens.rerandomize_count
    ens.rerandomize_count += 1
    if ens.fast_rerandomize:
        rng = seeding.substream(ens.seed, seeding.FAST_SAMPLE, n, call)
        w = sample_from_inverse(cov, rng, size=ens.m)
        ens.weights = w
        if ens.moments is not None:
            ens.moments = w @ cov.sigma
        if ens.oracle is Oracle.SGD:
            ens._reset_window()
        return ens
    y = seeding.substream(ens.seed, seeding.RERANDOMIZE, n, call).standard_normal((ens.m, n))
    if ens.oracle is Oracle.EXACT:
        ens.moments = y @ rows
        ens.weights = ens.moments @ cov.sigma_inv
    else:
        ens.weights = y[:, :ens.d] / np.sqrt(ens.lam)
        _sgd_batch(ens, rows, y.T, ens.sgd)
    return ens


def bonus(ens, x, beta):
    x = np.asarray(x, dtype=float)
    if x.shape != (ens.d,):
        raise InvalidArgument(f"x must have shape ({ens.d},), got {x.shape}")
    return float(beta * np.max(np.abs(ens.effective_weights @ x)))


def bonuses(ens, features, beta):
    """Bonuses for every row of an ``(A, d)`` feature matrix."""
    return beta * np.max(np.abs(features @ ens.effective_weights.T), axis=1)


def _sgd_batch(ens, X, Y, config):
    lr = config.learning_rate
    n = len(X)
    total = n * int(config.passes_per_refresh)
    skip = math.floor(config.polyak_start_fraction * total)
    if skip >= total:
        skip = total - 1
    rng = seeding.substream(ens.seed, seeding.SHUFFLE, ens.refresh_count)
    ens.refresh_count += 1
    w = ens.weights
    acc = np.zeros_like(w)
    step = 0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(int(config.passes_per_refresh)):
            for i in rng.permutation(n):
                x = X[i]
                r = w @ x - Y[i]
                w = w - lr * np.outer(r, x)
                step += 1
                if step > skip:
                    acc += w
    if not np.all(np.isfinite(w)):
        raise NumericFailure("SGD iterates diverged")
    ens.weights = w
    ens._reset_window()
    ens.polyak_weights = acc / float(total - skip)
    return ens


def sgd_refresh(ens, dataset, config=None):
    """Shuffled SGD passes over ``dataset`` followed by tail averaging.

    ``dataset`` is either a pair ``(X, Y)`` with shapes ``(n, d)`` and
    ``(n, m)`` or a sequence of ``(x, y)`` pairs.  Iterates after the first
    ``polyak_start_fraction`` of all steps are averaged into
    ``polyak_weights``; ``weights`` keeps the last iterate.
    """
    if ens.oracle is not Oracle.SGD:
        raise ModeViolation("sgd_refresh requires the SGD oracle")
    config = (config or ens.sgd).validate()
    if isinstance(dataset, tuple) and len(dataset) == 2 and np.ndim(dataset[0]) == 2:
        X, Y = dataset
    else:
        if len(dataset) == 0:
            raise InvalidArgument("dataset is empty")
        X = np.array([row[0] for row in dataset], dtype=float)
        Y = np.array([row[1] for row in dataset], dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(len(X), ens.m)
    if len(X) == 0:
        raise InvalidArgument("dataset is empty")
    if X.shape[1] != ens.d:
        raise InvalidArgument(f"features must have {ens.d} columns")
    return _sgd_batch(ens, X, Y, config)
