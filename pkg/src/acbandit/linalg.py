"""Regularized design matrix with a maintained inverse and log-determinant.

The covariance is ``sigma = lam * I + sum_t x_t x_t^T``.  Its inverse is kept
current with Sherman-Morrison rank-one updates (re-symmetrized after every
step) and rebuilt from ``sigma`` every ``REFRESH_EVERY`` updates to bound
round-off drift.  The log-determinant follows the matrix determinant lemma.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import InvalidArgument, NumericFailure

REFRESH_EVERY = 1000


@dataclass
class CovarianceState:
    dim: int
    lam: float
    sigma: np.ndarray
    sigma_inv: np.ndarray
    log_det: float
    update_count: int = 0
    last_gain: float = 0.0

    def copy(self):
        return CovarianceState(self.dim, self.lam, self.sigma.copy(),
                               self.sigma_inv.copy(), self.log_det, self.update_count)

    def inverse_error(self):
        """Relative Frobenius error of ``sigma_inv`` against a dense inversion."""
        ref = np.linalg.inv(self.sigma)
        return float(np.linalg.norm(self.sigma_inv - ref) / np.linalg.norm(ref))

    def log_det_error(self):
        sign, ref = np.linalg.slogdet(self.sigma)
        if sign <= 0:
            return float("inf")
        return abs(self.log_det - ref)

    def symmetry_error(self):
        return max(float(np.max(np.abs(self.sigma - self.sigma.T))),
                   float(np.max(np.abs(self.sigma_inv - self.sigma_inv.T))))


def _as_vector(x, dim, name="x"):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise InvalidArgument(f"{name} must have shape ({dim},), got {x.shape}")
    return x


def init_covariance(d, lam):
    if int(d) != d or d < 1:
        raise InvalidArgument(f"dimension must be a positive integer, got {d}")
    if not (np.isfinite(lam) and lam > 0):
        raise InvalidArgument(f"lambda must be positive, got {lam}")
    d = int(d)
    lam = float(lam)
    return CovarianceState(
        dim=d,
        lam=lam,
        sigma=lam * np.eye(d),
        sigma_inv=np.eye(d) / lam,
        log_det=d * np.log(lam),
    )


def refresh(state):
    """Rebuild ``sigma_inv`` and ``log_det`` from ``sigma`` directly."""
    sign, log_det = np.linalg.slogdet(state.sigma)
    if sign <= 0 or not np.isfinite(log_det):
        raise NumericFailure("covariance lost positive definiteness")
    inv = np.linalg.inv(state.sigma)
    state.sigma_inv = 0.5 * (inv + inv.T)
    state.log_det = float(log_det)
    return state


def rank_one_update(state, x):
    """Add ``x x^T`` to the covariance in place and return the state.

    ``state.last_gain`` is set to ``x^T sigma_inv x`` evaluated before the
    update; callers use it for elliptical-potential accounting.
    """
    x = _as_vector(x, state.dim)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("x has non-finite entries")
    v = state.sigma_inv @ x
    u = float(x @ v)
    denom = 1.0 + u
    inv = state.sigma_inv - np.outer(v, v) / denom
    state.sigma_inv = 0.5 * (inv + inv.T)
    state.sigma = state.sigma + np.outer(x, x)
    state.log_det = state.log_det + float(np.log1p(u))
    state.update_count += 1
    state.last_gain = u
    if state.update_count % REFRESH_EVERY == 0:
        refresh(state)
    return state


def elliptical_norm(state, x):
    x = _as_vector(x, state.dim)
    q = float(x @ (state.sigma_inv @ x))
    return float(np.sqrt(max(q, 0.0)))


def elliptical_norms(state, features):
    """Row-wise elliptical norms of an ``(A, d)`` feature matrix."""
    q = np.sum((features @ state.sigma_inv) * features, axis=1)
    return np.sqrt(np.maximum(q, 0.0))


def solve(state, b):
    b = _as_vector(b, state.dim, "b")
    return state.sigma_inv @ b


def sample_from_inverse(state, rng, size=None):
    """Draw ``w ~ N(0, sigma^{-1})`` through the Cholesky factor of ``sigma``.

    With ``sigma = L L^T`` and ``z ~ N(0, I)``, ``w = L^{-T} z`` has covariance
    ``L^{-T} L^{-1} = sigma^{-1}``.  ``size`` draws a ``(size, d)`` batch.
    """
    try:
        chol = np.linalg.cholesky(state.sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericFailure("covariance is not positive definite") from exc
    shape = (state.dim,) if size is None else (state.dim, int(size))
    z = rng.standard_normal(shape)
    w = sla.solve_triangular(chol, z, lower=True, trans="T")
    return w if size is None else w.T
