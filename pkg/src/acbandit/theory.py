"""Closed-form constants from the regret analysis.

All formulas are evaluated literally; ``B`` enters as ``T * B`` inside the
logarithm exactly as written, and the confidence level inside the
self-normalized width is split uniformly over rounds (``delta_t = delta / T``).
"""

import math
from dataclasses import asdict, dataclass

from .errors import InvalidArgument

LOG2 = math.log(2.0)
ANTI_CONCENTRATION = math.sqrt(math.pi * LOG2 / 2.0)


@dataclass(frozen=True)
class TheoryParams:
    t_horizon: int
    d: int
    a_count: int
    b_bound: float
    w_bound: float
    sigma_noise: float
    delta: float

    def __post_init__(self):
        for name in ("t_horizon", "d", "a_count"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidArgument(f"{name} must be a positive integer, got {v}")
        for name in ("b_bound", "w_bound"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidArgument(f"{name} must be positive, got {v}")
        # zero noise is allowed so noiseless checks can be expressed; the
        # ridge parameter sigma^2 / W^2 is then zero and theory_beta rejects it
        if not (math.isfinite(self.sigma_noise) and self.sigma_noise >= 0):
            raise InvalidArgument(f"sigma_noise must be nonnegative, got {self.sigma_noise}")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgument(f"delta must lie in (0, 1), got {self.delta}")

    @property
    def lam(self):
        return self.sigma_noise ** 2 / self.w_bound ** 2

    def to_dict(self):
        return asdict(self)


def _log_term(p, lam):
    return math.log1p(p.t_horizon * p.b_bound / (lam * p.d))


def _require_lam(p):
    lam = p.lam
    if not lam > 0:
        raise InvalidArgument("lambda = sigma^2 / W^2 must be positive (sigma_noise is zero)")
    return lam


def theory_beta(p):
    """``sqrt(lam) W + sqrt(2) sigma sqrt(d log(1 + TB/(lam d)) + log(T/delta))``."""
    lam = _require_lam(p)
    inner = p.d * _log_term(p, lam) + math.log(p.t_horizon / p.delta)
    return math.sqrt(lam) * p.w_bound + math.sqrt(2.0) * p.sigma_noise * math.sqrt(inner)


def lazy_beta(p):
    """Bonus scale for the lazy variant: ``theory_beta * sqrt(2 / (pi log 2))``."""
    return theory_beta(p) / ANTI_CONCENTRATION


def lazy_gamma(beta):
    """``gamma = beta^2 pi log 2 / 2``."""
    if not (math.isfinite(beta) and beta >= 0):
        raise InvalidArgument(f"beta must be nonnegative, got {beta}")
    return beta * beta * math.pi * LOG2 / 2.0


def theory_ensemble_size(t_horizon, delta, variant, a_count=1):
    variant = getattr(variant, "value", variant)
    if int(t_horizon) != t_horizon or t_horizon < 1:
        raise InvalidArgument(f"t_horizon must be a positive integer, got {t_horizon}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    if variant == "rerandomized":
        arg = 2.0 * t_horizon / delta
    elif variant == "incremental":
        arg = t_horizon / delta
    elif variant == "lazy":
        if int(a_count) != a_count or a_count < 1:
            raise InvalidArgument(f"a_count must be a positive integer, got {a_count}")
        arg = a_count * t_horizon / delta
    else:
        raise InvalidArgument(f"unknown variant {variant!r}")
    return max(1, math.ceil(math.log(arg)))


def regret_envelope(p, gamma2):
    """``(gamma2 + beta_bar) sqrt(2 d T log(1 + TB/(lam d)))``."""
    if not (math.isfinite(gamma2) and gamma2 >= 0):
        raise InvalidArgument(f"gamma2 must be nonnegative, got {gamma2}")
    lam = _require_lam(p)
    return (gamma2 + theory_beta(p)) * math.sqrt(2.0 * p.d * p.t_horizon * _log_term(p, lam))


def gaussian_max_bounds(m, delta):
    """Thresholds sandwiching ``max_j |g_j|`` over ``m`` standard normals.

    Each side holds with probability at least ``1 - delta``.  The lower
    threshold is reported as 0 when its square-root argument is not positive.
    """
    if int(m) != m or m < 1:
        raise InvalidArgument(f"m must be a positive integer, got {m}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
    arg = math.log(m / 2.0) - math.log(math.log(1.0 / delta))
    lower = math.sqrt(math.pi / 2.0) * math.sqrt(arg) if arg > 0 else 0.0
    upper = math.sqrt(2.0) * (math.sqrt(math.log(2.0 * m)) + math.sqrt(math.log(1.0 / delta)))
    return lower, upper


def confidence_width(lam, theta_norm, sigma_noise, log_det, d, delta_t):
    """Self-normalized width ``sqrt(lam)|theta*| + sqrt(2 sigma^2 log(det/lam^d / delta_t))``."""
    arg = log_det - d * math.log(lam) + math.log(1.0 / delta_t)
    return math.sqrt(lam) * theta_norm + math.sqrt(2.0 * sigma_noise ** 2 * max(arg, 0.0))


def lazy_growth_factor(a_count, t_horizon, delta):
    """Lower bound on the determinant growth across one lazy interval."""
    return math.sqrt(1.0 + math.pi * LOG2 / (16.0 * math.log(2.0 * a_count * t_horizon / delta)))
