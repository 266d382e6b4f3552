"""Experiment runner: episodes, replicates, grid searches and file exports.

Replicate ``i`` of an experiment seeds its environment with
``derive_seed(master_seed, i, ENV)`` and its policy with
``derive_seed(master_seed, i, POLICY)``; every grid cell reuses the same
replicate seeds, so cells are compared on common random numbers.
"""

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import _mab, seeding
from .env import instantaneous_regret, make_figure2_mab, make_linear_env, step
from .errors import InvalidArgument, NumericFailure
from .policies import Kind, PolicyConfig, make_policy

DEFAULT_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0)
FIGURE2_M_GRID = (1, 2, 4, 8, 16, 32, 64, 128, 256)
FIGURE2_HORIZON = 10_000
FIGURE2_LAM = 0.01

RUN_HEADER = ["config_id", "policy", "oracle", "m", "beta", "lr", "replicate", "round", "action",
              "reward", "inst_regret", "cum_regret", "bonus"]
SWEEP_HEADER = ["config_id", "policy", "oracle", "m", "beta", "lr", "mean_final_regret",
                "stderr_final_regret", "n_replicates"]


def fmt(x):
    """Lossless decimal text (17 significant digits)."""
    return format(float(x), ".17g")


# configuration

@dataclass
class EnvSpec:
    kind: str = "figure2"
    d: int = 50
    a_count: int = 50
    theta_star: list = None
    sigma_noise: float = 0.1
    action_mode: str = "fixed"
    actions: list = None
    w_norm: float = 1.0

    def validate(self):
        if self.kind not in ("figure2", "linear"):
            raise InvalidArgument(f"unknown env kind {self.kind!r}")
        if self.kind == "linear":
            if self.action_mode not in ("fixed", "per_round"):
                raise InvalidArgument(f"unknown action_mode {self.action_mode!r}")
            if int(self.d) != self.d or self.d < 1 or int(self.a_count) != self.a_count or self.a_count < 1:
                raise InvalidArgument("d and a_count must be positive integers")
            if self.theta_star is not None and len(self.theta_star) != self.d:
                raise InvalidArgument("theta_star length must equal d")
        return self

    @property
    def dim(self):
        return 50 if self.kind == "figure2" else int(self.d)

    def build(self, seed, horizon):
        if self.kind == "figure2":
            return make_figure2_mab(seed, horizon)
        theta = self.theta_star
        if theta is None:
            g = seeding.substream(seed, seeding.SETUP, 1).standard_normal(self.d)
            theta = self.w_norm * g / np.linalg.norm(g)
        return make_linear_env(self.d, self.a_count, theta, self.sigma_noise, self.action_mode,
                               self.actions, seed=seed, horizon=horizon)


@dataclass
class ExperimentConfig:
    env: EnvSpec = field(default_factory=EnvSpec)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    horizon: int = 1000
    replicates: int = 1
    beta_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    lr_grid: list = field(default_factory=lambda: list(DEFAULT_GRID))
    m_grid: list = None
    master_seed: int = 0
    output: str = None

    def validate(self):
        if isinstance(self.env, dict):
            self.env = EnvSpec(**self.env)
        if isinstance(self.policy, dict):
            self.policy = PolicyConfig.from_dict(self.policy)
        self.env.validate()
        self.policy.validate()
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise InvalidArgument(f"horizon must be a positive integer, got {self.horizon}")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise InvalidArgument(f"replicates must be a positive integer, got {self.replicates}")
        for name in ("beta_grid", "lr_grid"):
            grid = getattr(self, name)
            if not grid or any(not (math.isfinite(v) and v >= 0) for v in grid):
                raise InvalidArgument(f"{name} must be a nonempty list of nonnegative reals")
        if self.m_grid is not None:
            if not self.m_grid or any(int(v) != v or v < 1 for v in self.m_grid):
                raise InvalidArgument("m_grid must be a nonempty list of positive integers")
        if int(self.master_seed) != self.master_seed or self.master_seed < 0:
            raise InvalidArgument("master_seed must be a nonnegative integer")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise InvalidArgument(f"unknown config keys: {sorted(extra)}")
        data = dict(data)
        if isinstance(data.get("env"), dict):
            env = data["env"]
            extra = set(env) - set(EnvSpec.__dataclass_fields__)
            if extra:
                raise InvalidArgument(f"unknown env keys: {sorted(extra)}")
            data["env"] = EnvSpec(**env)
        if isinstance(data.get("policy"), dict):
            pol = data["policy"]
            extra = set(pol) - set(PolicyConfig.__dataclass_fields__)
            if extra:
                raise InvalidArgument(f"unknown policy keys: {sorted(extra)}")
            try:
                data["policy"] = PolicyConfig.from_dict(pol)
            except TypeError as exc:
                raise InvalidArgument(str(exc)) from None
        return cls(**data).validate()

    def config_id(self):
        """Short hash of the canonical JSON, ignoring the output path."""
        d = self.to_dict()
        d.pop("output", None)
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidArgument(f"{path}: {exc}") from None
    except OSError as exc:
        raise InvalidArgument(f"cannot read config: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidArgument("config must be a JSON object")
    try:
        return ExperimentConfig.from_dict(data)
    except TypeError as exc:
        raise InvalidArgument(str(exc)) from None


# single runs

@dataclass
class RunResult:
    actions: np.ndarray
    rewards: np.ndarray
    inst_regret: np.ndarray
    bonus: np.ndarray
    log_det: np.ndarray  # log det before each round, plus the final value
    gains: np.ndarray  # x^T sigma^{-1} x before each update
    anchors: np.ndarray  # lazy anchor rounds
    rerandomize_count: int
    kind: str
    lam: float
    d: int
    a_count: int
    horizon: int
    failure: str = None

    @property
    def cum_regret(self):
        return np.cumsum(self.inst_regret)

    @property
    def final_regret(self):
        if self.failure is not None:
            return math.inf
        return float(np.sum(self.inst_regret))

    @property
    def potential(self):
        """Running sum of ``|x_t|^2`` in the covariance that includes ``x_t``."""
        return np.cumsum(self.gains / (1.0 + self.gains))


def run_episode(env, policy, horizon=None, fast=True):
    """Play ``horizon`` rounds (default ``env.horizon``) and collect traces.

    A :class:`NumericFailure` stops the run; traces cover the completed rounds
    and ``failure`` holds the message.
    """
    T = env.horizon if horizon is None else int(horizon)
    if env.d != policy.d:
        raise InvalidArgument(f"environment dimension {env.d} != policy dimension {policy.d}")
    meta = dict(kind=policy.kind.value, lam=policy.cov.lam, d=env.d, a_count=env.a_count, horizon=T)
    if fast and _mab.supports(env, policy):
        actions, rewards, regret, bonus, log_det, gains, failed = _mab.run(env, policy, T)
        failure = None if failed < 0 else f"non-finite scores or weights at round {failed}"
        return RunResult(actions, rewards, regret, bonus, log_det, gains,
                         np.zeros(0, dtype=np.int64), 0, failure=failure, **meta)
    actions = np.zeros(T, dtype=np.int64)
    rewards = np.zeros(T)
    regret = np.zeros(T)
    bonus = np.zeros(T)
    log_det = np.zeros(T + 1)
    gains = np.zeros(T)
    anchors = []
    failure = None
    n = T
    for t in range(T):
        log_det[t] = policy.cov.log_det
        try:
            X = env.features(t)
            a = policy.select_action(X)
            r = step(env, t, a)
            actions[t] = a
            rewards[t] = r
            regret[t] = instantaneous_regret(env, t, a)
            bonus[t] = policy.last_bonus
            if policy.anchored:
                anchors.append(t)
            policy.update(X[a], r)
        except NumericFailure as exc:
            failure = f"round {t}: {exc}"
            n = t
            break
        gains[t] = policy.cov.last_gain
    if failure is None:
        log_det[T] = policy.cov.log_det
    return RunResult(actions[:n], rewards[:n], regret[:n], bonus[:n], log_det[:n + 1], gains[:n],
                     np.array(anchors[:n], dtype=np.int64), policy.rerandomize_count,
                     failure=failure, **meta)


def run_replicate(config, i, fast=True):
    env_seed = seeding.derive_seed(config.master_seed, i, seeding.ENV)
    pol_seed = seeding.derive_seed(config.master_seed, i, seeding.POLICY)
    env = config.env.build(env_seed, config.horizon)
    policy = make_policy(replace(config.policy, seed=pol_seed), env.d)
    return run_episode(env, policy, config.horizon, fast=fast)


def _run_replicate_task(args):
    return run_replicate(*args)


# replicates and grids

@dataclass
class ReplicateSummary:
    policy: PolicyConfig
    mean_curve: np.ndarray
    stderr_curve: np.ndarray
    final: np.ndarray  # final cumulative regret per replicate (inf on failure)
    failures: int
    runs: list = None

    @property
    def n(self):
        return len(self.final)

    @property
    def mean_final(self):
        return float(np.mean(self.final))

    @property
    def stderr_final(self):
        if self.n < 2 or not np.all(np.isfinite(self.final)):
            return 0.0 if self.n < 2 else math.inf
        return float(np.std(self.final, ddof=1) / math.sqrt(self.n))


def _curves(runs, T):
    curves = np.full((len(runs), T), np.nan)
    for i, r in enumerate(runs):
        c = r.cum_regret
        curves[i, :len(c)] = c
    mean = curves.mean(axis=0)
    if len(runs) > 1:
        se = curves.std(axis=0, ddof=1) / math.sqrt(len(runs))
    else:
        se = np.zeros(T)
    return mean, se


def run_replicates(config, workers=1, keep_runs=False, fast=True):
    """Run every replicate of ``config`` and aggregate cumulative-regret curves.

    Results are identical for any ``workers``; the reduction is serial and in
    replicate order.
    """
    config.validate()
    tasks = [(config, i, fast) for i in range(config.replicates)]
    if workers and workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        runs = [_run_replicate_task(t) for t in tasks]
    mean, se = _curves(runs, config.horizon)
    final = np.array([r.final_regret for r in runs])
    failures = sum(r.failure is not None for r in runs)
    return ReplicateSummary(config.policy, mean, se, final, failures, runs if keep_runs else None)


@dataclass
class SweepCell:
    m: int
    beta: float
    lr: float  # None for the exact oracle and non-ensemble kinds
    summary: ReplicateSummary

    @property
    def key(self):
        return (self.summary.mean_final, self.beta, -1.0 if self.lr is None else self.lr)


@dataclass
class SweepResult:
    config: ExperimentConfig
    cells: list
    best: dict  # m -> SweepCell

    def rows(self):
        cid = self.config.config_id()
        p = self.config.policy
        for c in self.cells:
            yield [cid, p.kind, p.oracle, str(c.m), fmt(c.beta), "" if c.lr is None else fmt(c.lr),
                   fmt(c.summary.mean_final), fmt(c.summary.stderr_final), str(c.summary.n)]


def _uses_lr(policy):
    return policy.oracle == "sgd_polyak" and Kind(policy.kind) in (
        Kind.ACB_INCREMENTAL, Kind.ACB_RERANDOMIZED, Kind.ACB_LAZY)


def grid_search(config, workers=1, keep_curves=True, fast=True):
    """Evaluate every (M, beta[, lr]) cell and pick the best cell per M.

    The winner minimizes mean final regret; ties go to the smaller beta, then
    the smaller learning rate.  Cells with a failed replicate score infinity.
    """
    config.validate()
    p = config.policy
    ms = list(config.m_grid) if config.m_grid is not None else [p.m]
    lrs = list(config.lr_grid) if _uses_lr(p) else [None]
    cells = []
    for m in ms:
        for lr in lrs:
            for beta in config.beta_grid:
                pol = replace(p, m=int(m), beta=float(beta))
                if lr is not None:
                    pol = replace(pol, sgd=replace(p.sgd, learning_rate=float(lr)))
                sub = replace(config, policy=pol, m_grid=None)
                s = run_replicates(sub, workers=workers, fast=fast)
                if not keep_curves:
                    s.mean_curve = s.stderr_curve = None
                cells.append(SweepCell(int(m), float(beta), lr, s))
    best = {}
    for c in cells:
        if c.m not in best or c.key < best[c.m].key:
            best[c.m] = c
    return SweepResult(config, cells, best)


# exports

def runs_csv_text(config, runs):
    """Long-format CSV text for the replicates of one configuration."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RUN_HEADER)
    cid = config.config_id()
    p = config.policy
    lr = fmt(p.sgd.learning_rate) if _uses_lr(p) else ""
    beta = fmt(p.beta)
    for i, r in enumerate(runs):
        cum = r.cum_regret
        for t in range(len(r.actions)):
            w.writerow([cid, p.kind, p.oracle, str(p.m), beta, lr, str(i), str(t + 1),
                        str(int(r.actions[t])), fmt(r.rewards[t]), fmt(r.inst_regret[t]),
                        fmt(cum[t]), fmt(r.bonus[t])])
    return buf.getvalue()


def write_runs_csv(path, config, runs):
    with open(path, "w", newline="") as fh:
        fh.write(runs_csv_text(config, runs))
    return path


def sweep_csv_text(sweeps):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for s in sweeps:
        for row in s.rows():
            w.writerow(row)
    return buf.getvalue()


def write_sweep_csv(path, sweeps):
    if isinstance(sweeps, SweepResult):
        sweeps = [sweeps]
    with open(path, "w", newline="") as fh:
        fh.write(sweep_csv_text(sweeps))
    return path


def read_runs_csv(path):
    """Parse a long-format CSV back into ``{(config_id, replicate): columns}``."""
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            key = (row["config_id"], int(row["replicate"]))
            cols = out.setdefault(key, {k: [] for k in ("action", "reward", "inst_regret",
                                                       "cum_regret", "bonus")})
            cols["action"].append(int(row["action"]))
            for k in ("reward", "inst_regret", "cum_regret", "bonus"):
                cols[k].append(float(row[k]))
    return out


def write_svg(path, curves, title=""):
    """Plot mean +/- standard-error regret curves.

    ``curves`` maps a label to ``(mean, stderr)``.  The file carries no
    timestamp, so identical inputs give identical bytes.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "acbandit"
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, (mean, se) in curves.items():
        x = np.arange(1, len(mean) + 1)
        ax.plot(x, mean, label=label, lw=1.2)
        ax.fill_between(x, mean - se, mean + se, alpha=0.25)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    if title:
        ax.set_title(title)
    if curves:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
