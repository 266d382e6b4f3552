"""Command-line entry point: ``acbandit {run,sweep,figure2,verify,envelope}``.

Exit codes: 0 success, 1 invalid configuration, 2 runtime or numeric
failure, 3 verification failure.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import replace

from . import harness, theory, verify
from .ensemble import SgdConfig
from .errors import InvalidArgument, NumericFailure
from .policies import PolicyConfig

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def cmd_run(args):
    cfg = harness.load_config(args.config)
    summary = harness.run_replicates(cfg, workers=args.workers, keep_runs=True)
    _emit(harness.runs_csv_text(cfg, summary.runs), args.output or cfg.output)
    if args.svg:
        harness.write_svg(args.svg, {cfg.policy.kind: (summary.mean_curve, summary.stderr_curve)},
                          title=f"config {cfg.config_id()}")
    if summary.failures:
        print(f"{summary.failures} replicate(s) hit a numeric failure", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_sweep(args):
    cfg = harness.load_config(args.config)
    result = harness.grid_search(cfg, workers=args.workers)
    _emit(harness.sweep_csv_text([result]), args.output or cfg.output)
    if args.svg:
        curves = {f"M={m} beta={c.beta:g}" + ("" if c.lr is None else f" lr={c.lr:g}"):
                  (c.summary.mean_curve, c.summary.stderr_curve) for m, c in sorted(result.best.items())}
        harness.write_svg(args.svg, curves, title=f"config {cfg.config_id()}")
    if all(not math.isfinite(c.summary.mean_final) for c in result.cells):
        return EXIT_RUNTIME
    return EXIT_OK


def figure2_config(oracle, replicates, horizon, m_grid, beta_grid, lr_grid, master_seed):
    policy = PolicyConfig(kind="acb_incremental", lam=harness.FIGURE2_LAM, oracle=oracle,
                          sgd=SgdConfig())
    return harness.ExperimentConfig(
        env=harness.EnvSpec(kind="figure2"), policy=policy, horizon=horizon, replicates=replicates,
        beta_grid=list(beta_grid), lr_grid=list(lr_grid), m_grid=list(m_grid),
        master_seed=master_seed).validate()


def cmd_figure2(args):
    oracles = ["exact_rls", "sgd_polyak"] if args.oracle == "both" else [args.oracle]
    os.makedirs(args.out_dir, exist_ok=True)
    results = []
    curves = {}
    for oracle in oracles:
        cfg = figure2_config(oracle, args.replicates, args.horizon, args.m_grid, args.beta_grid,
                             args.lr_grid, args.master_seed)
        res = harness.grid_search(cfg, workers=args.workers)
        results.append(res)
        for m, c in sorted(res.best.items()):
            curves[f"{oracle} M={m}"] = (c.summary.mean_curve, c.summary.stderr_curve)
            print(json.dumps({"oracle": oracle, "m": m, "beta": c.beta, "lr": c.lr,
                              "mean_final_regret": c.summary.mean_final,
                              "stderr_final_regret": c.summary.stderr_final}))
    harness.write_sweep_csv(os.path.join(args.out_dir, "figure2_sweep.csv"), results)
    harness.write_svg(os.path.join(args.out_dir, "figure2.svg"), curves,
                      title=f"figure-2 MAB, T={args.horizon} (preset horizon)")
    meta = {"horizon": args.horizon, "lam": harness.FIGURE2_LAM, "replicates": args.replicates,
            "config_ids": {r.config.policy.oracle: r.config.config_id() for r in results}}
    with open(os.path.join(args.out_dir, "figure2_meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_verify(args):
    ok = True
    for rep in verify.default_suite(quick=args.quick, seed=args.seed):
        print(rep.to_json(), flush=True)
        ok &= bool(rep.passed)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_envelope(args):
    p = theory.TheoryParams(args.horizon, args.d, args.a_count, args.b_bound, args.w_bound,
                            args.sigma_noise, args.delta)
    beta = theory.theory_beta(p)
    gamma2 = beta if args.gamma2 is None else args.gamma2
    out = {
        "params": p.to_dict(),
        "lam": p.lam,
        "theory_beta": beta,
        "lazy_beta": theory.lazy_beta(p),
        "lazy_gamma": theory.lazy_gamma(theory.lazy_beta(p)),
        "ensemble_size": {v: theory.theory_ensemble_size(p.t_horizon, p.delta, v, p.a_count)
                          for v in ("rerandomized", "incremental", "lazy")},
        "gamma2": gamma2,
        "regret_envelope": theory.regret_envelope(p, gamma2),
    }
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="acbandit", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one configuration over its replicates")
    p.add_argument("config", help="JSON experiment config")
    p.add_argument("-o", "--output", help="CSV path (default: config output, else stdout)")
    p.add_argument("--svg", help="also plot mean regret to this SVG")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid search over M, beta and learning rate")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.add_argument("--svg")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure2", help="ensemble-size sweep on the 50-arm MAB preset")
    p.add_argument("--oracle", choices=["exact_rls", "sgd_polyak", "both"], default="both")
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--horizon", type=int, default=harness.FIGURE2_HORIZON)
    p.add_argument("--m-grid", type=_ints, default=list(harness.FIGURE2_M_GRID))
    p.add_argument("--beta-grid", type=_floats, default=list(harness.DEFAULT_GRID))
    p.add_argument("--lr-grid", type=_floats, default=list(harness.DEFAULT_GRID))
    p.add_argument("--master-seed", type=int, default=0)
    p.add_argument("--out-dir", default="figure2_out")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.set_defaults(func=cmd_figure2)

    p = sub.add_parser("verify", help="run the statistical and deterministic checks")
    p.add_argument("--quick", action="store_true", help="smaller trial counts")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("envelope", help="print theory constants for given bounds")
    p.add_argument("--horizon", "-T", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--a-count", "-A", type=int, default=1)
    p.add_argument("--b-bound", "-B", type=float, default=1.0)
    p.add_argument("--w-bound", "-W", type=float, default=1.0)
    p.add_argument("--sigma-noise", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--gamma2", type=float, default=None, help="defaults to theory_beta")
    p.set_defaults(func=cmd_envelope)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
