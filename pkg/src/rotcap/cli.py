"""Command-line entry point.

Exit codes: 0 success and thresholds pass, 1 run failure, 2 threshold fail
(diagnostics are still written), 3 malformed configuration (message names
the offending key).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import load_config
from .errors import ConfigError, RotcapError


def _add_config_args(p, required=True):
    p.add_argument("--config", required=required, help="TOML configuration file")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a config key (dotted path, TOML value), repeatable",
    )
    p.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rotcap",
        description="Rotating capillary fluid simulations and their "
        "quasi-geostrophic limits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-nsk", help="advance the finite-eps system")
    _add_config_args(p)

    p = sub.add_parser("simulate-qg", help="advance a limit equation")
    _add_config_args(p)
    p.add_argument("--axis", choices=("constant", "variable"), default=None)

    p = sub.add_parser("sweep-epsilon", help="run the full eps sweep plus limit")
    _add_config_args(p)

    p = sub.add_parser("lp-analyze", help="dyadic partition diagnostics")
    p.add_argument("--out", default=None)

    p = sub.add_parser("verify-commutator", help="commutator decay rates")
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=1234)

    p = sub.add_parser("reconstruct-datum", help="limit datum from the preset data")
    _add_config_args(p)

    p = sub.add_parser("diagnose", help="re-verify a finished run directory")
    p.add_argument("--run-dir", required=True)

    return parser


def _default_out(args, name):
    return args.out or os.path.join("runs", name)


def _cmd_simulate_nsk(args):
    from . import runs
    from .config import eps_values

    cfg = load_config(args.config, args.overrides)
    eps = eps_values(cfg)[0]
    outdir = _default_out(args, "nsk")
    result = runs.simulate_nsk(cfg, eps, outdir)
    if not result.ok:
        print(f"run aborted: {result.abort_reason}", file=sys.stderr)
        return 1
    ledger = result.ledger
    print(f"steps sampled: {result.times.size}  eps={eps:g}")
    print(f"energy ledger ok: {ledger.energy_ok}  "
          f"residual {ledger.energy_residual_signed:+.3e}")
    print(f"bd ledger ok: {ledger.bd_ok}  constant {ledger.bd_constant:.3f}")
    print(f"outputs in {outdir}")
    return 0 if ledger.passed() else 2


def _cmd_simulate_qg(args):
    import math

    from . import runs

    cfg = load_config(args.config, args.overrides)
    outdir = _default_out(args, "qg")
    result = runs.simulate_qg(cfg, axis=args.axis, outdir=outdir)
    if not result.ok:
        print(f"run aborted: {result.abort_reason}", file=sys.stderr)
        return 1
    e0, e1 = result.series["energy"][0], result.series["energy"][-1]
    print(f"axis={result.axis}  energy {e0:.6e} -> {e1:.6e}")
    code = 0
    if not math.isnan(result.closed_form_error):
        print(f"closed-form mode decay mismatch: {result.closed_form_error:.3e}")
        if result.closed_form_error > 1e-12:
            code = 2
    print(f"outputs in {outdir}")
    return code


def _cmd_sweep(args):
    from . import runs

    cfg = load_config(args.config, args.overrides)
    outdir = _default_out(args, "sweep")
    summary, _manifest = runs.run_sweep(cfg, outdir)
    for name, chk in sorted(summary["checks"].items()):
        print(f"{name}: {'pass' if chk.get('passed') else 'FAIL'}")
    print(f"outputs in {outdir}")
    if not summary["complete"]:
        aborted = [e for e, m in summary["members"].items() if not m["ok"]]
        print(f"incomplete sweep, aborted members: {aborted}", file=sys.stderr)
        return 1
    return 0 if summary["passed"] else 2


def _cmd_lp_analyze(args):
    from . import runs

    outdir = args.out or os.path.join("runs", "lp")
    rows, worst = runs.lp_analysis(outdir)
    print(f"{len(rows)} corpus entries, worst defect {worst:.3e}")
    print(f"report in {os.path.join(outdir, 'lp_report.csv')}")
    return 0 if worst <= 1e-10 else 2


def _cmd_verify_commutator(args):
    from . import runs

    outdir = args.out or os.path.join("runs", "commutator")
    rows, ok = runs.commutator_suite(outdir, seed=args.seed)
    for r in rows:
        tag = r["passed"] if r["passed"] else "report-only"
        print(f"{r['field']:>18} {r['regularity']:>9}  slope {r['fitted_slope']:+.3f}  "
              f"spread {r['constant_spread']:.2f}  {tag}")
    print(f"rates in {os.path.join(outdir, 'commutator_rates.csv')}")
    return 0 if ok else 2


def _cmd_reconstruct_datum(args):
    from . import runs

    cfg = load_config(args.config, args.overrides)
    outdir = _default_out(args, "datum")
    report = runs.reconstruct_datum_run(cfg, outdir)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_diagnose(args):
    from . import runs

    ok, msgs = runs.diagnose_run(args.run_dir)
    for m in msgs:
        print(m)
    return 0 if ok else 2


_COMMANDS = {
    "simulate-nsk": _cmd_simulate_nsk,
    "simulate-qg": _cmd_simulate_qg,
    "sweep-epsilon": _cmd_sweep,
    "lp-analyze": _cmd_lp_analyze,
    "verify-commutator": _cmd_verify_commutator,
    "reconstruct-datum": _cmd_reconstruct_datum,
    "diagnose": _cmd_diagnose,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    except RotcapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
