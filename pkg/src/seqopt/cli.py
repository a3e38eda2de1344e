"""
Command-line front end.

Subcommands::

    solve      multi-start solve of one (problem, Z) configuration
    repro      all four (problem x Z-pair) configurations plus summary tables
    gen-ref    Gold / FZC / Sarwate reference sequences
    eval       SNR and correlation metrics of sequence files
    kkt-check  first-order certificate of a stored solution

Exit codes: 0 success, 1 usage, 2 validation or parse error, 3 numerical
failure (no converged trial, KKT residual above threshold).
"""

import argparse
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import TOL_FEAS, decompose, lift_to_real, sequences_from_vector
from .constraints import feasibility_report
from .errors import DegenerateInstanceError, FeasibilityError, InvalidInstanceError, ParseError, SeqOptError, ShapeError
from .files import (
    TRIAL_COLUMNS,
    fmt,
    read_config,
    read_sequences,
    to_string,
    trial_row,
    write_manifest,
    write_sequences,
    write_table,
)
from .kkt import TOL_KKT, kkt_report, kkt_report_p2
from .metrics import correlation_metrics
from .objective import SnrParams, average_snr_metric, min_snr_metric, per_user_costs, uniform_weights
from .refseq import FAMILIES, FamilyConfig, generate
from .solver import PARAMETERIZATIONS, ProblemInstance, SolverConfig, multi_start

log = logging.getLogger("seqopt")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3
REPRO_CONFIGS = (("p1", 1.0, 2.0), ("p1", 2.0, 1.0), ("p2", 1.0, 2.0), ("p2", 2.0, 1.0))
SUMMARY_COLUMNS = (
    "problem",
    "zac",
    "zcc",
    "starts",
    "converged",
    "max_e1",
    "max_e2",
    "min_e3",
    "best_trial",
    "best_ave_snr",
    "best_min_snr",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _poly_pair(text):
    parts = [p for p in text.split(";") if p.strip()]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two exponent lists separated by ';', e.g. 5,2,0;5,4,3,2,0")
    return tuple(_int_list(p) for p in parts)


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_common(p):
    p.add_argument("--config", metavar="FILE", help="key=value file with defaults for any flag")
    p.add_argument("-q", "--quiet", action="store_true", help="suppress the per-trial log")


def _add_weights(p):
    p.add_argument("--zac", type=float, default=1.0, help="diagonal weight Z_AC (default 1)")
    p.add_argument("--zcc", type=float, default=2.0, help="off-diagonal weight Z_CC (default 2)")


def _add_noise(p):
    p.add_argument(
        "--noise", type=float, default=0.0, metavar="N0_2PT",
        help="AWGN term N0/(2PT) added to the SNR denominators (default 0: noise ignored)",
    )


def _add_solver(p, starts):
    p.add_argument("--n", type=int, default=31, help="sequence length N (default 31)")
    p.add_argument("--k", type=int, default=4, help="number of users K (default 4)")
    p.add_argument("--starts", type=int, default=starts, help=f"random starts (default {starts})")
    p.add_argument("--seed", type=_seed, default=0, help="base seed (default 0)")
    p.add_argument("--max-iterations", type=int, default=SolverConfig.max_iterations)
    p.add_argument("--constraint-tol", type=float, default=1e-9)
    p.add_argument("--stationarity-tol", type=float, default=1e-6)
    p.add_argument("--parameterization", choices=PARAMETERIZATIONS, default="eliminated")
    _add_noise(p)


def build_parser():
    parser = _Parser(prog="seqopt", description="Spreading-sequence design by spectral-domain optimization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    subs = {}

    p = sub.add_parser("solve", help="multi-start solve of one configuration")
    p.add_argument("--problem", choices=("p1", "p2"), default="p1", help="p1: average SNR, p2: minimum SNR")
    _add_weights(p)
    _add_solver(p, starts=1)
    p.add_argument("--out", metavar="DIR", default="seqopt_out", help="output directory")
    _add_common(p)
    subs["solve"] = p

    p = sub.add_parser("repro", help="run the four (problem, Z) configurations and summarize")
    _add_solver(p, starts=200)
    p.add_argument("--out", metavar="DIR", default="seqopt_repro", help="output directory")
    _add_common(p)
    subs["repro"] = p

    p = sub.add_parser("gen-ref", help="generate a reference sequence family")
    p.add_argument("--family", choices=FAMILIES, default=None)
    p.add_argument("--n", type=int, default=31)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--shifts", type=_int_list, default=None, help="gold: member indices, e.g. 0,1,2,3")
    p.add_argument("--polynomials", type=_poly_pair, default=None, help="gold: preferred pair, e.g. '5,2,0;5,4,3,2,0'")
    p.add_argument("--roots", type=_int_list, default=None, help="fzc: roots coprime to N")
    p.add_argument("--sigma", type=_int_list, default=None, help="sarwate: distinct carriers in 0..N-1")
    p.add_argument("--out", metavar="FILE", default=None, help="sequence CSV (default stdout)")
    _add_common(p)
    subs["gen-ref"] = p

    p = sub.add_parser("eval", help="metrics of one or more sequence CSV files")
    p.add_argument("inputs", nargs="+", metavar="FILE")
    _add_weights(p)
    _add_noise(p)
    p.add_argument("--per-user", action="store_true", help="add per-user r_ac_i / r_cc_i columns")
    p.add_argument("--out", metavar="FILE", default=None, help="metrics CSV (default stdout)")
    _add_common(p)
    subs["eval"] = p

    p = sub.add_parser("kkt-check", help="first-order optimality check of a stored solution")
    p.add_argument("input", metavar="FILE", help="solution in sequence CSV format")
    p.add_argument("--problem", choices=("p1", "p2"), default="p1")
    _add_weights(p)
    p.add_argument("--tol", type=float, default=TOL_KKT, help=f"residual threshold (default {TOL_KKT:g})")
    p.add_argument("--feas-tol", type=float, default=TOL_FEAS, help=f"feasibility tolerance (default {TOL_FEAS:g})")
    p.add_argument("--activation-tol", type=float, default=None, help="active-set tolerance (default 1e-7 max(1,t))")
    _add_common(p)
    subs["kkt-check"] = p
    return parser, subs


def _apply_config(sub, path):
    try:
        values = read_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    actions = {a.dest: a for a in sub._actions}
    for key, value in values.items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise UsageError(f"{path}: unknown key {key!r}")
        if act.nargs == 0:  # store_true flags
            low = value.lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise UsageError(f"{path}: {key} expects true/false, got {value!r}")
            values[key] = low in ("1", "true", "yes")
        elif act.nargs == "+":
            values[key] = value.split()
    sub.set_defaults(**values)


def parse_args(argv=None):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("a command is required")
    if getattr(args, "config", None):
        sub = subs[args.command]
        _apply_config(sub, args.config)
        args = parser.parse_args(argv)
    return args


# ----------------------------------------------------------------------------
# helpers


def _solver_config(args):
    return SolverConfig(
        max_iterations=args.max_iterations,
        constraint_tol=args.constraint_tol,
        stationarity_tol=args.stationarity_tol,
        starts=args.starts,
        seed=args.seed,
        parameterization=args.parameterization,
    )


def _snr_params(args):
    return SnrParams(N0_over_2PT=args.noise, include_awgn=args.noise > 0)


def _snr_pair(x, Z, params):
    try:
        return average_snr_metric(x, Z, params), min_snr_metric(x, Z, params)
    except DegenerateInstanceError:
        return float("inf"), float("inf")


def vector_from_sequences(seqs, Z, kind):
    """Decision vector of a sequence set; for p2 the slack is the largest user cost."""
    x = lift_to_real(decompose(seqs))
    if kind == "p2":
        x = np.concatenate([[float(np.max(per_user_costs(x, Z)))], x])
    return x


def _manifest(command, instance, config, extra=None):
    out = {
        "command": command,
        "instance": instance,
        "config": config,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        out.update(extra)
    return out


def _run_configuration(problem, zac, zcc, args, out_dir):
    """Solve one configuration, write its files and return the summary row."""
    inst = ProblemInstance.uniform(args.n, args.k, zac, zcc, problem)
    config = _solver_config(args)
    t0 = time.perf_counter()
    reports = multi_start(inst, config)
    elapsed = time.perf_counter() - t0
    return write_configuration(out_dir, inst, config, reports, _snr_params(args), elapsed, (zac, zcc))


def write_configuration(out_dir, inst, config, reports, params=SnrParams(), elapsed=None, weights=None):
    """
    Write trials.csv, summary.csv, best_solution.csv and manifest.json for
    one solved configuration.

    Returns the summary row and the number of converged trials.
    """
    problem = inst.kind
    if weights is None:
        weights = (inst.Z[0, 0], inst.Z[0, 1] if inst.K > 1 else 0.0)
    zac, zcc = (float(w) for w in weights)
    rows = []
    for rep in reports:
        ave, mn = (rep.ave_snr, rep.min_snr)
        if params.include_awgn and np.all(np.isfinite(rep.x)):
            ave, mn = _snr_pair(rep.x, inst.Z, params)
        rows.append(trial_row(rep, ave, mn))
        log.info(
            "%s zac=%g zcc=%g trial %d: %s, %d iterations, objective %.10g, kkt %.2e",
            problem, zac, zcc, rep.trial_id, rep.status, rep.iterations, rep.objective, rep.kkt_residual,
        )

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_table(out_dir / "trials.csv", TRIAL_COLUMNS, rows)
    conv = [r for r in reports if r.converged]
    best_i = next((i for i, r in enumerate(reports) if r.best), None)
    best = reports[best_i] if best_i is not None else None
    if best is not None:
        write_sequences(out_dir / "best_solution.csv", sequences_from_vector(best.x, inst.N, inst.K, inst.has_slack))
    nan = float("nan")
    summary = [
        problem,
        fmt(zac),
        fmt(zcc),
        fmt(len(reports)),
        fmt(len(conv)),
        fmt(max((r.feasibility.e1 for r in conv), default=nan)),
        fmt(max((r.feasibility.e2 for r in conv), default=nan)),
        fmt(min((r.feasibility.e3 for r in conv), default=nan) if problem == "p2" else None),
        fmt(best.trial_id) if best is not None else "",
        rows[best_i][3] if best is not None else "",
        rows[best_i][4] if best is not None else "",
    ]
    write_table(out_dir / "summary.csv", SUMMARY_COLUMNS, [summary])
    manifest = _manifest(
        "solve",
        {"N": inst.N, "K": inst.K, "Z_AC": zac, "Z_CC": zcc, "problem": problem},
        {
            "starts": config.starts,
            "seed": config.seed,
            "max_iterations": config.max_iterations,
            "constraint_tol": config.constraint_tol,
            "stationarity_tol": config.stationarity_tol,
            "parameterization": config.parameterization,
            "noise": params.N0_over_2PT if params.include_awgn else 0.0,
        },
        {"outputs": ["trials.csv", "summary.csv"] + (["best_solution.csv"] if best is not None else [])},
    )
    write_manifest(out_dir / "manifest.json", manifest)
    if elapsed is not None:
        log.info(
            "%s zac=%g zcc=%g: %d/%d converged in %.1f s -> %s",
            problem, zac, zcc, len(conv), len(reports), elapsed, out_dir,
        )
    return summary, len(conv)


# ----------------------------------------------------------------------------
# commands


def cmd_solve(args):
    _, n_conv = _run_configuration(args.problem, args.zac, args.zcc, args, Path(args.out))
    if n_conv == 0:
        print("no trial converged", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_repro(args):
    root = Path(args.out)
    rows, total = [], 0
    for problem, zac, zcc in REPRO_CONFIGS:
        row, n_conv = _run_configuration(problem, zac, zcc, args, root / f"{problem}_zac{zac:g}_zcc{zcc:g}")
        rows.append(row)
        total += n_conv
    write_table(root / "tables.csv", SUMMARY_COLUMNS, rows)
    print(to_string(write_table, SUMMARY_COLUMNS, rows), end="")
    return EXIT_OK if total else EXIT_NUMERIC


def cmd_gen_ref(args):
    if args.family is None:
        raise UsageError("gen-ref needs --family")
    params = {"shifts": args.shifts, "polynomials": args.polynomials, "roots": args.roots, "sigma": args.sigma}
    seqs, cfg = generate(FamilyConfig(args.family, args.n, args.k, params))
    recorded = {"family": cfg.family, "N": cfg.N, "K": cfg.K, "params": {k: v for k, v in cfg.params.items()}}
    if args.out is None:
        write_sequences(sys.stdout, seqs)
        print(f"# {recorded}", file=sys.stderr)
    else:
        out = Path(args.out)
        write_sequences(out, seqs)
        write_manifest(out.with_suffix(".json"), _manifest("gen-ref", recorded, {}))
    return EXIT_OK


def cmd_eval(args):
    params = _snr_params(args)
    rows, kmax = [], 0
    for path in args.inputs:
        try:
            seqs = read_sequences(path)
        except ParseError as exc:
            raise ParseError(f"{path}: {exc}") from None
        K, N = seqs.shape
        Z = uniform_weights(K, args.zac, args.zcc)
        coeffs = decompose(seqs)
        try:
            m = correlation_metrics(coeffs)
        except FeasibilityError:
            power = np.sum(np.abs(seqs) ** 2, axis=1)
            raise FeasibilityError(f"{path}: every sequence needs power N={N}, found {power}") from None
        ave, mn = _snr_pair(lift_to_real(coeffs), Z, params)
        row = [path, fmt(N), fmt(K), fmt(ave), fmt(mn), fmt(m.r_ac), fmt(m.r_cc), fmt(m.r_ac_max), fmt(m.r_cc_max)]
        rows.append((row, m))
        kmax = max(kmax, K)
    header = ["set", "N", "K", "ave_snr", "min_snr", "r_ac", "r_cc", "r_ac_max", "r_cc_max"]
    if args.per_user:
        header += [f"r_ac_{i}" for i in range(1, kmax + 1)] + [f"r_cc_{i}" for i in range(1, kmax + 1)]
        table = []
        for row, m in rows:
            pad = [""] * (kmax - m.r_ac_per_user.size)
            table.append(row + [fmt(v) for v in m.r_ac_per_user] + pad + [fmt(v) for v in m.r_cc_per_user] + pad)
    else:
        table = [row for row, _ in rows]
    write_table(sys.stdout if args.out is None else args.out, header, table)
    return EXIT_OK


def cmd_kkt_check(args):
    seqs = read_sequences(args.input)
    K, N = seqs.shape
    Z = uniform_weights(K, args.zac, args.zcc)
    x = vector_from_sequences(seqs, Z, args.problem)
    if args.problem == "p1":
        rep = kkt_report(x, Z, "p1", tol=args.feas_tol)
    else:
        rep = kkt_report_p2(x, Z, activation_tol=args.activation_tol, tol=args.feas_tol)
    feas = feasibility_report(x, Z, args.problem)
    mult = rep.multipliers
    print(f"problem {args.problem}, N={N}, K={K}, Z_AC={args.zac:g}, Z_CC={args.zcc:g}")
    print(f"feasibility: e1={feas.e1:.3e} e2={feas.e2:.3e}" + (f" e3={feas.e3:.3e}" if feas.e3 is not None else ""))
    for k in range(K):
        lam = max(np.max(np.abs(mult.lambda1[k])), np.max(np.abs(mult.lambda2[k])))
        line = f"user {k + 1}: mu={mult.mu[k]:.10g} max|lambda|={lam:.6g}"
        if mult.nu is not None:
            line += f" nu={mult.nu[k]:.10g}"
        print(line)
    if rep.active is not None:
        print(f"active set U={sorted(rep.active.U)} (tol {rep.active.activation_tol:.3g}), sum(nu)={mult.nu.sum():.12g}")
    print(
        f"stationarity={rep.stationarity:.3e} sign={rep.sign:.3e} "
        f"complementarity={rep.complementarity:.3e} simplex={rep.simplex:.3e}"
    )
    ok = rep.residual <= args.tol
    print(f"residual={rep.residual:.3e} {'<=' if ok else '>'} tol={args.tol:g}: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "solve": cmd_solve,
    "repro": cmd_repro,
    "gen-ref": cmd_gen_ref,
    "eval": cmd_eval,
    "kkt-check": cmd_kkt_check,
}


def main(argv=None):
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"seqopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse: --help, --version, usage errors
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.WARNING if getattr(args, "quiet", False) else logging.INFO,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"seqopt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, InvalidInstanceError, ShapeError, FeasibilityError, OSError) as exc:
        print(f"seqopt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SeqOptError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"seqopt {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
