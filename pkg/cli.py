"""Command-line surface: `python cli.py <command> [flags]`.

Exit codes: 0 success, 1 betakit error, 2 digit undetermined at the precision cap,
64 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction

from analysis_logic import DEPTH_COLUMNS, PIECE_COLUMNS, resolve_spec, run_cantor_construction, run_cover, run_dimension_study
from cantor import enlarge_rate, periodic_prefix_witness
from cylinders import cylinder, length_bounds, orbit_image, walk_cylinders
from data_loader import parse_beta, parse_window, parse_word
from errors import BetakitError, BoundaryUndetermined, DomainError
from expansion import classify_zero_growth, digits_of_one, digits_of_x, zero_runs
from recurrence import maximal_extension, recurrence_time, right_endpoint_word
from targets import hit_depths
from utils import CONFIG_FILE, emit_report, load_config, log_run_history
from words import count_admissible, is_admissible, is_self_admissible

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNDETERMINED = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# --- Helpers ---
def _ceiling(args, config, n: int) -> tuple:
    """First n digits of the infinite expansion of 1 for --beta or --ceiling-word."""
    if args.ceiling_word:
        beta = parse_beta("word:" + args.ceiling_word, config.prec_bits)
    elif args.beta:
        beta = parse_beta(args.beta, config.prec_bits)
    else:
        raise DomainError("give --beta or --ceiling-word")
    return digits_of_one(beta, n + 1, config.prec_bits, config.cap_bits).star_digits(n)


def _orbit_rows(record) -> list:
    rows = []
    for k, (d, x) in enumerate(zip(record.digits, record.orbit), 1):
        lo, hi = x.decimal_bounds()
        rows.append({"k": k, "digit": d, "lo": lo, "hi": hi})
    return rows


# --- Commands ---
def cmd_expand(args, config):
    beta = parse_beta(args.beta, config.prec_bits)
    record = digits_of_x(beta, Fraction(args.x), args.n, config.prec_bits, config.cap_bits)
    return record.to_json(), _orbit_rows(record), None


def cmd_expand1(args, config):
    beta = parse_beta(args.beta, config.prec_bits)
    expansion = digits_of_one(beta, args.n, config.prec_bits, config.cap_bits)
    return expansion.to_json(), _orbit_rows(expansion.record), None


def cmd_admissible(args, config):
    w = parse_word(args.word)
    ok = is_admissible(w, _ceiling(args, config, len(w)))
    return {"word": w.to_json(), "admissible": ok}, None, None


def cmd_self_admissible(args, config):
    w = parse_word(args.word)
    report = {"word": w.to_json(), "self_admissible": is_self_admissible(w)}
    if report["self_admissible"]:
        report["right_word"] = right_endpoint_word(w).to_json()
    return report, None, None


def cmd_count(args, config):
    count = count_admissible(_ceiling(args, config, args.n), args.n)
    return {"n": args.n, "count": count}, None, None


def cmd_tau(args, config):
    info = recurrence_time(parse_word(args.word))
    return {"tau": info.tau, "full": info.is_full}, None, None


def cmd_extend(args, config):
    w = parse_word(args.word)
    extension = maximal_extension(w, args.m)
    return {"word": w.to_json(), "m": args.m, "extension": extension.to_json()}, None, None


def cmd_cylinder(args, config):
    c = cylinder(parse_word(args.word), config.prec_bits)
    report = c.to_json()
    if args.bounds:
        report["length_bounds"] = length_bounds(c).to_json()
        report["orbit_image"] = orbit_image(c).to_json()
    return report, [c.to_row()], None


def cmd_walk(args, config):
    window = parse_window(config.window)
    n = args.n or config.depth
    cylinders = list(walk_cylinders(n, window, config.prec_bits))
    report = {"window": str(window), "n": n, "count": len(cylinders), "cylinders": [c.to_json() for c in cylinders]}
    return report, [c.to_row() for c in cylinders], None


def cmd_hits(args, config):
    beta = parse_beta(args.beta, config.prec_bits)
    spec = resolve_spec(config, args.rate_file)
    records = hit_depths(beta, spec, args.n, config.prec_bits)
    rows = [r.to_row() for r in records]
    report = {"target": spec.describe(), "hits": [r.n for r in records if r.hit], "depths": rows}
    return report, rows, None


def cmd_cover(args, config):
    exponents = [Fraction(s) for s in args.sums.split(",")] if args.sums else ()
    report, summary = run_cover(config, args.depth, args.rate_file, exponents)
    return summary, report.to_rows(), PIECE_COLUMNS


def cmd_dim(args, config):
    stats, summary = run_dimension_study(config, args.depths, args.rate_file)
    if config.history_file:
        params = {"command": "dim", "window": config.window, "rate": args.rate_file or config.rate}
        params["target"] = config.target_lipschitz or config.x0
        log_run_history(params, {k: summary[k] for k in ("s_star", "theory", "window_bound", "depth")}, config.history_file)
    return summary, stats, DEPTH_COLUMNS


def cmd_cantor(args, config):
    tree, summary = run_cantor_construction(
        config, args.beta0_word, args.beta1_word, args.N, args.generations, args.rate_file, args.check_depths
    )
    if config.history_file:
        params = {"command": "cantor", "beta0_word": args.beta0_word, "beta1_word": args.beta1_word}
        params.update(N=args.N, x0=config.x0, generations=args.generations)
        results = {k: summary[k] for k in ("leaves", "leaf_order", "all_hits", "mass")}
        log_run_history(params, results, config.history_file)
    rows = [
        {"id": n.id, "word": str(n.word), "order": n.order, "generation": n.generation, "kind": n.kind, "parent": n.parent, "mu": str(n.mu)}
        for n in tree.nodes
    ]
    return {"summary": summary, "tree": tree.to_json()}, rows, None


def cmd_witness_x1(args, config):
    suffix = args.suffix
    report = {}
    if args.enlarge:
        ell_n, n, m_prev, block_len, t = (int(v) for v in args.enlarge.split(","))
        report["enlargement"] = enlarge_rate(ell_n, n, m_prev, block_len, t)
    report.update(periodic_prefix_witness(parse_word(args.word), args.z, suffix=suffix, prec=config.prec_bits))
    return report, [report], None


def cmd_zeros(args, config):
    beta = parse_beta(args.beta, config.prec_bits)
    df = zero_runs(beta, args.N, config.prec_bits, config.cap_bits)
    report = classify_zero_growth(beta, args.N, prec=config.prec_bits)
    report["runs"] = df.to_dict(orient="records")
    return report, df, None


# --- Parser ---
def _common() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default=CONFIG_FILE, help="run defaults (JSON)")
    common.add_argument("--prec-bits", type=int, dest="prec_bits")
    common.add_argument("--depth", type=int)
    common.add_argument("--window", help="lo:hi")
    common.add_argument("--x0")
    common.add_argument("--target-lipschitz", dest="target_lipschitz", help='affine "a+b*beta"')
    common.add_argument("--rate", help="alpha:A[,c:C]")
    common.add_argument("--rate-file", dest="rate_file", help="one integer l_n per line")
    common.add_argument("--jobs", type=int)
    common.add_argument("--out")
    common.add_argument("--format", choices=["json", "csv", "xlsx"])
    common.add_argument("--history", dest="history_file", help="append dim/cantor runs to this CSV")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="betakit", description="Certified beta-expansion and shrinking-target toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("expand", cmd_expand, "greedy digits of x in base beta")
    p.add_argument("--beta", required=True, help='decimal, rational, or digit word "1,1"')
    p.add_argument("--x", required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("expand1", cmd_expand1, "expansion of 1")
    p.add_argument("--beta", required=True)
    p.add_argument("--n", type=int, required=True)

    for name, func in (("admissible", cmd_admissible), ("count", cmd_count)):
        p = add(name, func, f"{name} words against the expansion of 1")
        p.add_argument("--beta")
        p.add_argument("--ceiling-word", dest="ceiling_word", help="word whose unit-equation root is the base")
        if name == "admissible":
            p.add_argument("--word", required=True)
        else:
            p.add_argument("--n", type=int, required=True)

    p = add("self-admissible", cmd_self_admissible, "self-admissibility of a word")
    p.add_argument("--word", required=True)

    p = add("tau", cmd_tau, "recurrence time")
    p.add_argument("--word", required=True)

    p = add("extend", cmd_extend, "maximal self-admissible extension")
    p.add_argument("--word", required=True)
    p.add_argument("--m", type=int, required=True)

    p = add("cylinder", cmd_cylinder, "parameter cylinder of a word")
    p.add_argument("--word", required=True)
    p.add_argument("--bounds", action="store_true", help="add length bounds and the orbit image")

    p = add("walk", cmd_walk, "cylinders of one order across a window")
    p.add_argument("--n", type=int)

    p = add("hits", cmd_hits, "depths at which the orbit of 1 hits the target")
    p.add_argument("--beta", required=True)
    p.add_argument("--n", type=int, required=True)

    p = add("cover", cmd_cover, "cover of the hitting set at one depth")
    p.add_argument("--sums", help="comma separated exponents s for partition sums")

    p = add("dim", cmd_dim, "critical exponent over a depth schedule")
    p.add_argument("--depths", help="comma separated, increasing")

    p = add("cantor", cmd_cantor, "generation tree of the Cantor construction")
    p.add_argument("--beta0-word", dest="beta0_word", required=True)
    p.add_argument("--beta1-word", dest="beta1_word", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--generations", type=int, default=1)
    p.add_argument("--check-depths", dest="check_depths", help="depths for local exponents")

    p = add("witness-x1", cmd_witness_x1, "periodic-prefix witness for the target 1")
    p.add_argument("--word", required=True)
    p.add_argument("--z", type=int, required=True)
    p.add_argument("--suffix", type=int, default=0)
    p.add_argument("--enlarge", help="ell_n,n,m_prev,block_len,t")

    p = add("zeros", cmd_zeros, "zero runs in the expansion of 1")
    p.add_argument("--beta", required=True)
    p.add_argument("--N", type=int, required=True)
    return parser


def _setup_logging(verbose: int):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(format="%(levelname)s: %(message)s", level=level, stream=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_OK

    _setup_logging(args.verbose)
    try:
        config = load_config(args.config).updated(
            prec_bits=args.prec_bits,
            depth=args.depth,
            window=args.window,
            x0=args.x0,
            target_lipschitz=args.target_lipschitz,
            rate=args.rate,
            jobs=args.jobs,
            out=args.out,
            format=args.format,
            history_file=args.history_file,
        )
        report, rows, columns = args.func(args, config)
        emit_report(report, config.format, config.out, rows=rows, columns=columns)
    except BoundaryUndetermined as e:
        sys.stderr.write(f"ERROR: {e}\n")
        return EXIT_UNDETERMINED
    except (BetakitError, OSError) as e:
        sys.stderr.write(f"ERROR: {e}\n")
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
