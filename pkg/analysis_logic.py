"""Turns a RunConfig into cover, dimension and construction runs."""

import logging
from fractions import Fraction

from cantor import build_tree, derive_params, mass_distribution_check
from data_loader import load_rate_file, parse_depths, parse_rate, parse_target, parse_window, parse_word
from targets import DimensionEstimator, LipschitzTarget, TargetSpec, build_cover, partition_sum

logger = logging.getLogger(__name__)

PIECE_COLUMNS = ["word", "n", "lo", "hi", "length"]
DEPTH_COLUMNS = ["depth", "pieces", "s_star", "certified", "flag", "mean_length", "theory", "window_bound", "cover_flags"]


def resolve_spec(config, rate_file=None) -> TargetSpec:
    """Target and rate from the config; a rate file wins over the rate rule."""
    rate = load_rate_file(rate_file) if rate_file else parse_rate(config.rate)
    target = parse_target(config.x0 if not config.target_lipschitz else None, config.target_lipschitz)
    if isinstance(target, LipschitzTarget):
        window = parse_window(config.window)
        if not target.spot_check(window):
            logger.warning("Target %s leaves [0, 1] or breaks its Lipschitz bound on %s", target.describe(), window)
    return TargetSpec(target, rate)


def run_cover(config, depth=None, rate_file=None, exponents=()):
    """
    Builds the cover of one depth.
    Returns: (report, summary) where report is the CoverReport and summary a plain dict
    """
    window = parse_window(config.window)
    spec = resolve_spec(config, rate_file)
    n = int(depth or config.depth)
    report = build_cover(window, spec, n, config.prec_bits, config.jobs)
    summary = report.to_json()
    if exponents:
        summary["partition_sums"] = {str(Fraction(s)): partition_sum(report, s).to_json() for s in exponents}
    return report, summary


def run_dimension_study(config, depths=None, rate_file=None):
    """
    Runs the DimensionEstimator over the depth schedule.
    Returns: (depth_stats DataFrame, summary dict)
    """
    window = parse_window(config.window)
    spec = resolve_spec(config, rate_file)
    schedule = parse_depths(depths) if depths else list(config.depths)
    estimator = DimensionEstimator(window, spec, schedule, config.prec_bits, config.jobs)
    estimator.run()
    summary = estimator.get_summary()
    if summary["s_star"] is not None and not 0 < summary["s_star"] < 1:
        logger.warning("Critical exponent pinned at %s; widen the window or go deeper", summary["s_star"])
    return estimator.get_depth_stats(), summary


def run_cantor_construction(config, beta0_word, beta1_word, N, generations=1, rate_file=None, check_depths=()):
    """
    Derives parameters and grows the generation tree.
    Returns: (tree, summary) with the mass-distribution table in summary when depths are given
    """
    rate = load_rate_file(rate_file) if rate_file else parse_rate(config.rate)
    params = derive_params(
        parse_word(beta0_word),
        parse_word(beta1_word),
        Fraction(str(config.x0)),
        int(N),
        config.prec_bits,
        rate=rate,
    )
    tree = build_tree(params, generations, config.jobs)
    leaves = tree.leaves()
    summary = {
        "generations": tree.depth,
        "leaves": len(leaves),
        "leaf_order": leaves[0].order if leaves else None,
        "block_count": params.block_count,
        "M": params.M,
        "q": params.q,
        "ell": params.ell,
        "all_hits": all(leaf.certificates.get("hit") for leaf in leaves),
        "mass": str(sum((leaf.mu for leaf in leaves), Fraction(0))),
    }
    if check_depths:
        table = mass_distribution_check(tree, parse_depths(check_depths))
        summary["local_exponents"] = table.to_dict(orient="records")
    return tree, summary
