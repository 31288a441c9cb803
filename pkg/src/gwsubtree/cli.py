"""Command-line front end.

Every report starts with the configuration that produced it, so a run can be
repeated from its output alone.  The worker count and output path are
execution details and are left out of that header: they never change the
numbers, and leaving them out keeps reports byte-identical across pool sizes.

CSV layouts (JSON always carries the superset):

    oracle       value,probability
    mc           n,reps,mean,mean_se,variance,variance_se,mean_over_n,mean_over_n_se,
                 var_over_n,var_over_n_se,mu_n,mu_n_se
    clt-test     n,reps,ks,skewness,excess_kurtosis,center,scale,var_over_n,degenerate_scale
    truncation   p,mean,var_over_n,var_over_n_se
    heavy-tail   n,variance,variance_se,var_over_n,ci_low,ci_high
    degeneracy   term,value

``sample`` writes one tree per line and ``count`` one integer per line.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, fields
from functools import partial
from typing import Sequence

from . import harness
from .degeneracy import degeneracy_summary
from .errors import GWSubtreeError, TreeParseError
from .offspring import parse_distribution, require_feasible
from .oracle import exact_moments
from .patterns import Pattern, TruncationWindow, toll_count, truncated_additive, truncated_toll
from .rng import SeededRng
from .sampler import sample_conditioned
from .trees import read_tree

COMMANDS = ("sample", "count", "oracle", "mc", "clt-test", "truncation", "heavy-tail", "degeneracy")
USAGE_ERROR = 2
_UNECHOED = ("workers", "out")


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    dist: str | None = None
    pattern: str | None = None
    n: int | None = None
    ns: tuple[int, ...] | None = None
    reps: int | None = None
    plist: tuple[int, ...] | None = None
    seed: int = 0
    workers: int = 1
    out: str | None = None
    format: str = "json"
    trees: str | None = None
    mode: str | None = None
    window: str | None = None
    example: int | None = None
    bound: int | None = None
    standardization: str | None = None

    def header(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k not in _UNECHOED}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(float(x)) for x in text.split(",") if x.strip())


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(text)
    return int(value)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gwsubtree", description="Pattern counts in conditioned Galton-Watson trees.")
    sub = parser.add_subparsers(dest="command")

    def command(name, help_text, *flags):
        p = sub.add_parser(name, help=help_text)
        p.error = parser.error
        for flag in flags:
            _FLAGS[flag](p)
        p.add_argument("--seed", type=_int, default=0)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--out")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        return p

    command("sample", "draw conditioned trees, one per line", "dist", "n", "reps")
    command("count", "count a pattern in trees read from a file", "pattern", "trees", "mode", "window")
    command("oracle", "exact moments by enumeration", "dist", "pattern", "n")
    command("mc", "Monte Carlo moments at one or more sizes", "dist", "pattern", "n", "ns", "reps")
    command("clt-test", "normality diagnostics", "dist", "pattern", "n", "reps", "standardization")
    command("truncation", "variance of tail-truncated counts", "dist", "pattern", "n", "reps", "plist")
    command("heavy-tail", "variance growth under heavy tails", "example", "ns", "reps")
    command("degeneracy", "certificate search and linear decomposition", "dist", "pattern", "bound")
    return parser


_FLAGS = {
    "dist": lambda p: p.add_argument("--dist", required=True),
    "pattern": lambda p: p.add_argument("--pattern", required=True),
    "n": lambda p: p.add_argument("--n", type=_int),
    "ns": lambda p: p.add_argument("--ns", type=_int_list),
    "reps": lambda p: p.add_argument("--reps", type=_int, required=True),
    "plist": lambda p: p.add_argument("--plist", type=_int_list, default=(1, 5, 20, 100)),
    "trees": lambda p: p.add_argument("--trees", required=True),
    "mode": lambda p: p.add_argument("--mode", choices=("toll", "total"), default="total"),
    "window": lambda p: p.add_argument("--window"),
    "example": lambda p: p.add_argument("--example", type=int, choices=(1, 2), required=True),
    "bound": lambda p: p.add_argument("--bound", type=int, default=8),
    "standardization": lambda p: p.add_argument("--standardization", choices=("self", "oracle"),
                                                default="self"),
}


def parse_config(argv: Sequence[str]) -> ExperimentConfig:
    if not argv:
        raise UsageError(f"missing command; choose one of {', '.join(COMMANDS)}")
    if argv[0] not in COMMANDS:
        raise UsageError(f"unknown command {argv[0]!r}; choose one of {', '.join(COMMANDS)}")
    ns = build_parser().parse_args(list(argv))
    known = {f.name for f in fields(ExperimentConfig)}
    return ExperimentConfig(**{k: v for k, v in vars(ns).items() if k in known})


# -- output ----------------------------------------------------------------


def _plain(obj):
    """Convert numpy scalars and tuples into JSON-ready Python values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _render(config: ExperimentConfig, result: dict, columns: Sequence[str], rows: list[Sequence]) -> str:
    if config.format == "json":
        record = {"config": _plain(config.header()), "result": _plain(result)}
        return json.dumps(record, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(_plain(config.header()), sort_keys=False) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in _plain(list(row))])
    return buf.getvalue()


def _need(value, flag):
    if value is None:
        raise UsageError(f"{flag} is required for this command")
    return value


def _sizes(config: ExperimentConfig) -> tuple[int, ...]:
    if config.ns:
        return config.ns
    return (_need(config.n, "--n"),)


# -- commands --------------------------------------------------------------


def _sample_task(gen, dist, n):
    return sample_conditioned(dist, n, gen).serialize()


def cmd_sample(config: ExperimentConfig) -> str:
    dist = parse_distribution(config.dist)
    n = _need(config.n, "--n")
    require_feasible(dist, n)
    lines = harness.map_replicates(partial(_sample_task, dist=dist, n=n), SeededRng(config.seed).child(n),
                                   config.reps, config.workers)
    return "".join(line + "\n" for line in lines)


def cmd_count(config: ExperimentConfig) -> str:
    pat = Pattern.parse(config.pattern)
    window = TruncationWindow.parse(config.window) if config.window else None
    out = []
    with open(config.trees) as fh:
        for line in fh:
            if not line.strip():
                continue
            tree = read_tree(line)
            if config.mode == "toll":
                value = truncated_toll(pat, window, tree) if window else toll_count(pat, tree)
            else:
                value = int(truncated_additive(pat, window or TruncationWindow(), tree))
            out.append(f"{value}\n")
    return "".join(out)


def cmd_oracle(config: ExperimentConfig) -> str:
    dist = parse_distribution(config.dist)
    ex = exact_moments(dist, Pattern.parse(config.pattern), _need(config.n, "--n"))
    result = {"n": ex.n, "mean": ex.mean, "variance": ex.variance, "histogram": ex.histogram}
    return _render(config, result, ("value", "probability"), list(ex.histogram.items()))


_MC_COLUMNS = ("n", "reps", "mean", "mean_se", "variance", "variance_se", "mean_over_n", "mean_over_n_se",
               "var_over_n", "var_over_n_se", "mu_n", "mu_n_se")


def cmd_mc(config: ExperimentConfig) -> str:
    dist = parse_distribution(config.dist)
    pat = Pattern.parse(config.pattern)
    sizes = _sizes(config)
    for n in sizes:
        require_feasible(dist, n)
    reports = [harness.mc_moments(dist, pat, n, config.reps, SeededRng(config.seed), config.workers)
               for n in sizes]
    rows = [asdict(r) for r in reports]
    result = {"rows": rows}
    if len(reports) > 1:
        result["stabilized"] = harness.VarianceScan(tuple(reports)).stabilized
    return _render(config, result, _MC_COLUMNS, [[row[c] for c in _MC_COLUMNS] for row in rows])


def cmd_clt(config: ExperimentConfig) -> str:
    dist = parse_distribution(config.dist)
    rep = harness.normality_test(dist, Pattern.parse(config.pattern), _need(config.n, "--n"), config.reps,
                                 SeededRng(config.seed), config.standardization, config.workers)
    result = asdict(rep)
    cols = ("n", "reps", "ks", "skewness", "excess_kurtosis", "center", "scale", "var_over_n",
            "degenerate_scale")
    return _render(config, result, cols, [[result[c] for c in cols]])


def cmd_truncation(config: ExperimentConfig) -> str:
    dist = parse_distribution(config.dist)
    rep = harness.truncation_decay(dist, Pattern.parse(config.pattern), _need(config.n, "--n"), config.plist,
                                   config.reps, SeededRng(config.seed), config.workers)
    rows = [asdict(r) for r in rep.rows]
    result = {"n": rep.n, "rows": rows, "weakly_decreasing": rep.weakly_decreasing,
              "final_ratio": rep.final_ratio}
    cols = ("p", "mean", "var_over_n", "var_over_n_se")
    return _render(config, result, cols, [[row[c] for c in cols] for row in rows])


def cmd_heavy_tail(config: ExperimentConfig) -> str:
    default_ns = {1: (1000, 10000, 100000), 2: (1000, 3000, 10000, 30000)}[config.example]
    sizes = config.ns or default_ns
    rep = harness.heavy_tail_experiment(config.example, sizes, config.reps, SeededRng(config.seed),
                                        config.workers)
    rows = [asdict(r) for r in rep.rows]
    result = {"example": rep.example, "dist": rep.dist, "pattern": rep.pattern, "rows": rows,
              "identity_holds": rep.identity_holds, "var_increasing": rep.var_increasing,
              "var_over_n_nonincreasing": rep.var_over_n_nonincreasing,
              "growth_factors": rep.growth_factors, "superlinear": rep.superlinear,
              "intervals_disjoint": rep.intervals_disjoint}
    cols = ("n", "variance", "variance_se", "var_over_n", "ci_low", "ci_high")
    return _render(config, result, cols, [[row[c] for c in cols] for row in rows])


def cmd_degeneracy(config: ExperimentConfig) -> str:
    dist = parse_distribution(config.dist)
    result = degeneracy_summary(dist, Pattern.parse(config.pattern), config.bound)
    rows = []
    cert = result["certificate"]
    if cert:
        rows += [(f"certificate.{k}", v) for k, v in cert.items()]
        rows.append(("lower_bound_coefficient", result["lower_bound_coefficient"]))
    dec = result["decomposition"]
    rows += [(f"g[{k}]", v) for k, v in dec["g"].items()]
    rows += [(f"alpha[{k}]", v) for k, v in dec["alphas"].items()]
    rows += [("residual", dec["residual"]), ("exact", dec["exact"]), ("rank_deficient", dec["rank_deficient"])]
    return _render(config, result, ("term", "value"), rows)


_HANDLERS = {
    "sample": cmd_sample,
    "count": cmd_count,
    "oracle": cmd_oracle,
    "mc": cmd_mc,
    "clt-test": cmd_clt,
    "truncation": cmd_truncation,
    "heavy-tail": cmd_heavy_tail,
    "degeneracy": cmd_degeneracy,
}


def _error_record(code: int, kind: str, message: str, **extra) -> str:
    return json.dumps({"error": {"code": code, "type": kind, "message": message, **extra}}) + "\n"


def run(config: ExperimentConfig) -> tuple[int, str]:
    """Execute one command; returns (exit status, report text)."""
    if config.command not in _HANDLERS:
        return USAGE_ERROR, _error_record(USAGE_ERROR, "UsageError", f"unknown command {config.command!r}")
    try:
        return 0, _HANDLERS[config.command](config)
    except TreeParseError as exc:
        return USAGE_ERROR, _error_record(USAGE_ERROR, type(exc).__name__, str(exc), offset=exc.offset)
    except GWSubtreeError as exc:
        return exc.exit_code, _error_record(exc.exit_code, type(exc).__name__, str(exc))
    except (UsageError, ValueError, OSError) as exc:
        return USAGE_ERROR, _error_record(USAGE_ERROR, type(exc).__name__, str(exc))


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except UsageError as exc:
        sys.stderr.write(_error_record(USAGE_ERROR, "UsageError", str(exc)))
        return USAGE_ERROR
    status, text = run(config)
    if status:
        sys.stderr.write(text)
        return status
    if config.out:
        with open(config.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
