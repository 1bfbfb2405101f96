"""Command-line interface.

    samrule binarize      mixed CSV -> binary CSV (quantile thresholds, one-hot)
    samrule bounds        complexity terms, VC bounds and sample sizes as JSON
    samrule train         sample-based learning with certificate
    samrule exact         exact solve on the full dataset
    samrule evaluate      loss of a model JSON on a dataset
    samrule shatter-check brute-force shattering of the block-diagonal construction
    samrule bench         repeated train runs (and optionally the exact baseline)

Every flag can also be set through an environment variable SAMRULE_<FLAG>,
e.g. SAMRULE_SEED=7 or SAMRULE_NODE_BUDGET=100000; explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, fields

from . import complexity
from .complexity import BoundParams, GuardError
from .dataset import (
    BinaryDataset,
    ContinuousTable,
    DatasetError,
    binarize,
    load_binary_csv,
    planted_dataset,
    replicate,
)
from .rulelist import Model, RuleListError, SearchSpace
from .sampling import (
    DEFAULT_ALPHA,
    DEFAULT_DELTA,
    DEFAULT_EPSILON,
    DEFAULT_SEED,
    DEFAULT_THETA,
    evaluate_full,
    run,
)
from .solver import DEFAULT_CATALOGUE_CAP, CatalogueTooLarge, SolverOptions, solve

ENV_PREFIX = "SAMRULE_"

EXIT_OK = 0
EXIT_FAIL = 1  # check ran and failed (shatter-check)
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_BUDGET = 4  # search truncated: incumbent only, no certificate
EXIT_RESOURCE = 5  # antecedent catalogue over its cap

log = logging.getLogger("samrule")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    dataset: str | None = None
    label: str = "label"
    positive_label: str | None = None
    k: int = 3
    z: int = 1
    alpha: float | None = None  # None: DEFAULT_ALPHA, or the model's alpha for evaluate
    epsilon: float = DEFAULT_EPSILON
    theta: float = DEFAULT_THETA
    delta: float = DEFAULT_DELTA
    d: int | None = None
    seed: int = DEFAULT_SEED
    replicate: int = 1
    thresholds: int = 4
    min_support: float = 0.0
    node_budget: int | None = None
    time_budget: float | None = None
    catalogue_cap: int = DEFAULT_CATALOGUE_CAP
    threads: int = 1
    output: str | None = None
    with_exact: bool = False
    without_replacement: bool = False
    evaluate_full: bool = False
    model: str | None = None
    sample_loss: float | None = None
    a: int = 2
    runs: int = 10
    synthetic: int | None = None
    synthetic_d: int = 16
    synthetic_seed: int = 0
    noise: float = 0.05
    no_objective_bound: bool = False
    no_lookahead_bound: bool = False
    no_skip_empty: bool = False
    no_skip_equivalent: bool = False

    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            node_budget=self.node_budget,
            time_budget=self.time_budget,
            min_support=self.min_support,
            catalogue_cap=self.catalogue_cap,
            objective_bound=not self.no_objective_bound,
            lookahead_bound=not self.no_lookahead_bound,
            skip_empty_capture=not self.no_skip_empty,
            skip_equivalent_siblings=not self.no_skip_equivalent,
        )

    def space(self, d: int) -> SearchSpace:
        try:
            alpha = DEFAULT_ALPHA if self.alpha is None else self.alpha
            return SearchSpace(self.k, self.z, d, alpha)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def bound_params(self, d: int) -> BoundParams:
        try:
            return BoundParams(max(self.k, 1), self.z, d, self.epsilon, self.theta, self.delta)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def _load(config: RunConfig) -> BinaryDataset:
    if config.synthetic:
        ds, _, _ = planted_dataset(config.synthetic, config.synthetic_d, config.noise, config.synthetic_seed)
    elif config.dataset is None:
        raise UsageError("--dataset is required")
    else:
        ds = load_binary_csv(config.dataset, config.label)
    return replicate(ds, config.replicate)


def _emit(config: RunConfig, payload: dict) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# Subcommands ------------------------------------------------------------------


def cmd_binarize(config: RunConfig) -> int:
    if config.dataset is None:
        raise UsageError("--dataset is required")
    if config.thresholds < 1:
        raise UsageError("--thresholds must be >= 1")
    table = ContinuousTable.from_csv(config.dataset, config.label, config.positive_label)
    ds = replicate(binarize(table, config.thresholds), config.replicate)
    target = config.output or sys.stdout
    ds.to_csv(target, label_column=config.label)
    log.info("wrote %d rows x %d binary features", ds.n, ds.d)
    return EXIT_OK


def bounds_report(config: RunConfig, d: int) -> dict:
    params = config.bound_params(d)
    w = complexity.omega(params.k, params.z, params.d)
    report = {
        "k": params.k,
        "z": params.z,
        "d": params.d,
        "epsilon": params.epsilon,
        "theta": params.theta,
        "delta": params.delta,
        "omega": w,
        "vc_upper": complexity.vc_upper(params.k, params.z, params.d),
        "vc_lower": complexity.vc_lower(params.k, params.z, params.d),
        "m_hat": complexity.sample_size(params, w),
        "m_hat_analytic": complexity.sample_size_analytic(params, w),
    }
    if params.z == 1:
        g = complexity.growth_upper(params.k, params.d)
        report["log2_growth_upper"] = math.log2(g)
    return report


def cmd_bounds(config: RunConfig) -> int:
    d = config.d
    if d is None:
        if config.dataset is None:
            raise UsageError("bounds needs -d or --dataset")
        d = _load(config).d
    _emit(config, bounds_report(config, d))
    return EXIT_OK


def cmd_train(config: RunConfig, dataset: BinaryDataset | None = None) -> int:
    start = time.perf_counter()
    ds = dataset if dataset is not None else _load(config)
    loaded = time.perf_counter()
    result = run(
        ds,
        config.space(ds.d),
        config.bound_params(ds.d),
        seed=config.seed,
        options=config.solver_options(),
        with_replacement=not config.without_replacement,
        evaluate=config.evaluate_full,
        threads=config.threads,
    )
    payload = result.to_dict()
    payload["timing"].update(load=loaded - start, total=time.perf_counter() - start)
    _emit(config, payload)
    if result.certificate is None:
        reason = "search truncated" if not result.solver.proven_optimal else "uncertified mode"
        print(f"no certificate: {reason}", file=sys.stderr)
        return EXIT_BUDGET if not result.solver.proven_optimal else EXIT_OK
    print(result.certificate.guarantee, file=sys.stderr)
    return EXIT_OK


def cmd_exact(config: RunConfig, dataset: BinaryDataset | None = None) -> int:
    start = time.perf_counter()
    ds = dataset if dataset is not None else _load(config)
    loaded = time.perf_counter()
    result = solve(ds, config.space(ds.d), config.solver_options())
    payload = result.to_dict()
    payload["timing"] = {"load": loaded - start, "total": time.perf_counter() - start}
    _emit(config, payload)
    if not result.proven_optimal:
        print("search truncated: reporting the incumbent", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_evaluate(config: RunConfig) -> int:
    if config.model is None:
        raise UsageError("--model is required")
    try:
        with open(config.model) as fh:
            model = Model.from_json(fh.read())
    except FileNotFoundError:
        raise DatasetError(f"{config.model}: no such file") from None
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{config.model}: invalid JSON ({exc})") from None
    ds = _load(config)
    R = model.resolve(ds.feature_names)
    alpha = model.alpha if config.alpha is None else config.alpha
    ev = evaluate_full(R, ds, alpha, config.sample_loss, config.threads)
    payload = {"loss": ev.loss, "mistakes": ev.mistakes, "n": ev.n, "length": len(R), "alpha": alpha}
    if ev.deviation is not None:
        payload["deviation"] = ev.deviation
    _emit(config, payload)
    return EXIT_OK


def cmd_shatter_check(config: RunConfig) -> int:
    a, k = config.a, config.k
    if a < 1 or k < 1:
        raise UsageError("-a and -k must be >= 1")
    try:
        ds = complexity.shatter_dataset(a, k)
    except GuardError as exc:
        raise UsageError(str(exc)) from None
    shattered = complexity.verify_shattering(ds, k, 1)
    upper = complexity.vc_upper(k, 1, ds.d)
    payload = {
        "a": a,
        "k": k,
        "n": ds.n,
        "d": ds.d,
        "shattered": shattered,
        "vc_upper": upper,
        "within_upper_bound": a * k <= upper,
    }
    _emit(config, payload)
    return EXIT_OK if shattered and a * k <= upper else EXIT_FAIL


BENCH_COLUMNS = [
    "seed", "n", "m_hat", "m", "certified", "sample_solve_time", "full_solve_time",
    "sample_loss", "dataset_loss", "dataset_loss_upper", "optimal_loss", "deviation_optimal",
    "deviation_sample",
]


def bench_rows(config: RunConfig, ds: BinaryDataset) -> list[dict]:
    space = config.space(ds.d)
    params = config.bound_params(ds.d)
    options = config.solver_options()
    exact = None
    if config.with_exact:
        exact = solve(ds, space, options)
    rows = []
    for i in range(config.runs):
        seed = config.seed + i
        res = run(ds, space, params, seed=seed, options=options,
                  with_replacement=not config.without_replacement, evaluate=True,
                  threads=config.threads)
        rows.append({
            "seed": seed,
            "n": ds.n,
            "m_hat": res.plan.m_hat,
            "m": res.plan.m,
            "certified": res.certificate is not None,
            "sample_solve_time": res.solver.wall_time,
            "full_solve_time": None if exact is None else exact.wall_time,
            "sample_loss": res.sample_loss,
            "dataset_loss": res.full.loss,
            "dataset_loss_upper": None if res.certificate is None else res.certificate.dataset_loss_upper,
            "optimal_loss": None if exact is None else exact.loss,
            "deviation_optimal": None if exact is None else abs(res.full.loss - exact.loss),
            "deviation_sample": res.full.deviation,
        })
    return rows


def cmd_bench(config: RunConfig) -> int:
    ds = _load(config)
    rows = bench_rows(config, ds)
    if config.output and config.output.endswith(".json"):
        _emit(config, {"rows": rows})
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=BENCH_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if v is None else v for k, v in row.items()})
    if config.output:
        with open(config.output, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {
    "binarize": cmd_binarize,
    "bounds": cmd_bounds,
    "train": cmd_train,
    "exact": cmd_exact,
    "evaluate": cmd_evaluate,
    "shatter-check": cmd_shatter_check,
    "bench": cmd_bench,
}


# Argument parsing -------------------------------------------------------------


def _env(dest: str, default):
    return os.environ.get(ENV_PREFIX + dest.upper(), default)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _flag_env(dest: str) -> bool:
    return _env(dest, "").lower() in ("1", "true", "yes", "on")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="samrule", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, data=True, space=True, bounds=False, solver=False):
        if data:
            p.add_argument("--dataset", default=_env("dataset", None), help="CSV file")
            p.add_argument("--label", default=_env("label", "label"), help="label column name")
            p.add_argument("--replicate", type=_positive_int, default=_env("replicate", 1),
                           help="copy every row r times")
        if space:
            p.add_argument("-k", type=int, default=_env("k", 3), help="max rules")
            p.add_argument("-z", type=int, default=_env("z", 1), help="max terms per rule")
            p.add_argument("--alpha", type=float, default=_env("alpha", None), help="per-rule penalty")
        if bounds:
            p.add_argument("--epsilon", type=float, default=_env("epsilon", DEFAULT_EPSILON))
            p.add_argument("--theta", type=float, default=_env("theta", DEFAULT_THETA))
            p.add_argument("--delta", type=float, default=_env("delta", DEFAULT_DELTA))
        if solver:
            p.add_argument("--min-support", type=float, default=_env("min_support", 0.0))
            p.add_argument("--node-budget", type=int, default=_env("node_budget", None))
            p.add_argument("--time-budget", type=float, default=_env("time_budget", None))
            p.add_argument("--catalogue-cap", type=_positive_int,
                           default=_env("catalogue_cap", DEFAULT_CATALOGUE_CAP),
                           help="max candidate conditions before giving up")
            p.add_argument("--threads", type=_positive_int, default=_env("threads", 1))
            for name in ("objective-bound", "lookahead-bound", "skip-empty", "skip-equivalent"):
                dest = "no_" + name.replace("-", "_")
                p.add_argument(f"--no-{name}", dest=dest, action="store_true",
                               default=_flag_env(dest), help=f"disable the {name} pruning rule")
        p.add_argument("--seed", type=int, default=_env("seed", DEFAULT_SEED))
        p.add_argument("--output", "-o", default=_env("output", None))

    p = sub.add_parser("binarize", help="binarize a mixed CSV")
    common(p, space=False)
    p.add_argument("--thresholds", type=int, default=_env("thresholds", 4))
    p.add_argument("--positive-label", default=_env("positive_label", None))

    p = sub.add_parser("bounds", help="print bound terms as JSON")
    common(p, bounds=True)
    p.add_argument("-d", type=int, default=_env("d", None), help="feature count")

    for name in ("train", "exact", "bench"):
        p = sub.add_parser(name)
        common(p, bounds=name != "exact", solver=True)
        p.add_argument("--synthetic", type=_positive_int, default=_env("synthetic", None),
                       help="use a planted synthetic dataset with this many base rows")
        p.add_argument("--synthetic-d", type=_positive_int, default=_env("synthetic_d", 16))
        p.add_argument("--noise", type=float, default=_env("noise", 0.05))
        p.add_argument("--synthetic-seed", type=int, default=_env("synthetic_seed", 0),
                       help="generator seed of the synthetic data (independent of --seed)")
        if name != "exact":
            p.add_argument("--without-replacement", action="store_true",
                           default=_flag_env("without_replacement"),
                           help="sample without replacement (no certificate)")
        if name == "train":
            p.add_argument("--evaluate-full", action="store_true", default=_flag_env("evaluate_full"))
        if name == "bench":
            p.add_argument("--runs", type=_positive_int, default=_env("runs", 10))
            p.add_argument("--with-exact", action="store_true", default=_flag_env("with_exact"))

    p = sub.add_parser("evaluate", help="loss of a model JSON on a dataset")
    common(p, space=False)
    p.add_argument("--model", required=_env("model", None) is None, default=_env("model", None))
    p.add_argument("--alpha", type=float, default=_env("alpha", None), help="override the model's alpha")
    p.add_argument("--sample-loss", type=float, default=None)
    p.add_argument("--threads", type=_positive_int, default=_env("threads", 1))

    p = sub.add_parser("shatter-check", help="verify shattering of the block-diagonal dataset")
    p.add_argument("-a", type=int, default=_env("a", 2))
    p.add_argument("-k", type=int, default=_env("k", 2))
    p.add_argument("--output", "-o", default=_env("output", None))
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in known and v is not None})


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    config = config_from_args(ns)
    try:
        return COMMANDS[ns.command](config)
    except UsageError as exc:
        parser.error(str(exc))  # exits with EXIT_USAGE
    except (DatasetError, RuleListError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CatalogueTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except GuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
