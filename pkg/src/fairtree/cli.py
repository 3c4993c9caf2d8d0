"""Command-line surface binding the pipeline: build, relabel, audit, report, sweep.

Each subcommand is one stage of the preprocessing pipeline, so every arrow in
the flow (data -> tree -> plan -> relabeled data -> metrics) is a separate,
auditable invocation. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import os
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path

from . import eval as ev
from . import relabel as rl
from . import tree as tr
from .data import (
    LabelSpec,
    SensitiveSpec,
    conform_to_schema,
    discretize_all,
    load_csv,
    transplant_labels,
    write_csv,
    write_schema_sidecar,
)
from .errors import ConfigError, DataError, FairtreeError, UndefinedMetricError
from .metrics import FairnessReport, fairness_report, roc_csv_rows, roc_points

OUT_DIR_ENV = "FAIRTREE_OUT"


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation settings shared by the pipeline commands."""

    data: Path
    label: LabelSpec
    sensitive: SensitiveSpec
    criterion: str = "kl"
    binning: str = "equal-frequency"
    bins: int = 4
    sigma: float = 0.0
    seed: int = 42
    out_dir: Path = Path(".")

    def __post_init__(self):
        if not 0.0 <= self.sigma <= 2.0:
            raise ConfigError(f"sigma must lie in [0, 2], got {self.sigma}")


@contextlib.contextmanager
def _locked_out_dir(out_dir: Path):
    """Guard an output directory against concurrent writers with a lockfile."""
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = out_dir / ".fairtree.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ConfigError(
            f"output directory {out_dir} is locked by another run (remove {lock} if stale)"
        ) from None
    try:
        os.close(fd)
        yield out_dir
    finally:
        lock.unlink(missing_ok=True)


def _out_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    return Path(os.environ.get(OUT_DIR_ENV, "."))


def _add_spec_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--data", required=True, help="input CSV path")
    sub.add_argument("--label", required=True, help="label column name")
    sub.add_argument("--positive", required=True, help="label value treated as positive")
    sub.add_argument("--negative", help="label value treated as negative (inferred when binary)")
    sub.add_argument("--sensitive", required=True, help="sensitive attribute column name")
    sub.add_argument("--favored", required=True, help="sensitive value of the favored group")
    sub.add_argument("--deprived", help="sensitive value of the deprived group (inferred when binary)")
    sub.add_argument("--numeric", action="append", default=[], metavar="COL",
                     help="force a column to be treated as numeric (repeatable)")
    sub.add_argument("--categorical", action="append", default=[], metavar="COL",
                     help="force a column to be treated as categorical (repeatable)")


def _add_binning_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--bins", type=int, default=4, help="bins per numeric column (default 4)")
    sub.add_argument("--binning", choices=["equal-frequency", "equal-width"],
                     default="equal-frequency", help="discretization strategy")


def _run_config(args, **overrides) -> RunConfig:
    fields = dict(
        data=Path(args.data).resolve(),
        label=LabelSpec(args.label, args.positive, args.negative),
        sensitive=SensitiveSpec(args.sensitive, args.favored, args.deprived),
        out_dir=_out_dir(args).resolve(),
    )
    for name in ("criterion", "binning", "bins", "seed"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    fields.update(overrides)
    return RunConfig(**fields)


def _load_table(args, config: RunConfig):
    return load_csv(
        config.data,
        config.label,
        config.sensitive,
        numeric_columns=tuple(args.numeric),
        categorical_columns=tuple(args.categorical),
    )


def _parse_grid(spec: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise ConfigError(f"bad grid spec {spec!r}; expected start:stop:step") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad grid spec {spec!r}; need step > 0 and stop >= start")
    values, i = [], 0
    while True:
        v = round(start + i * step, 12)
        if v > stop + 1e-9:
            break
        values.append(min(v, stop))
        i += 1
    return values


# -- subcommands ---------------------------------------------------------------


def _cmd_build(args) -> int:
    config = _run_config(args)
    table = discretize_all(_load_table(args, config), strategy=config.binning, bin_count=config.bins)
    fair_tree = tr.build(table, config.criterion, tr.BuildConfig(min_rows=args.min_rows))
    st = tr.stats(fair_tree)
    with _locked_out_dir(config.out_dir) as out:
        (out / "tree.json").write_text(tr.serialize(fair_tree), encoding="utf-8")
        (out / "stats.json").write_text(
            json.dumps(
                {"node_count": st.node_count, "sparsity": st.sparsity, "depth": st.depth},
                indent=1,
            )
            + "\n",
            encoding="utf-8",
        )
        write_schema_sidecar(table, out / "tree.schema.txt")
    print(f"tree: {out / 'tree.json'}")
    print(f"nodes={st.node_count} sparsity={st.sparsity} depth={st.depth}")
    return 0


def _cmd_relabel(args) -> int:
    fair_tree = tr.deserialize(Path(args.tree).read_text(encoding="utf-8"))
    schema = fair_tree.schema
    config = RunConfig(
        data=Path(args.data).resolve(),
        label=schema.label,
        sensitive=schema.sensitive,
        sigma=args.sigma,
        seed=args.seed,
        out_dir=_out_dir(args).resolve(),
    )
    raw = load_csv(config.data, schema.label, schema.sensitive, missing_tokens=schema.missing_tokens)
    routing = conform_to_schema(raw, schema)
    if args.from_plan:
        plan_ = rl.plan_from_json(Path(args.from_plan).read_text(encoding="utf-8"))
    else:
        plan_ = rl.plan(fair_tree, routing, config.sigma, config.seed)
    with _locked_out_dir(config.out_dir) as out:
        (out / "plan.json").write_text(rl.plan_to_json(plan_), encoding="utf-8")
        if not args.plan_only:
            relabeled = rl.apply(plan_, routing)
            output = transplant_labels(raw, relabeled.table)
            write_csv(output, out / "relabeled.csv")
            write_schema_sidecar(relabeled.table, out / "relabeled.schema.txt")
            print(f"relabeled data: {out / 'relabeled.csv'}")
    flips = sum(a.count for a in plan_.actions)
    print(f"plan: {out / 'plan.json'} (leaves={len(plan_.actions)} flips={flips})")
    return 0


def _cmd_audit(args) -> int:
    config = _run_config(args)
    table = load_csv(
        config.data,
        config.label,
        config.sensitive,
        categorical_columns=tuple([args.predictions] + args.categorical),
        numeric_columns=tuple(args.numeric),
    )
    if args.predictions not in table.schema.column_names:
        raise ConfigError(f"predictions column {args.predictions!r} not found in {args.data}")
    pred_values = table.column(args.predictions)
    lbl = table.schema.label
    bad = sorted(set(pred_values) - {lbl.positive, lbl.negative})
    if bad:
        raise DataError(f"predictions column contains non-label values {bad}")
    preds = pred_values == lbl.positive
    report = fairness_report(table.positive_mask, preds, table.favored_mask)
    print(report.to_text())
    out = config.out_dir
    if args.out or args.roc:
        with _locked_out_dir(out):
            _write_report_csv(report, out / "report.csv")
            if args.roc:
                if not args.scores:
                    raise ConfigError("--roc requires --scores naming a numeric score column")
                scores = table.floats(args.scores)
                series = roc_points(scores, table.positive_mask, table.favored_mask)
                with open(out / "roc.csv", "w", newline="", encoding="utf-8") as fh:
                    csv.writer(fh, lineterminator="\n").writerows(roc_csv_rows(series))
                print(f"roc: {out / 'roc.csv'}")
    return 0


def _write_report_csv(report: FairnessReport, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(FairnessReport.csv_header())
        writer.writerow(report.csv_row())


def _cmd_report(args) -> int:
    fair_tree = tr.deserialize(Path(args.tree).read_text(encoding="utf-8"))
    subgroups = tr.extract_subgroups(fair_tree, args.min_disc, args.top_k)
    print(f"{'No.':>4}  {'disc':>6}  {'fav+:fav- / dep+:dep-':>22}  conditions")
    for i, s in enumerate(subgroups, start=1):
        print(f"{i:>4}  {s.disc:>6.3f}  {s.tally():>22}  {s.conditions()}")
    if not subgroups:
        print("(no subgroups at or above the threshold)")
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["leaf_id", "disc", "fav_pos", "fav_neg", "dep_pos", "dep_neg", "conditions"])
            for s in subgroups:
                c = s.counts
                writer.writerow(
                    [s.leaf_id, repr(s.disc), c.fav_pos, c.fav_neg, c.dep_pos, c.dep_neg, s.conditions()]
                )
    return 0


def _cmd_sweep(args) -> int:
    config = _run_config(args)
    table = discretize_all(_load_table(args, config), strategy=config.binning, bin_count=config.bins)
    grid = _parse_grid(args.grid)
    cfg = ev.TrainConfig(epochs=args.epochs, learning_rate=args.learning_rate, seed=config.seed)
    result = ev.sweep(table, config.criterion, grid, config.seed, cfg, folds=args.folds)
    with _locked_out_dir(config.out_dir) as out:
        result.to_csv(out / "sweep.csv")
        (out / "manifest.json").write_text(result.manifest_json(), encoding="utf-8")
    base = result.baseline()
    best = min(result.variant_rows("raw"), key=lambda r: abs(r.dp_mean))
    print(f"baseline: dp={base.dp_mean:+.4f} aod={base.aod_mean:+.4f} "
          f"ba={base.ba_mean:.4f} acc={base.acc_mean:.4f}")
    print(f"best |dp| at sigma={best.sigma}: dp={best.dp_mean:+.4f} aod={best.aod_mean:+.4f} "
          f"ba={best.ba_mean:.4f} acc={best.acc_mean:.4f}")
    print(f"sweep: {out / 'sweep.csv'}")
    return 0


# -- entry point ---------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairtree",
        description="Locate discriminatory subgroups with a divergence tree and relabel them.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    b = subs.add_parser("build", help="grow a tree and write its document plus stats")
    _add_spec_args(b)
    _add_binning_args(b)
    b.add_argument("--criterion", choices=list(tr.CRITERIA), default="kl")
    b.add_argument("--min-rows", type=int, default=1, help="row floor below which a node is a leaf")
    b.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    b.set_defaults(func=_cmd_build)

    r = subs.add_parser("relabel", help="plan and apply promote/demote relabeling")
    r.add_argument("--tree", required=True, help="tree document from `build`")
    r.add_argument("--data", required=True, help="input CSV path")
    r.add_argument("--sigma", type=float, default=0.0, help="discrimination threshold in [0, 2]")
    r.add_argument("--seed", type=int, default=42, help="row selection seed")
    r.add_argument("--plan-only", action="store_true", help="emit the plan without touching data")
    r.add_argument("--from-plan", help="apply a previously emitted plan document")
    r.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    r.set_defaults(func=_cmd_relabel)

    a = subs.add_parser("audit", help="fairness report for a predictions column")
    _add_spec_args(a)
    a.add_argument("--predictions", required=True, help="column holding predicted labels")
    a.add_argument("--scores", help="column holding real-valued scores (for --roc)")
    a.add_argument("--roc", action="store_true", help="also emit per-group ROC points")
    a.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    a.set_defaults(func=_cmd_audit)

    p = subs.add_parser("report", help="list discriminatory subgroups from a tree")
    p.add_argument("--tree", required=True, help="tree document from `build`")
    p.add_argument("--min-disc", type=float, default=0.0, help="minimum discrimination")
    p.add_argument("--top-k", type=int, help="keep only the top K subgroups")
    p.add_argument("--out", help="optional CSV output path")
    p.set_defaults(func=_cmd_report)

    s = subs.add_parser("sweep", help="cross-validated threshold sweep with the built-in classifier")
    _add_spec_args(s)
    _add_binning_args(s)
    s.add_argument("--criterion", choices=list(tr.CRITERIA), default="kl")
    s.add_argument("--grid", default="0:2:0.1", help="sigma grid as start:stop:step")
    s.add_argument("--folds", type=int, default=10)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--epochs", type=int, default=400)
    s.add_argument("--learning-rate", type=float, default=0.1)
    s.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or .)")
    s.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, UndefinedMetricError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except FairtreeError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4
    except Exception:  # pragma: no cover - defensive
        traceback.print_exc()
        return 4


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
