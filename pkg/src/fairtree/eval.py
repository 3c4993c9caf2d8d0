"""Desk-scale experiment harness: reference classifier, splits, threshold sweeps.

The built-in classifier is logistic regression over one-hot encoded columns,
fitted by full-batch gradient descent with fixed defaults, so runs have no
external ML dependencies and are reproducible bit-for-bit from the recorded
configuration and seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace

import numpy as np

from . import relabel as rl
from .data import DataTable, group_counts
from .errors import ConfigError, DataError
from .metrics import fairness_report
from .tree import build

SWEEP_FORMAT = "fairtree-sweep/1"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 400
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.learning_rate <= 0:
            raise ConfigError("epochs must be >= 1 and learning_rate positive")


@dataclass
class LinearModel:
    """Logistic model over one-hot features; predicts positive at probability >= 0.5."""

    weights: np.ndarray
    bias: float
    feature_names: tuple[str, ...]
    schema_fingerprint: str
    config: TrainConfig
    losses: tuple[float, ...]

    def scores(self, table: DataTable) -> np.ndarray:
        X = one_hot(table)[0]
        return _sigmoid(X @ self.weights + self.bias)

    def predict(self, table: DataTable) -> np.ndarray:
        return self.scores(table) >= 0.5


def one_hot(table: DataTable) -> tuple[np.ndarray, tuple[str, ...]]:
    """Indicator matrix over every non-label column's outcomes, schema order."""
    blocks, names = [], []
    n = table.n_rows
    for spec in table.schema.attributes:
        if spec.name == table.schema.label.column:
            continue
        codes = table.codes(spec.name)
        block = np.zeros((n, len(spec.outcomes)))
        block[np.arange(n), codes] = 1.0
        blocks.append(block)
        names += [f"{spec.name}={o}" for o in spec.outcomes]
    return np.hstack(blocks), tuple(names)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_linear(table: DataTable, config: TrainConfig | None = None) -> LinearModel:
    """Fit by full-batch gradient descent; loss is non-increasing at the default rate."""
    config = config or TrainConfig()
    if table.n_rows < 2:
        raise DataError("training needs at least two rows")
    y = table.positive_mask.astype(float)
    if y.min() == y.max():
        raise DataError("training data has a single class")
    X, names = one_hot(table)
    n = table.n_rows
    rng = np.random.default_rng(config.seed)
    w = rng.normal(0.0, 0.01, X.shape[1])
    b = 0.0
    losses = []
    for _ in range(config.epochs):
        p = _sigmoid(X @ w + b)
        pc = np.clip(p, 1e-12, 1.0 - 1e-12)
        losses.append(float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))
        grad = p - y
        w -= config.learning_rate * (X.T @ grad) / n
        b -= config.learning_rate * float(grad.mean())
    return LinearModel(w, b, names, table.schema.fingerprint, config, tuple(losses))


# -- deterministic partitions --------------------------------------------------


def split(table: DataTable, test_fraction: float, seed: int) -> tuple[DataTable, DataTable]:
    """Seed-deterministic disjoint train/test partition."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must lie strictly between 0 and 1")
    perm = np.random.default_rng(seed).permutation(table.n_rows)
    n_test = int(round(table.n_rows * test_fraction))
    return table.subset(np.sort(perm[n_test:])), table.subset(np.sort(perm[:n_test]))


def kfold(table: DataTable, k: int, seed: int) -> list[tuple[DataTable, DataTable]]:
    """Seed-deterministic k disjoint, exhaustive (train, test) fold pairs."""
    if k < 2:
        raise ConfigError("k must be at least 2")
    if k > table.n_rows:
        raise ConfigError(f"k={k} exceeds the number of rows ({table.n_rows})")
    perm = np.random.default_rng(seed).permutation(table.n_rows)
    folds = np.array_split(perm, k)
    out = []
    for i in range(k):
        test = np.sort(folds[i])
        train = np.sort(np.concatenate([folds[j] for j in range(k) if j != i]))
        out.append((table.subset(train), table.subset(test)))
    return out


# -- sigma sweep ----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    sigma: float | None  # None marks the no-preprocessing baseline
    variant: str  # "baseline" | "raw" | "relabeled"
    dp_mean: float
    dp_std: float
    aod_mean: float
    aod_std: float
    ba_mean: float
    ba_std: float
    acc_mean: float
    acc_std: float
    folds: int


@dataclass
class SweepResult:
    rows: list[SweepRow]
    manifest: dict

    def baseline(self) -> SweepRow:
        return next(r for r in self.rows if r.variant == "baseline")

    def variant_rows(self, variant: str) -> list[SweepRow]:
        return [r for r in self.rows if r.variant == variant]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["sigma", "variant", "dp_mean", "dp_std", "aod_mean", "aod_std",
                 "ba_mean", "ba_std", "acc_mean", "acc_std", "folds"]
            )
            for r in self.rows:
                writer.writerow(
                    ["" if r.sigma is None else repr(r.sigma), r.variant,
                     repr(r.dp_mean), repr(r.dp_std), repr(r.aod_mean), repr(r.aod_std),
                     repr(r.ba_mean), repr(r.ba_std), repr(r.acc_mean), repr(r.acc_std),
                     str(r.folds)]
                )

    def manifest_json(self) -> str:
        return json.dumps(self.manifest, indent=1, sort_keys=True) + "\n"


def _metrics(labels, preds, groups) -> dict[str, float]:
    rep = fairness_report(labels, preds, groups)
    return {"dp": rep.dp, "aod": rep.aod, "ba": rep.ba, "acc": rep.acc}


def _fold_seed(seed: int, fold: int, tag: int) -> int:
    return (seed * 1_000_003 + fold * 1_009 + tag) % 2**31


def sweep(
    table: DataTable,
    criterion: str,
    sigma_grid: list[float],
    seed: int,
    train_config: TrainConfig | None = None,
    folds: int = 10,
) -> SweepResult:
    """Cross-validated relabeling sweep over the discrimination threshold.

    Per fold: grow one tree on the training portion (the tree does not depend
    on sigma), then for each sigma relabel the training data, fit the
    classifier, and evaluate on the untouched test fold ("raw") and on the
    test fold relabeled through the same tree ("relabeled"). The baseline row
    is the classifier with no preprocessing at all.
    """
    train_config = train_config or TrainConfig()
    if any(not 0.0 <= s <= 2.0 for s in sigma_grid):
        raise ConfigError("sigma grid values must lie in [0, 2]")

    per_key: dict[tuple, list[dict]] = {}
    fold_pairs = kfold(table, folds, seed)
    for f, (train, test) in enumerate(fold_pairs):
        tree = build(train, criterion)
        groups = test.favored_mask
        cfg = replace(train_config, seed=_fold_seed(train_config.seed, f, 0))

        base_model = train_linear(train, cfg)
        base_preds = base_model.predict(test)
        per_key.setdefault(("baseline", None), []).append(
            _metrics(test.positive_mask, base_preds, groups)
        )

        for i, sigma in enumerate(sigma_grid):
            p_train = rl.plan(tree, train, sigma, _fold_seed(seed, f, 100 + i))
            relabeled_train = rl.apply(p_train, train).table
            model = train_linear(relabeled_train, cfg)
            preds = model.predict(test)
            per_key.setdefault(("raw", sigma), []).append(
                _metrics(test.positive_mask, preds, groups)
            )
            p_test = rl.plan(tree, test, sigma, _fold_seed(seed, f, 500 + i))
            relabeled_test = rl.apply(p_test, test).table
            per_key.setdefault(("relabeled", sigma), []).append(
                _metrics(relabeled_test.positive_mask, preds, groups)
            )

    rows = [_aggregate("baseline", None, per_key[("baseline", None)])]
    for sigma in sigma_grid:
        for variant in ("raw", "relabeled"):
            rows.append(_aggregate(variant, sigma, per_key[(variant, sigma)]))

    manifest = {
        "format": SWEEP_FORMAT,
        "criterion": criterion,
        "sigma_grid": list(sigma_grid),
        "folds": folds,
        "seed": seed,
        "train_config": {
            "epochs": train_config.epochs,
            "learning_rate": train_config.learning_rate,
            "seed": train_config.seed,
        },
        "row_picker": rl.ROW_PICKER,
        "numpy_version": np.__version__,
        "table_fingerprint": table.fingerprint,
        "n_rows": table.n_rows,
        "group_counts": list(group_counts(table).as_tuple()),
    }
    return SweepResult(rows, manifest)


def _aggregate(variant: str, sigma: float | None, fold_metrics: list[dict]) -> SweepRow:
    def agg(key: str) -> tuple[float, float]:
        vals = np.array([m[key] for m in fold_metrics])
        return float(vals.mean()), float(vals.std())

    dp, aod, ba, acc = agg("dp"), agg("aod"), agg("ba"), agg("acc")
    return SweepRow(
        sigma, variant, dp[0], dp[1], aod[0], aod[1], ba[0], ba[1], acc[0], acc[1],
        len(fold_metrics),
    )
