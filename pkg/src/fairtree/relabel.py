"""Promote/demote relabeling of discriminatory leaves.

A plan selects every leaf whose discrimination is positive and at or above
the threshold sigma, decides the direction from the leaf's majority class
(ties prefer promotion), computes how many rows to flip so the per-group
class rates meet, and picks those rows uniformly without replacement with a
seeded generator. Applying a plan touches only the label column.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .data import DataTable, GroupCounts, group_counts
from .errors import ConfigError, DataError, IntegrityError
from .tree import FairTree, leaf_disc, route

PLAN_FORMAT = "fairtree-plan/1"

#: Row selection RNG, recorded in plan provenance so runs are replayable.
ROW_PICKER = "numpy.Generator(PCG64)"

PROMOTE = "promote"
DEMOTE = "demote"


def _round_half_away(x: float) -> int:
    import math

    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def promote_count(counts: GroupCounts) -> int:
    """Deprived negatives to flip positive so deprived matches the favored rate.

    The nearest-integer count is clamped to availability; exact rate equality
    is generally unattainable with whole rows, so the residual discrimination
    is bounded by the rounding, at most 1/n_dep.
    """
    if counts.n_dep == 0 or counts.n_fav == 0:
        return 0
    target = counts.n_dep * counts.fav_pos / counts.n_fav - counts.dep_pos
    return min(max(_round_half_away(target), 0), counts.dep_neg)


def demote_count(counts: GroupCounts) -> int:
    """Favored positives to flip negative so favored matches the deprived negative rate."""
    if counts.n_dep == 0 or counts.n_fav == 0:
        return 0
    target = counts.n_fav * counts.dep_neg / counts.n_dep - counts.fav_neg
    return min(max(_round_half_away(target), 0), counts.fav_pos)


@dataclass(frozen=True)
class LeafAction:
    leaf_id: int
    action: str  # PROMOTE | DEMOTE
    count: int
    row_ids: tuple[int, ...]


@dataclass(frozen=True)
class RelabelPlan:
    sigma: float
    seed: int
    actions: tuple[LeafAction, ...]
    table_fingerprint: str
    tree_digest: str
    row_picker: str = ROW_PICKER

    @property
    def digest(self) -> str:
        return hashlib.sha256(plan_to_json(self).encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class RelabeledTable:
    table: DataTable
    source_fingerprint: str
    plan_digest: str


def plan(tree: FairTree, table: DataTable, sigma: float, seed: int) -> RelabelPlan:
    """Build the per-leaf relabeling actions for this tree/table pairing.

    Leaf statistics (counts, discrimination, majority) are recomputed from the
    rows of the given table routed through the tree, so the same tree can plan
    against held-out data; on its training table this reproduces the stored
    leaf counts exactly.
    """
    if not 0.0 <= sigma <= 2.0:
        raise ConfigError(f"sigma must lie in [0, 2], got {sigma}")
    leaf_of = route(tree, table)  # also checks the schema pairing
    actions: list[LeafAction] = []
    for leaf in tree.leaves():
        rows = np.nonzero(leaf_of == leaf.id)[0]
        if rows.size == 0:
            continue
        counts = group_counts(table, rows)
        disc = leaf_disc(counts)
        if disc <= 0.0 or disc < sigma:
            continue
        gc = table.gc_codes[rows]
        if counts.pos >= counts.neg:
            action, p = PROMOTE, promote_count(counts)
            candidates = rows[gc == 3]  # deprived negatives
        else:
            action, p = DEMOTE, demote_count(counts)
            candidates = rows[gc == 0]  # favored positives
        rng = np.random.default_rng([seed, leaf.id])
        selected = np.sort(rng.choice(candidates, size=p, replace=False))
        actions.append(LeafAction(leaf.id, action, p, tuple(int(r) for r in selected)))
    return RelabelPlan(float(sigma), int(seed), tuple(actions), table.fingerprint, tree.digest)


def apply(plan_: RelabelPlan, table: DataTable) -> RelabeledTable:
    """Execute a plan: flip the selected labels, leaving every other cell untouched."""
    if plan_.table_fingerprint != table.fingerprint:
        raise DataError(
            "refusing to apply: the plan was built against a different table "
            f"(plan {plan_.table_fingerprint}, table {table.fingerprint})"
        )
    positive = table.positive_mask.copy()
    favored = table.favored_mask
    for act in plan_.actions:
        for r in act.row_ids:
            if act.action == PROMOTE:
                if favored[r] or positive[r]:
                    raise IntegrityError(f"row {r}: promote target is not a deprived negative")
                positive[r] = True
            elif act.action == DEMOTE:
                if not favored[r] or not positive[r]:
                    raise IntegrityError(f"row {r}: demote target is not a favored positive")
                positive[r] = False
            else:
                raise DataError(f"unknown action {act.action!r}")
    return RelabeledTable(table.with_positive_mask(positive), table.fingerprint, plan_.digest)


def plan_to_json(plan_: RelabelPlan) -> str:
    doc = {
        "format": PLAN_FORMAT,
        "sigma": plan_.sigma,
        "seed": plan_.seed,
        "row_picker": plan_.row_picker,
        "table_fingerprint": plan_.table_fingerprint,
        "tree_digest": plan_.tree_digest,
        "actions": [
            {"leaf": a.leaf_id, "action": a.action, "count": a.count, "rows": list(a.row_ids)}
            for a in plan_.actions
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def plan_from_json(text: str) -> RelabelPlan:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed plan document: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("format") != PLAN_FORMAT:
        raise DataError(f"unsupported plan document format {doc.get('format')!r}")
    try:
        actions = tuple(
            LeafAction(int(a["leaf"]), a["action"], int(a["count"]), tuple(int(r) for r in a["rows"]))
            for a in doc["actions"]
        )
        plan_ = RelabelPlan(
            float(doc["sigma"]),
            int(doc["seed"]),
            actions,
            doc["table_fingerprint"],
            doc["tree_digest"],
            doc.get("row_picker", ROW_PICKER),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed plan document: {exc}") from exc
    for act in plan_.actions:
        if act.action not in (PROMOTE, DEMOTE):
            raise DataError(f"unknown action {act.action!r} in plan")
        if act.count != len(act.row_ids):
            raise DataError(f"leaf {act.leaf_id}: count does not match listed rows")
    return plan_
