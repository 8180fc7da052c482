"""CSV ingestion, threshold sweeps, and grid serialization.

The pipeline binns numeric features, attaches a deterministic score to every
(bin, group) cell, then evaluates disparities and bounds over a grid of
per-group policy thresholds. Everything is a pure function of
(files, schema, seed): repeated runs emit byte-identical output.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .bounds import (
    bound_dp_covariate,
    bound_dp_covariate_multiclass,
    bound_dp_label,
    bound_eop_corners,
    eop_cap,
    lipschitz_bound,
)
from .disparity import (
    disparity_dp,
    disparity_dp_multiclass,
    disparity_eo,
    disparity_eop,
)
from .dist import (
    EmpiricalDistribution,
    build_empirical,
    class_acceptance_rates,
    outcome_stats,
    threshold_policy,
)
from .errors import SupportViolationError, ValidationError
from .geometry import geometric_context, tpr_interval
from .oracle import sup_dp_covariate_shift, sup_dp_label_shift, sup_eop_covariate_shift
from .shifts import (
    ShiftBudget,
    divergence_qual_rate,
    divergence_var_omega,
)

METRICS = ("dp", "eo", "eop", "dp-multi")
BOUND_KINDS = (
    "dp-covariate",
    "dp-covariate-multi",
    "dp-label",
    "eop-corners",
    "eop-geometric",
    "lipschitz",
)
LOGISTIC_ITERATIONS = 500
LOGISTIC_STEP = 0.1


@dataclass(frozen=True)
class DatasetSchema:
    """Column layout of an input CSV: numeric features, a binary label, a group."""

    feature_columns: tuple
    bin_counts: Mapping
    label_column: str
    group_column: str
    score_column: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "feature_columns", tuple(self.feature_columns))
        object.__setattr__(self, "bin_counts", dict(self.bin_counts))
        if not self.feature_columns:
            raise ValidationError("schema declares no feature columns")
        for col in self.feature_columns:
            if self.bin_counts.get(col, 0) < 1:
                raise ValidationError(f"missing or invalid bin count for column {col!r}")

    @classmethod
    def from_json(cls, path) -> "DatasetSchema":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls(
            feature_columns=tuple(raw["feature_columns"]),
            bin_counts=dict(raw["bin_counts"]),
            label_column=raw["label_column"],
            group_column=raw["group_column"],
            score_column=raw.get("score_column"),
        )

    def as_dict(self) -> dict:
        return {
            "feature_columns": list(self.feature_columns),
            "bin_counts": dict(self.bin_counts),
            "label_column": self.label_column,
            "group_column": self.group_column,
            "score_column": self.score_column,
        }


@dataclass(frozen=True)
class IngestResult:
    """A binned distribution plus the per-(bin, group) score table."""

    dist: EmpiricalDistribution
    scores: Mapping
    bin_edges: Mapping
    logistic_weights: Optional[tuple] = None


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _fit_logistic(features: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Full-batch gradient descent on mean log-loss: fixed schedule, zero init."""
    design = np.hstack([np.ones((len(features), 1)), features])
    w = np.zeros(design.shape[1])
    for _ in range(LOGISTIC_ITERATIONS):
        grad = design.T @ (_sigmoid(design @ w) - labels) / len(labels)
        w -= LOGISTIC_STEP * grad
    return w


def ingest_csv(
    path, schema: DatasetSchema, bin_edges: Optional[Mapping] = None
) -> IngestResult:
    """Read and bin a CSV into an EmpiricalDistribution with per-cell scores.

    Features are equal-width binned over this file's observed min/max unless
    ``bin_edges`` (e.g. from a source ingest) is supplied, in which case
    out-of-range values clamp into the edge bins. With no score column, a
    logistic score is fit to the raw rows (500 full-batch iterations, step
    0.1, zero init) and evaluated at bin midpoints; both paths are
    deterministic.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: missing header row")
        needed = list(schema.feature_columns) + [schema.label_column, schema.group_column]
        if schema.score_column:
            needed.append(schema.score_column)
        for col in needed:
            if col not in reader.fieldnames:
                raise ValidationError(f"{path}: missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise ValidationError(f"{path}: no data rows")

    feats = np.empty((len(rows), len(schema.feature_columns)))
    labels = np.empty(len(rows), dtype=int)
    groups_col = []
    scores_col = np.empty(len(rows)) if schema.score_column else None
    for idx, row in enumerate(rows):
        for j, col in enumerate(schema.feature_columns):
            try:
                feats[idx, j] = float(row[col])
            except (TypeError, ValueError):
                raise ValidationError(
                    f"{path}: unparseable numeric {row[col]!r} in column {col!r}"
                ) from None
        if row[schema.label_column] not in ("0", "1"):
            raise ValidationError(
                f"{path}: non-binary label {row[schema.label_column]!r}"
            )
        labels[idx] = int(row[schema.label_column])
        if not row[schema.group_column]:
            raise ValidationError(f"{path}: empty group value on row {idx + 2}")
        groups_col.append(row[schema.group_column])
        if scores_col is not None:
            try:
                scores_col[idx] = float(row[schema.score_column])
            except (TypeError, ValueError):
                raise ValidationError(f"{path}: unparseable score on row {idx + 2}") from None

    edges = {}
    bin_ids = np.empty((len(rows), len(schema.feature_columns)), dtype=int)
    for j, col in enumerate(schema.feature_columns):
        n = schema.bin_counts[col]
        if bin_edges is not None:
            e = np.asarray(bin_edges[col], dtype=float)
        else:
            lo, hi = feats[:, j].min(), feats[:, j].max()
            e = np.linspace(lo, hi, n + 1)
        edges[col] = e
        width = e[-1] - e[0]
        if width <= 0:
            bin_ids[:, j] = 0
        else:
            bin_ids[:, j] = np.clip(
                np.floor((feats[:, j] - e[0]) / width * n).astype(int), 0, n - 1
            )

    single = len(schema.feature_columns) == 1
    all_bins = [
        (c[0] if single else c)
        for c in itertools.product(*(range(schema.bin_counts[c]) for c in schema.feature_columns))
    ]
    group_alphabet = sorted(set(groups_col))
    if len(group_alphabet) < 2:
        raise ValidationError(f"{path}: need at least two groups, found {group_alphabet}")
    records = []
    for idx in range(len(rows)):
        cell = int(bin_ids[idx, 0]) if single else tuple(int(v) for v in bin_ids[idx])
        records.append((cell, int(labels[idx]), groups_col[idx], 1.0))
    dist = build_empirical(
        records, feature_bins=all_bins, labels=(0, 1), groups=group_alphabet
    )

    scores = {}
    weights = None
    if scores_col is not None:
        acc = {}
        for idx in range(len(rows)):
            cell = int(bin_ids[idx, 0]) if single else tuple(int(v) for v in bin_ids[idx])
            key = (cell, groups_col[idx])
            tot, cnt = acc.get(key, (0.0, 0.0))
            acc[key] = (tot + scores_col[idx], cnt + 1.0)
        for cell in all_bins:
            for g in group_alphabet:
                tot, cnt = acc.get((cell, g), (0.0, 0.0))
                scores[(cell, g)] = tot / cnt if cnt else 0.0
    else:
        w = _fit_logistic(feats, labels.astype(float))
        weights = tuple(float(v) for v in w)
        mids = {col: (edges[col][:-1] + edges[col][1:]) / 2.0 for col in schema.feature_columns}
        for cell in all_bins:
            parts = (cell,) if single else cell
            x = np.array(
                [mids[col][parts[j]] for j, col in enumerate(schema.feature_columns)]
            )
            val = float(_sigmoid(np.array([w[0] + w[1:] @ x]))[0])
            for g in group_alphabet:
                scores[(cell, g)] = val

    return IngestResult(
        dist=dist,
        scores=scores,
        bin_edges={c: [float(v) for v in edges[c]] for c in schema.feature_columns},
        logistic_weights=weights,
    )


@dataclass(frozen=True)
class SweepCell:
    delta_source: float
    delta_target: Optional[float]
    bound: float
    oracle_witness: Optional[float] = None


@dataclass(frozen=True)
class SweepGrid:
    """Complete (tau_g, tau_h) grid of disparities, bounds, and optional witnesses."""

    tau_axis_g: tuple
    tau_axis_h: tuple
    metric: str
    bound_kind: str
    seed: int
    meta: Mapping
    cells: Mapping

    def __post_init__(self):
        object.__setattr__(self, "meta", dict(self.meta))
        object.__setattr__(self, "cells", dict(self.cells))
        if not self.tau_axis_g or not self.tau_axis_h:
            raise ValidationError("empty grid")
        want = {(tg, th) for tg in self.tau_axis_g for th in self.tau_axis_h}
        if set(self.cells) != want:
            raise ValidationError("grid cells do not cover the tau cross product")


def _metric_fn(metric: str):
    try:
        return {
            "dp": disparity_dp,
            "eo": disparity_eo,
            "eop": disparity_eop,
            "dp-multi": disparity_dp_multiclass,
        }[metric]
    except KeyError:
        raise ValidationError(f"unknown metric {metric!r}, expected one of {METRICS}") from None


def _source_s_weights(source: EmpiricalDistribution) -> dict:
    """Pr_S(Y=1 | x, g) per group over the full alphabet; zero-mass bins get weight 1.

    The placeholder entries never contribute: any target mass there is a
    support violation reported before the weight is used.
    """
    j1 = source._label_index(1)
    out = {}
    for k, g in enumerate(source.groups):
        mass = source.prob[:, :, k].sum(axis=1)
        s = np.ones(source.n_bins)
        pos = mass > 0
        s[pos] = source.prob[pos, j1, k] / mass[pos]
        if (s[pos] <= 0).any():
            i = int(np.flatnonzero(pos)[np.argmin(s[pos])])
            raise ValidationError(
                f"weighted-l2 needs Pr(Y=1|x,g) > 0; zero at bin "
                f"{source.feature_bins[i]!r} for group {g!r}"
            )
        out[g] = s
    return out


def _realized_budget(
    bound_kind: str, source: EmpiricalDistribution, target: EmpiricalDistribution
) -> ShiftBudget:
    if bound_kind in ("dp-covariate", "dp-covariate-multi"):
        return ShiftBudget("var-omega", divergence_var_omega(target, source))
    if bound_kind == "dp-label":
        return ShiftBudget("qual-rate", divergence_qual_rate(target, source))
    if bound_kind == "eop-geometric":
        s_w = _source_s_weights(source)
        rs, rt = source.feature_marginal(), target.feature_marginal()
        per = {}
        for k, g in enumerate(source.groups):
            off = (rs[:, k] <= 0) & (rt[:, k] > 0)
            if off.any():
                raise SupportViolationError(
                    f"target has mass outside the source support for group {g!r}"
                )
            diff = rt[:, k] - rs[:, k]
            per[g] = float(np.sqrt(np.sum(diff * diff * s_w[g])))
        return ShiftBudget("weighted-l2", per)
    raise ValidationError(f"no realized budget rule for bound kind {bound_kind!r}")


def sweep(
    source: EmpiricalDistribution,
    target: Optional[EmpiricalDistribution],
    scores: Mapping,
    metric: str,
    bound_kind: str,
    tau_axis_g: Sequence[float],
    tau_axis_h: Sequence[float],
    budget: ShiftBudget | str = "realized",
    oracle: bool = False,
    seed: int = 0,
    meta: Optional[Mapping] = None,
    oracle_search_budget: int = 2000,
    lipschitz=None,
) -> SweepGrid:
    """Evaluate disparities and bounds over the threshold cross product.

    The budget defaults to the realized divergence between target and source
    under the bound's own shift measure; a ShiftBudget may be passed instead.
    Requires exactly two groups (the grid axes are per-group thresholds).
    Deterministic given the seed: oracle streams derive from the row-major
    cell index.
    """
    if source.n_groups != 2:
        raise ValidationError("sweep grids need exactly two groups")
    if target is not None and (
        target.feature_bins != source.feature_bins or target.groups != source.groups
    ):
        raise ValidationError("target and source must share alphabets")
    axis_g = tuple(float(t) for t in tau_axis_g)
    axis_h = tuple(float(t) for t in tau_axis_h)
    if not axis_g or not axis_h:
        raise ValidationError("empty grid")
    if bound_kind not in BOUND_KINDS:
        raise ValidationError(f"unknown bound kind {bound_kind!r}, expected one of {BOUND_KINDS}")
    metric_fn = _metric_fn(metric)
    g0, g1 = source.groups

    if bound_kind in ("eop-corners", "lipschitz"):
        shift_budget = budget if isinstance(budget, ShiftBudget) else None
    elif isinstance(budget, ShiftBudget):
        shift_budget = budget
    elif budget == "realized":
        if target is None:
            raise ValidationError("a realized budget needs a target distribution")
        shift_budget = _realized_budget(bound_kind, source, target)
    else:
        raise ValidationError(f"budget must be 'realized' or a ShiftBudget, got {budget!r}")
    if bound_kind == "lipschitz":
        if lipschitz is None:
            raise ValidationError("the lipschitz bound needs an explicit LipschitzVector")
        if shift_budget is None:
            raise ValidationError("the lipschitz bound needs an explicit ShiftBudget")

    cells = {}
    cell_idx = 0
    for tg in axis_g:
        for th in axis_h:
            policy = threshold_policy(
                source.feature_bins, source.groups, scores, {g0: tg, g1: th}
            )
            d_s = metric_fn(policy, source).value
            d_t = metric_fn(policy, target).value if target is not None else None

            if bound_kind == "dp-covariate":
                report = bound_dp_covariate(outcome_stats(policy, source), shift_budget)
                bound_val = report.bound
            elif bound_kind == "dp-covariate-multi":
                report = bound_dp_covariate_multiclass(
                    class_acceptance_rates(policy, source), shift_budget
                )
                bound_val = report.bound
            elif bound_kind == "dp-label":
                report = bound_dp_label(outcome_stats(policy, source), shift_budget)
                bound_val = report.bound
            elif bound_kind == "eop-geometric":
                ctx = geometric_context(policy, source)
                lo, hi = {}, {}
                for g in source.groups:
                    iv = tpr_interval(ctx, g, shift_budget.per_group[g])
                    lo[g], hi[g] = iv.lower, iv.upper
                bound_val = min(bound_eop_corners(lo, hi), eop_cap(source.n_groups))
            elif bound_kind == "eop-corners":
                stats_s = outcome_stats(policy, source)
                if shift_budget is not None:
                    half = dict(shift_budget.per_group)
                else:
                    if target is None:
                        raise ValidationError("eop-corners needs a target or explicit budget")
                    stats_t = outcome_stats(policy, target)
                    half = {
                        g: abs((stats_t.beta_plus[g] or 0.0) - (stats_s.beta_plus[g] or 0.0))
                        for g in source.groups
                    }
                lo = {g: max((stats_s.beta_plus[g] or 0.0) - half[g], 0.0) for g in source.groups}
                hi = {g: min((stats_s.beta_plus[g] or 0.0) + half[g], 1.0) for g in source.groups}
                bound_val = min(bound_eop_corners(lo, hi), eop_cap(source.n_groups))
            else:  # lipschitz
                report = lipschitz_bound(d_s, lipschitz, shift_budget)
                bound_val = report.bound

            witness = None
            if oracle:
                cell_seed = int(
                    np.random.SeedSequence(seed, spawn_key=(cell_idx,)).generate_state(1)[0]
                )
                if bound_kind == "dp-label":
                    witness = sup_dp_label_shift(policy, source, shift_budget).v_estimate
                elif bound_kind in ("dp-covariate", "dp-covariate-multi"):
                    witness = sup_dp_covariate_shift(
                        policy,
                        source,
                        shift_budget,
                        search_budget=oracle_search_budget,
                        seed=cell_seed,
                    ).v_estimate
                elif bound_kind == "eop-geometric":
                    witness = sup_eop_covariate_shift(
                        policy,
                        source,
                        shift_budget,
                        n_samples=oracle_search_budget,
                        seed=cell_seed,
                    ).v_estimate
            cells[(tg, th)] = SweepCell(
                delta_source=float(d_s),
                delta_target=None if d_t is None else float(d_t),
                bound=float(bound_val),
                oracle_witness=witness,
            )
            cell_idx += 1

    base_meta = dict(meta or {})
    base_meta.setdefault("budget", "realized" if budget == "realized" else "explicit")
    return SweepGrid(
        tau_axis_g=axis_g,
        tau_axis_h=axis_h,
        metric=metric,
        bound_kind=bound_kind,
        seed=int(seed),
        meta=base_meta,
        cells=cells,
    )


def _f17(v: Optional[float]) -> str:
    return "" if v is None else format(float(v), ".17g")


def emit(grid: SweepGrid, fmt: str, path) -> None:
    """Serialize a grid to JSON or CSV (RFC 4180, LF endings, 17-digit floats).

    Cell order is row major over (tau_g, tau_h) regardless of how the grid
    was computed, so identical grids serialize to identical bytes.
    """
    if fmt not in ("json", "csv"):
        raise ValidationError(f"unknown format {fmt!r}")
    has_witness = any(c.oracle_witness is not None for c in grid.cells.values())
    ordered = [
        ((tg, th), grid.cells[(tg, th)]) for tg in grid.tau_axis_g for th in grid.tau_axis_h
    ]
    if fmt == "json":
        payload = {
            "meta": {
                "seed": grid.seed,
                "schema": grid.meta.get("schema"),
                "bound_kind": grid.bound_kind,
                "bin_edges": grid.meta.get("bin_edges"),
                "metric": grid.metric,
                "budget": grid.meta.get("budget"),
                "tau_axis_g": list(grid.tau_axis_g),
                "tau_axis_h": list(grid.tau_axis_h),
            },
            "cells": [
                {
                    "tau_g": tg,
                    "tau_h": th,
                    "delta_source": cell.delta_source,
                    "delta_target": cell.delta_target,
                    "bound": cell.bound,
                    **(
                        {"oracle_witness": cell.oracle_witness} if has_witness else {}
                    ),
                }
                for (tg, th), cell in ordered
            ],
        }
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        header = ["tau_g", "tau_h", "delta_source", "delta_target", "bound"]
        if has_witness:
            header.append("oracle_witness")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n", quoting=csv.QUOTE_MINIMAL)
            writer.writerow(header)
            for (tg, th), cell in ordered:
                row = [
                    _f17(tg),
                    _f17(th),
                    _f17(cell.delta_source),
                    _f17(cell.delta_target),
                    _f17(cell.bound),
                ]
                if has_witness:
                    row.append(_f17(cell.oracle_witness))
                writer.writerow(row)


def load_grid(path) -> SweepGrid:
    """Parse a grid emitted by :func:`emit` (format inferred from the extension)."""
    text_path = str(path)
    if text_path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        meta = payload["meta"]
        cells = {}
        for c in payload["cells"]:
            cells[(float(c["tau_g"]), float(c["tau_h"]))] = SweepCell(
                delta_source=c["delta_source"],
                delta_target=c.get("delta_target"),
                bound=c["bound"],
                oracle_witness=c.get("oracle_witness"),
            )
        return SweepGrid(
            tau_axis_g=tuple(meta["tau_axis_g"]),
            tau_axis_h=tuple(meta["tau_axis_h"]),
            metric=meta.get("metric", "dp"),
            bound_kind=meta["bound_kind"],
            seed=meta.get("seed", 0),
            meta={"schema": meta.get("schema"), "bin_edges": meta.get("bin_edges"),
                  "budget": meta.get("budget")},
            cells=cells,
        )
    axis_g, axis_h, cells = [], [], {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            tg, th = float(row["tau_g"]), float(row["tau_h"])
            if tg not in axis_g:
                axis_g.append(tg)
            if th not in axis_h:
                axis_h.append(th)
            cells[(tg, th)] = SweepCell(
                delta_source=float(row["delta_source"]),
                delta_target=float(row["delta_target"]) if row["delta_target"] else None,
                bound=float(row["bound"]),
                oracle_witness=(
                    float(row["oracle_witness"])
                    if row.get("oracle_witness")
                    else None
                ),
            )
    return SweepGrid(
        tau_axis_g=tuple(axis_g),
        tau_axis_h=tuple(axis_h),
        metric="dp",
        bound_kind="unknown",
        seed=0,
        meta={},
        cells=cells,
    )
