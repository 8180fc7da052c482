"""Command line interface.

Exit codes: 0 on success, 2 on validation errors, 3 when an oracle search is
infeasible. The seed falls back to the FAIRSHIFT_SEED environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .disparity import disparity_dp
from .errors import FairshiftError, InfeasibleError
from .harness import BOUND_KINDS, METRICS, DatasetSchema, emit, ingest_csv, sweep
from .bounds import LipschitzVector
from .shifts import ShiftBudget, apply_label_shift, divergence_var_omega
from .simulate import (
    ReplicatorParams,
    StrategicParams,
    dp_fair_thresholds,
    grid_threshold_policy,
    mlr_instance,
    replicator_bound,
    replicator_trajectory,
    strategic_bound,
    strategic_omega,
    strategic_target,
    unit_grid_source,
)
from .dist import outcome_stats


def _tau_grid(spec: str) -> list:
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise FairshiftError(f"bad --tau-grid {spec!r}, expected lo:hi:n") from None
    if n < 1:
        raise FairshiftError("--tau-grid needs at least one point")
    return [float(v) for v in np.linspace(lo, hi, n)]


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("FAIRSHIFT_SEED")
    return int(env) if env else 0


def _per_group_list(text: str, groups) -> dict:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != len(groups):
        raise FairshiftError(
            f"expected {len(groups)} comma-separated values for groups {list(groups)}"
        )
    return dict(zip(groups, vals))


def _budget_kind_for(bound: str) -> str:
    return {
        "dp-covariate": "var-omega",
        "dp-covariate-multi": "var-omega",
        "dp-label": "qual-rate",
        "eop-geometric": "weighted-l2",
        "eop-corners": "qual-rate",  # interval half-widths; kind tag is unused
        "lipschitz": "qual-rate",
    }[bound]


def _load_pair(args):
    schema = DatasetSchema.from_json(args.schema)
    src = ingest_csv(args.source, schema)
    tgt = None
    if getattr(args, "target", None):
        tgt = ingest_csv(args.target, schema, bin_edges=src.bin_edges)
    return schema, src, tgt


def _run_sweep(args, oracle: bool) -> int:
    schema, src, tgt = _load_pair(args)
    axis = _tau_grid(args.tau_grid)
    budget = "realized"
    lipschitz = None
    if args.budget != "realized":
        kind = _budget_kind_for(args.bound)
        budget = ShiftBudget(kind, _per_group_list(args.budget, src.dist.groups))
    if args.bound == "lipschitz":
        if not args.lipschitz:
            raise FairshiftError("--bound lipschitz needs --lipschitz lg,lh")
        lipschitz = LipschitzVector(
            _budget_kind_for(args.bound), _per_group_list(args.lipschitz, src.dist.groups)
        )
        if budget == "realized":
            raise FairshiftError("--bound lipschitz needs an explicit --budget")
    grid = sweep(
        src.dist,
        tgt.dist if tgt else None,
        src.scores,
        metric=args.metric,
        bound_kind=args.bound,
        tau_axis_g=axis,
        tau_axis_h=axis,
        budget=budget,
        oracle=oracle,
        seed=_seed(args),
        meta={"schema": schema.as_dict(), "bin_edges": src.bin_edges},
        oracle_search_budget=args.oracle_budget,
        lipschitz=lipschitz,
    )
    emit(grid, args.format, args.out)
    return 0


def _cmd_disparity(args) -> int:
    schema, src, tgt = _load_pair(args)
    axis = _tau_grid(args.tau_grid)
    from .dist import threshold_policy
    from .harness import SweepCell, SweepGrid, _metric_fn

    metric_fn = _metric_fn(args.metric)
    g0, g1 = src.dist.groups
    cells = {}
    for tg in axis:
        for th in axis:
            policy = threshold_policy(
                src.dist.feature_bins, src.dist.groups, src.scores, {g0: tg, g1: th}
            )
            d_s = metric_fn(policy, src.dist).value
            d_t = metric_fn(policy, tgt.dist).value if tgt else None
            cells[(tg, th)] = SweepCell(
                delta_source=d_s, delta_target=d_t, bound=d_s
            )
    grid = SweepGrid(
        tau_axis_g=tuple(axis),
        tau_axis_h=tuple(axis),
        metric=args.metric,
        bound_kind="none",
        seed=_seed(args),
        meta={"schema": schema.as_dict(), "bin_edges": src.bin_edges, "budget": None},
        cells=cells,
    )
    emit(grid, args.format, args.out)
    return 0


def _cmd_simulate_strategic(args) -> int:
    groups = ("g", "h")
    params = StrategicParams(
        tau={"g": args.tau_g, "h": args.tau_h},
        m={"g": args.m_g, "h": args.m_h},
        n_bins=args.bins,
    )
    source = unit_grid_source(args.bins, groups)
    target = strategic_target(source, params)
    policy = grid_threshold_policy(source, params.tau)
    d_s = disparity_dp(policy, source).value
    d_t = disparity_dp(policy, target).value
    pair = strategic_bound(params, d_s)
    omega = strategic_omega(params)
    var = divergence_var_omega(target, source)
    fm = source.feature_marginal()
    report = {
        "params": {"tau": dict(params.tau), "m": dict(params.m), "bins": params.n_bins},
        "omega_mean": {
            g: float(np.sum(fm[:, k] * omega.omega[:, k])) for k, g in enumerate(groups)
        },
        "omega_var": var,
        "delta_source": d_s,
        "delta_target": d_t,
        "bound_literal": pair.literal.bound,
        "bound_derived": pair.derived.bound,
    }
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return 0


def _cmd_simulate_replicator(args) -> int:
    groups = ("g", "h")
    q0 = _per_group_list(args.q0, groups)
    u = np.array([float(v) for v in args.utilities.split(",")]).reshape(2, 2)
    base = mlr_instance(args.bins, q0)
    policy, taus = dp_fair_thresholds(base, args.accept_rate)
    params = ReplicatorParams(utilities=u, q0=q0, steps=args.steps)
    traj = replicator_trajectory(base, policy, params)
    steps = []
    for t in range(args.steps):
        shifted = apply_label_shift(base, traj[t])
        stats = outcome_stats(policy, shifted)
        bound = replicator_bound(stats, traj[t], traj[t + 1])
        after = apply_label_shift(base, traj[t + 1])
        realized = disparity_dp(policy, after).value
        steps.append(
            {
                "q": {g: traj[t][g] for g in groups},
                "q_next": {g: traj[t + 1][g] for g in groups},
                "bound": bound.bound,
                "delta_before": bound.source_disparity,
                "delta_after": realized,
            }
        )
    report = {
        "utilities": u.tolist(),
        "thresholds": taus,
        "accept_rate": args.accept_rate,
        "steps": steps,
    }
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairshift", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_io(sp, target_required=True):
        sp.add_argument("--source", required=True)
        sp.add_argument("--target", required=target_required, default=None)
        sp.add_argument("--schema", required=True)
        sp.add_argument("--tau-grid", required=True)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", required=True)
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("disparity", help="disparity surfaces over a threshold grid")
    add_io(sp, target_required=False)
    sp.add_argument("--metric", choices=METRICS, default="dp")
    sp.set_defaults(fn=_cmd_disparity)

    for name, oracle in (("bound", False), ("sweep", False), ("oracle", True)):
        sp = sub.add_parser(
            name,
            help={
                "bound": "bound surfaces over a threshold grid",
                "sweep": "bound-vs-realized grid generation",
                "oracle": "sweep with adversarial oracle witnesses",
            }[name],
        )
        add_io(sp, target_required=(name != "bound"))
        sp.add_argument("--metric", choices=METRICS, default="dp")
        sp.add_argument("--bound", choices=BOUND_KINDS, required=True)
        sp.add_argument("--budget", default="realized")
        sp.add_argument("--lipschitz", default=None)
        sp.add_argument("--oracle-budget", type=int, default=2000)
        sp.set_defaults(fn=lambda a, _o=oracle: _run_sweep(a, _o))

    sim = sub.add_parser("simulate", help="synthetic shift generators")
    simsub = sim.add_subparsers(dest="model", required=True)

    sp = simsub.add_parser("strategic", help="strategic-response covariate shift")
    sp.add_argument("--tau-g", type=float, required=True)
    sp.add_argument("--tau-h", type=float, required=True)
    sp.add_argument("--m-g", type=float, required=True)
    sp.add_argument("--m-h", type=float, required=True)
    sp.add_argument("--bins", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_simulate_strategic)

    sp = simsub.add_parser("replicator", help="replicator-dynamics label shift")
    sp.add_argument("--q0", required=True, help="comma list, one rate per group")
    sp.add_argument("--utilities", required=True, help="U00,U01,U10,U11")
    sp.add_argument("--steps", type=int, default=1)
    sp.add_argument("--bins", type=int, default=200)
    sp.add_argument("--accept-rate", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(fn=_cmd_simulate_replicator)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InfeasibleError as exc:
        print(f"fairshift: infeasible: {exc}", file=sys.stderr)
        return 3
    except (FairshiftError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"fairshift: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
