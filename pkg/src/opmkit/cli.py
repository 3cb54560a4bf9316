"""Command-line entry point: ``opmkit simulate | bandit-demo | validate``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import bandit, sim, validation

DEFAULTS = {
    "pd": [0.9, 0.8, 0.7],
    "runs": 200,
    "steps": 100,
    "seed": 0,
    "alpha": "auto",
    "prune": 1e-3,
    "merge": 3.22,
    "max_hypotheses": 100,
    "out": None,
    "format": "csv",
    "workers": 1,
}
FIELDS = ("method", "p_d", "rmse", "assoc_error", "runs", "seed")


def _parse_alpha(value) -> float | None:
    if value is None or str(value).lower() == "auto":
        return None
    return float(value)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise SystemExit(f"config {path}: expected a mapping at top level")
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = set(data) - set(DEFAULTS)
    if unknown:
        raise SystemExit(f"config {path}: unknown keys {sorted(unknown)}")
    if "pd" in data and not isinstance(data["pd"], list):
        data["pd"] = [data["pd"]]
    return data


def _resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicitly given flags."""
    opts = dict(DEFAULTS)
    opts.update(_load_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    return opts


def _fmt(x: float) -> str:
    return format(float(x), ".10g")


def format_rows(rows, fmt: str) -> str:
    records = [{"method": r.method, "p_d": _fmt(r.p_d), "rmse": _fmt(r.rmse),
                "assoc_error": _fmt(r.assoc_error), "runs": str(r.runs), "seed": str(r.seed)} for r in rows]
    if fmt == "json":
        typed = [{"method": r["method"], "p_d": float(r["p_d"]), "rmse": float(r["rmse"]),
                  "assoc_error": float(r["assoc_error"]), "runs": int(r["runs"]), "seed": int(r["seed"])}
                 for r in records]
        return json.dumps(typed, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(records)
    return buf.getvalue()


def cmd_simulate(args: argparse.Namespace) -> int:
    opts = _resolve(args)
    try:
        cfg = sim.ScenarioConfig(n_steps=int(opts["steps"]), p_d=float(opts["pd"][0]),
                                 alpha=_parse_alpha(opts["alpha"]), seed=int(opts["seed"]),
                                 prune=float(opts["prune"]), merge=float(opts["merge"]),
                                 max_hypotheses=int(opts["max_hypotheses"]))
        for p_d in opts["pd"]:
            sim.ScenarioConfig(p_d=float(p_d), alpha=cfg.alpha)
        result = sim.monte_carlo(cfg, int(opts["runs"]), [float(p) for p in opts["pd"]], int(opts["workers"]))
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = format_rows(result.rows, opts["format"])
    if opts["out"]:
        Path(opts["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    problems = sim.check_invariants(result)
    for msg in problems:
        print(f"invariant violated: {msg}", file=sys.stderr)
    return 1 if problems else 0


def cmd_bandit_demo(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    reward = np.arange(1, args.outcomes + 1, dtype=float)
    truths = [rng.dirichlet(np.ones(args.outcomes)) for _ in range(2)]
    posts = [bandit.BanditPosterior.unplayed(reward) for _ in range(2)]
    top = [args.outcomes - 1]
    for j, t in enumerate(truths):
        print(f"bandit {'AB'[j]} true outcome probabilities: {np.array2string(t, precision=3)}")
    for play in range(1, args.plays + 1):
        ebar = [bandit.max_credible_reward(p) for p in posts]
        cred = [bandit.event_credibility(p, top) for p in posts]
        choice = bandit.select_bandit(posts[0], posts[1])
        outcome = int(rng.choice(args.outcomes, p=truths[choice]))
        posts[choice] = posts[choice].observe(outcome)
        print(f"play {play:3d}: Ebar A={ebar[0]:.4f} B={ebar[1]:.4f}  "
              f"cred(top) A={cred[0]:.4f} B={cred[1]:.4f}  -> {'AB'[choice]} "
              f"outcome {outcome + 1} reward {reward[outcome]:g}")
    for j, p in enumerate(posts):
        print(f"bandit {'AB'[j]} counts {p.counts.tolist()}  E*={bandit.expected_reward_star(p)}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    results = validation.run_all(quick=args.quick)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opmkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="Monte Carlo comparison of the two outlier-robust trackers")
    s.add_argument("--config", help="YAML file with any of the options below (flags win)")
    s.add_argument("--pd", type=float, nargs="+", default=None, help="detection probabilities")
    s.add_argument("--runs", type=int, default=None)
    s.add_argument("--steps", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--alpha", default=None, help="clutter credibility, or 'auto' for 1 - p_d")
    s.add_argument("--prune", type=float, default=None)
    s.add_argument("--merge", type=float, default=None, help="squared Mahalanobis merge threshold")
    s.add_argument("--max-hypotheses", dest="max_hypotheses", type=int, default=None)
    s.add_argument("--out", default=None, help="output path (default: stdout)")
    s.add_argument("--format", choices=("csv", "json"), default=None)
    s.add_argument("--workers", type=int, default=None, help="worker processes (default 1)")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bandit-demo", help="replay two simulated bandits played by upper expected reward")
    b.add_argument("--plays", type=int, default=20)
    b.add_argument("--outcomes", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bandit_demo)

    v = sub.add_parser("validate", help="run the oracle-equivalence checks")
    v.add_argument("--quick", action="store_true", help="fewer random instances")
    v.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
