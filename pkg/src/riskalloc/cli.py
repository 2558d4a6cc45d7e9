"""``riskalloc`` command line.

Subcommands: ``risk``, ``allocate {min-tests,min-risk,delta-min-tests,delta-min-risk}``,
``loop``, ``drift-gen`` and ``cluster``. Verbosity comes from ``RISK_ALLOC_LOG``
(off, info, debug). Errors exit non-zero and print ``error[<category>]``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

from . import allocator, io
from .drift import (DEFAULT_BINS, DriftSchedule, GroundTruthProfile, count_bins, fit_bins, generate_features,
                    generate_ground_truth, sample_cycle, stream)
from .errors import ConfigError, RiskAllocError
from .hazard import DEFAULT_UB, check_upper_bound, default_hazards, risk_per_demand, TestAllocation
from .profile import derive_profile
from .strategies import (DEFAULT_SAMPLES_PER_CYCLE, DEFAULT_SOURCE, STRATEGIES, StrategyConfig,
                         prepare_experiment, run_loop)

log = logging.getLogger("riskalloc")

DEFAULT_SEED = 0
DEFAULT_BUDGET = 200
DEFAULT_CYCLES = 100
DEFAULT_DRIFT = DriftSchedule(30, 70, 0.5, "linear")

EXIT_CODES = {
    "config": 2,
    "invalid-parameter": 2,
    "dimension": 2,
    "empty-profile": 2,
    "io": 3,
    "infeasible": 4,
    "test-failure": 5,
    "invariant": 6,
    "rounding": 7,
}


class InvariantError(RiskAllocError):
    category = "invariant"


def setup_logging() -> None:
    level = os.environ.get("RISK_ALLOC_LOG", "off").strip().lower()
    levels = {"off": logging.CRITICAL + 1, "info": logging.INFO, "debug": logging.DEBUG}
    if level not in levels:
        level = "off"
    logging.basicConfig(level=levels[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


# --- experiment configuration ---------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    bins: int = DEFAULT_BINS
    hazards: str | None = None
    ub: float = DEFAULT_UB
    budget: int = DEFAULT_BUDGET
    strategy: str = "maintain"
    drift: DriftSchedule = DEFAULT_DRIFT
    cycles: int = DEFAULT_CYCLES
    samples_per_cycle: int = DEFAULT_SAMPLES_PER_CYCLE
    initial_samples: int | None = None
    seed: int = DEFAULT_SEED
    source: str = DEFAULT_SOURCE
    target: str = DEFAULT_SOURCE
    updates_dir: str | None = None
    out: str = "records.csv"

    def strategy_config(self) -> StrategyConfig:
        return StrategyConfig(self.strategy, self.ub, self.budget)


CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}


def _coerce(name: str, value, kind, base_dir: Path | None):
    try:
        if name == "drift":
            if isinstance(value, DriftSchedule):
                return value
            if isinstance(value, dict):
                return io.drift_from_dict(value, "drift")
            path = Path(value)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return io.read_drift_json(path)
        if value is None:
            return None
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError("not an integer")
            return int(value)
        if kind is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError, RiskAllocError) as exc:
        raise ConfigError(name, f"invalid value {value!r} ({exc})") from exc


_KINDS = {"bins": int, "ub": float, "budget": int, "cycles": int, "samples_per_cycle": int,
          "initial_samples": int, "seed": int}


def validate_config(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.bins <= 0:
        raise ConfigError("bins", "must be positive")
    if not cfg.ub > 0:
        raise ConfigError("ub", "must be positive")
    if cfg.budget < 0:
        raise ConfigError("budget", "must be non-negative")
    if cfg.strategy not in STRATEGIES:
        raise ConfigError("strategy", f"must be one of {', '.join(STRATEGIES)}")
    if cfg.cycles <= 0:
        raise ConfigError("cycles", "must be positive")
    if cfg.samples_per_cycle < 0:
        raise ConfigError("samples_per_cycle", "must be non-negative")
    if cfg.initial_samples is not None and cfg.initial_samples <= 0:
        raise ConfigError("initial_samples", "must be positive")
    if cfg.seed < 0:
        raise ConfigError("seed", "must be non-negative")
    if cfg.hazards is not None and not Path(cfg.hazards).is_file():
        raise ConfigError("hazards", f"file not found: {cfg.hazards}")
    if cfg.updates_dir is not None and not Path(cfg.updates_dir).is_dir():
        raise ConfigError("updates_dir", f"directory not found: {cfg.updates_dir}")
    for name in ("source", "target"):
        value = getattr(cfg, name)
        if value.startswith("file:") and not Path(value[5:]).is_file():
            raise ConfigError(name, f"file not found: {value[5:]}")
    out_dir = Path(cfg.out).parent
    if not out_dir.is_dir():
        raise ConfigError("out", f"directory does not exist: {out_dir}")
    return cfg


def parse_config(config_file: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, then the JSON config file, then explicit flag values."""
    values: dict = {}
    base_dir = None
    if config_file is not None:
        path = Path(config_file)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config", f"{path}: expected a JSON object")
        unknown = sorted(set(data) - CONFIG_FIELDS)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        base_dir = path.parent
        values.update(data)
    for key, value in (overrides or {}).items():
        if key not in CONFIG_FIELDS:
            raise ConfigError(key, "unknown configuration key")
        if value is not None:
            values[key] = value
    coerced = {k: _coerce(k, v, _KINDS.get(k, str), base_dir) for k, v in values.items()}
    return validate_config(replace(ExperimentConfig(), **coerced))


def _ground_truth(descriptor: str, n_bins: int, seed: int, purpose: str) -> GroundTruthProfile:
    return generate_ground_truth(descriptor, n_bins, stream(seed, purpose), label=purpose)


def _load_hazards(path: str | None):
    return io.read_hazards_json(path) if path else default_hazards()


def _read_updates(directory: str):
    files = sorted(p for p in Path(directory).iterdir() if p.suffix == ".csv")
    for f in files:
        yield io.read_profile_csv(f)


def check_loop_invariants(records, cfg: ExperimentConfig) -> None:
    previous_total = None
    for r in records:
        if r.tests_added < 0:
            raise InvariantError(f"cycle {r.cycle}: negative number of added tests")
        if previous_total is not None and r.tests_total != previous_total + r.tests_added:
            raise InvariantError(f"cycle {r.cycle}: test total does not add up")
        previous_total = r.tests_total
        if cfg.strategy in ("maintain", "combined") and not check_upper_bound(r.risk_controlled, cfg.ub):
            raise InvariantError(f"cycle {r.cycle}: risk {r.risk_controlled!r} above ub {cfg.ub!r}")
        if cfg.strategy == "combined" and r.tests_added < cfg.budget:
            raise InvariantError(f"cycle {r.cycle}: fewer tests than the per-cycle budget")


def run_configured(cfg: ExperimentConfig):
    hazards = _load_hazards(cfg.hazards)
    source = _ground_truth(cfg.source, cfg.bins, cfg.seed, "source")
    target = _ground_truth(cfg.target, len(source), cfg.seed, "target")
    setup = prepare_experiment(cfg.drift, cfg.seed, source=source, target=target,
                               samples_per_cycle=cfg.samples_per_cycle, initial_samples=cfg.initial_samples)
    if cfg.updates_dir is not None:
        updates = _read_updates(cfg.updates_dir)
    else:
        updates = setup.updates(cfg.cycles)
    state = run_loop(cfg.strategy_config(), setup.initial_counts, updates, hazards, ub=cfg.ub)
    return list(state.history)


# --- subcommands -------------------------------------------------------------------

def cmd_risk(args) -> int:
    hazards = _load_hazards(args.hazards)
    profile = derive_profile(io.read_profile_csv(args.profile))
    if args.allocation:
        alloc = io.read_allocation_csv(args.allocation, hazards, len(profile))
    else:
        alloc = TestAllocation.zeros(len(hazards), len(profile))
    report = risk_per_demand(profile, hazards, alloc)
    print(f"risk_per_demand={report.total!r} tests_total={alloc.total}")
    for k, h in enumerate(hazards):
        print(f"hazard {h.id}: {float(report.contributions[k].sum())!r}")
    if args.ub is not None:
        ok = check_upper_bound(report, args.ub)
        print(f"ub={args.ub!r} within_bound={'true' if ok else 'false'}")
    return 0


def cmd_allocate(args) -> int:
    hazards = _load_hazards(args.hazards)
    profile = derive_profile(io.read_profile_csv(args.profile))
    mode = args.mode
    if mode in ("delta-min-tests", "delta-min-risk"):
        old = derive_profile(io.read_profile_csv(args.old_profile))
        existing = io.read_allocation_csv(args.existing, hazards, len(profile))
        if mode == "delta-min-tests":
            result = allocator.solve_required_tests(old, profile, hazards, existing, args.ub)
        else:
            result = allocator.solve_additional_min_risk(old, profile, hazards, existing, args.budget)
        final = existing + result
    else:
        if mode == "min-tests":
            real = allocator.solve_min_tests(profile, hazards, args.ub)
            if args.rounding == "naive":
                result = allocator.naive_round_up(real)
            else:
                result = allocator.round_min_tests(real, profile, hazards, args.ub)
        else:
            result = allocator.allocate_min_risk(profile, hazards, args.tests)
        final = result
    text = io.allocation_csv_text(result, hazards)
    if args.out:
        io.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    risk = risk_per_demand(profile, hazards, final).total
    summary = f"achieved_risk={risk!r} tests_total={result.total}"
    if mode.startswith("delta"):
        summary += f" tests_after={final.total}"
    print(summary, file=sys.stdout if args.out else sys.stderr)
    return 0


def cmd_loop(args) -> int:
    overrides = {
        "strategy": args.strategy, "ub": args.ub, "budget": args.budget, "cycles": args.cycles,
        "seed": args.seed, "drift": args.drift, "hazards": args.hazards, "out": args.out,
        "bins": args.bins, "samples_per_cycle": args.samples_per_cycle,
        "initial_samples": args.initial_samples, "source": args.source, "target": args.target,
        "updates_dir": args.updates_dir,
    }
    cfg = parse_config(args.config, overrides)
    log.info("running %s for %d cycles (seed %d)", cfg.strategy, cfg.cycles, cfg.seed)
    records = run_configured(cfg)
    if not records:
        raise ConfigError("updates_dir", "no update files found")
    io.emit_records(records, cfg.out)
    check_loop_invariants(records, cfg)
    last = records[-1]
    print(f"cycles={len(records)} tests_total={last.tests_total} risk_controlled={last.risk_controlled!r} "
          f"risk_uncontrolled={last.risk_uncontrolled!r}")
    return 0


def cmd_drift_gen(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    source = _ground_truth(args.source, args.bins, args.seed, "source")
    target = _ground_truth(args.target, len(source), args.seed, "target")
    io.write_profile_csv(out / "source.csv", source.counts)
    io.write_profile_csv(out / "target.csv", target.counts)
    drift = io.read_drift_json(args.drift) if args.drift else DEFAULT_DRIFT
    io.write_drift_json(out / "drift.json", drift)
    if args.cycles:
        updates = out / "updates"
        updates.mkdir(exist_ok=True)
        width = max(4, len(str(args.cycles - 1)))
        for t in range(args.cycles):
            counts = sample_cycle(source, target, drift.r(t), args.samples_per_cycle, stream(args.seed, "cycle", t))
            io.write_profile_csv(updates / f"cycle_{t:0{width}d}.csv", counts)
    print(f"wrote ground truths, drift schedule{' and %d update files' % args.cycles if args.cycles else ''} to {out}")
    return 0


def cmd_cluster(args) -> int:
    if args.features:
        data = io.read_features_csv(args.features)
    else:
        data = generate_features(args.synthetic, stream(args.seed, "features"), dim=args.dim)
        if args.features_out:
            io.write_features_csv(args.features_out, data)
    model = fit_bins(data, args.k, stream(args.seed, "kmeans"))
    io.write_features_csv(args.centroids, model.centroids)
    if args.profile_out:
        io.write_profile_csv(args.profile_out, count_bins(model, data))
    print(f"k={model.k} iterations={model.n_iter} inertia={model.inertia!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskalloc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("risk", help="risk per demand of a profile and allocation")
    p.add_argument("--profile", required=True, help="profile CSV (bin_id,count)")
    p.add_argument("--hazards", help="hazards JSON (default: the tire-blowout scenario)")
    p.add_argument("--allocation", help="allocation CSV (hazard_id,bin_id,tests); default no tests")
    p.add_argument("--ub", type=float, help="also report whether risk <= UB")
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("allocate", help="compute a test allocation")
    modes = p.add_subparsers(dest="mode", required=True)
    for name, help_text in [("min-tests", "fewest tests with risk <= UB"),
                            ("min-risk", "lowest risk for a fixed number of tests"),
                            ("delta-min-tests", "additional tests restoring risk <= UB after a profile change"),
                            ("delta-min-risk", "place a budget of additional tests after a profile change")]:
        m = modes.add_parser(name, help=help_text)
        m.add_argument("--profile", required=True, help="(new) profile CSV")
        m.add_argument("--hazards", help="hazards JSON (default: the tire-blowout scenario)")
        m.add_argument("--out", help="allocation CSV output (default stdout)")
        if name in ("min-tests", "delta-min-tests"):
            m.add_argument("--ub", type=float, required=True, help="risk upper bound per demand")
        if name == "min-tests":
            m.add_argument("--rounding", choices=("greedy", "naive"), default="greedy")
        if name == "min-risk":
            m.add_argument("--tests", type=int, required=True, help="total number of tests")
        if name.startswith("delta"):
            m.add_argument("--old-profile", required=True, help="profile the existing tests were planned for")
            m.add_argument("--existing", required=True, help="existing allocation CSV")
        if name == "delta-min-risk":
            m.add_argument("--budget", type=int, required=True, help="number of additional tests")
        m.set_defaults(func=cmd_allocate)

    p = sub.add_parser("loop", help="run the feedback loop over a drifting profile")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--ub", type=float, help=f"risk upper bound (default {DEFAULT_UB})")
    p.add_argument("--budget", type=int, help=f"tests per cycle for minimize/combined (default {DEFAULT_BUDGET})")
    p.add_argument("--cycles", type=int, help=f"number of cycles (default {DEFAULT_CYCLES})")
    p.add_argument("--seed", type=int, help=f"root seed (default {DEFAULT_SEED})")
    p.add_argument("--drift", help="drift schedule JSON")
    p.add_argument("--hazards", help="hazards JSON")
    p.add_argument("--out", help="record CSV output (default records.csv)")
    p.add_argument("--bins", type=int, help=f"number of bins for generated profiles (default {DEFAULT_BINS})")
    p.add_argument("--samples-per-cycle", type=int, dest="samples_per_cycle",
                   help=f"monitored samples per cycle (default {DEFAULT_SAMPLES_PER_CYCLE})")
    p.add_argument("--initial-samples", type=int, dest="initial_samples",
                   help="sample the release profile instead of using the source ground truth")
    p.add_argument("--source", help=f"source city: dirichlet:<a>, zipf:<s> or file:<csv> (default {DEFAULT_SOURCE})")
    p.add_argument("--target", help="target city, same forms as --source")
    p.add_argument("--updates-dir", dest="updates_dir", help="replay update CSVs from this directory")
    p.set_defaults(func=cmd_loop)

    p = sub.add_parser("drift-gen", help="generate ground-truth profiles and update streams")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--source", default=DEFAULT_SOURCE)
    p.add_argument("--target", default=DEFAULT_SOURCE)
    p.add_argument("--drift", help="drift schedule JSON (default linear ramp 30..70 to 0.5)")
    p.add_argument("--cycles", type=int, default=0, help="also write this many update files")
    p.add_argument("--samples-per-cycle", type=int, default=DEFAULT_SAMPLES_PER_CYCLE)
    p.set_defaults(func=cmd_drift_gen)

    p = sub.add_parser("cluster", help="derive bins from feature vectors with k-means")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--features", help="feature CSV, one row per vector")
    src.add_argument("--synthetic", type=int, help="generate this many synthetic feature vectors")
    p.add_argument("--dim", type=int, default=2, help="dimension of synthetic features")
    p.add_argument("--features-out", help="write the synthetic features here")
    p.add_argument("--k", type=int, default=DEFAULT_BINS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--centroids", required=True, help="centroid CSV output")
    p.add_argument("--profile-out", help="bin count CSV output")
    p.set_defaults(func=cmd_cluster)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RiskAllocError as exc:
        print(f"riskalloc: error[{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)


if __name__ == "__main__":
    sys.exit(main())
