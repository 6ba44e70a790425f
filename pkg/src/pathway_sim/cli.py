"""Command-line entry point.

Subcommands:

    validate   check a scenario config against every invariant
    intervene  plan + execute one intervention on an ad-hoc pool
    run        run scenario config(s), writing events.csv / metrics.json /
               manifest.json per scenario
    peg        evaluate a peg model over a time range, emitting t,peg CSV

Exit codes (stable for CI): 0 success, 1 usage error (bad flags, missing
file), 2 invalid config, 3 runtime numerical failure. `validate` refines
code 2 into 2 (unparseable) and 4 (parses but violates an invariant) so
the two failure classes are distinguishable.

Every command is deterministic given (argv, config contents, seed).
PATHWAY_SIM_THREADS caps how many scenarios `run` executes in parallel.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import random
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .config import load_scenario, parse_scenario
from .errors import ConfigError, ConfigParseError, PathwaySimError
from .intervention import TriggerPolicy, execute_intervention, plan_intervention
from .market import build_peg_fn, events_to_csv, run_scenario
from .peg import compute_peg_linear, load_factors_csv
from .pool import LpHolding, PoolState

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_INVARIANT = 4

_POOL_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*([ug])\s*,\s*([0-9.eE+-]+)\s*([ug])\s*$")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1."""

    def error(self, message):
        raise UsageError(message)


def _parse_pool_spec(spec: str) -> tuple[float, float]:
    """Parse '<amount>u,<amount>g' (either order) into (reserve_u, reserve_g)."""
    m = _POOL_RE.match(spec)
    if not m:
        raise UsageError(f"bad --pool spec {spec!r}, expected e.g. 20u,10g")
    sides = {m.group(2): m.group(1), m.group(4): m.group(3)}
    if set(sides) != {"u", "g"}:
        raise UsageError(f"--pool must name one u and one g amount, got {spec!r}")
    try:
        reserve_u, reserve_g = float(sides["u"]), float(sides["g"])
    except ValueError:
        raise UsageError(f"bad amounts in --pool spec {spec!r}") from None
    if reserve_u <= 0 or reserve_g <= 0:
        raise UsageError("--pool amounts must be > 0")
    return reserve_u, reserve_g


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write(path: str, text: str) -> str:
    data = text.encode()
    with open(path, "wb") as fh:
        fh.write(data)
    return _sha256(data)


@dataclass
class RunManifest:
    """What a run was asked to do and the digests of what it produced."""

    config_path: str
    seed_override: int | None
    out_dir: str
    files: dict[str, str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "config_path": self.config_path,
                "seed_override": self.seed_override,
                "out_dir": self.out_dir,
                "files": dict(sorted(self.files.items())),
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def cmd_validate(args) -> int:
    path = args.config
    if not os.path.exists(path):
        print(f"{path}: no such file", file=sys.stderr)
        return EXIT_USAGE
    try:
        with open(path) as fh:
            tree = json.load(fh)
        config = parse_scenario(tree, base_dir=os.path.dirname(os.path.abspath(path)))
    except (json.JSONDecodeError, ConfigParseError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config.validate()
        # Factor data referenced by a linear model must also be loadable.
        if config.peg_model.kind == "linear":
            factors = config.peg_model.build_factors(config.base_dir)
            for fid in config.peg_model.weights:
                if fid not in factors:
                    raise ConfigError(
                        f"peg_model.weights: factor '{fid}' has no data"
                    )
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"{path}: ok")
    return EXIT_OK


REPORT_CSV_HEADER = (
    "method,direction,p1,p2,burn_fraction,lp_burned,extract_g,extract_u,"
    "swap_out,final_g,final_u,final_price,price_error,liquidity_value_error,"
    "quote_reserve_error,dao_gain_g,dao_gain_u"
)


def cmd_intervene(args) -> int:
    reserve_u, reserve_g = _parse_pool_spec(args.pool)
    if args.peg <= 0:
        raise UsageError("--peg must be > 0")
    method = args.method.replace("-", "_")
    pool = PoolState(fee_bps=args.fee_bps)
    lp = pool.add_liquidity(reserve_g, reserve_u)
    dao = LpHolding("dao", lp)

    print(f"pool before: {pool.reserve_u}U + {pool.reserve_g}G "
          f"(price {pool.spot_price()}, liquidity {pool.liquidity_value()}U)")
    print(f"peg: {args.peg}  method: {args.method}")

    plan = plan_intervention(
        pool, args.peg, dao, TriggerPolicy(deviation_threshold=0.0), method
    )
    if plan is None or plan.burn_fraction == 0.0:
        print("no intervention needed: price already at peg")
        return EXIT_OK

    report = execute_intervention(pool, plan, dao)
    final = report.realized_final
    print(f"direction: {plan.direction}  burn fraction: {plan.burn_fraction}")
    print(f"extracted: {plan.expected_extract_g}G + {plan.expected_extract_u}U "
          f"(worth {plan.expected_extract_g + plan.expected_extract_u / plan.p1}G "
          f"or {plan.expected_extract_g * plan.p1 + plan.expected_extract_u}U at p1)")
    print(f"swap returned: {plan.expected_swap_out}")
    print(f"pool after:  {final.reserve_u}U + {final.reserve_g}G "
          f"(price {final.spot_price()}, liquidity {final.liquidity_value()}U)")
    print(f"dao gains: {report.dao_gain_g}G + {report.dao_gain_u}U")
    print(f"price error vs peg: {report.price_error}")
    print(f"liquidity value error: {report.liquidity_value_error}")
    print(f"untouched reserve error: {report.quote_reserve_error}")
    if plan.capped:
        print("note: plan was capped by available DAO LP")

    row = ",".join(
        [plan.method, plan.direction]
        + [
            repr(x)
            for x in (
                plan.p1,
                plan.p2,
                plan.burn_fraction,
                plan.lp_to_burn,
                plan.expected_extract_g,
                plan.expected_extract_u,
                plan.expected_swap_out,
                final.reserve_g,
                final.reserve_u,
                final.spot_price(),
                report.price_error,
                report.liquidity_value_error,
                report.quote_reserve_error,
                report.dao_gain_g,
                report.dao_gain_u,
            )
        ]
    )
    print(REPORT_CSV_HEADER)
    print(row)
    return EXIT_OK


def _metrics_json(metrics) -> str:
    return json.dumps(metrics.to_flat_dict(), indent=2, sort_keys=True) + "\n"


def _run_one(config_path: str, seed_override: int | None, out_dir: str) -> None:
    config = load_scenario(config_path)
    if seed_override is not None:
        config.run.seed = seed_override
    events, metrics = run_scenario(config)
    os.makedirs(out_dir, exist_ok=True)
    files = {}
    files["events.csv"] = _write(
        os.path.join(out_dir, "events.csv"), events_to_csv(events)
    )
    files["metrics.json"] = _write(
        os.path.join(out_dir, "metrics.json"), _metrics_json(metrics)
    )
    manifest = RunManifest(
        config_path=config_path,
        seed_override=seed_override,
        out_dir=out_dir,
        files=files,
    )
    _write(os.path.join(out_dir, "manifest.json"), manifest.to_json())
    print(
        f"{config_path}: {metrics.steps} steps, "
        f"{metrics.interventions_executed} interventions "
        f"({metrics.interventions_aborted} aborted), "
        f"peg RMSE {metrics.peg_rmse:.6g} -> {out_dir}"
    )


def _thread_cap() -> int:
    raw = os.environ.get("PATHWAY_SIM_THREADS", "1")
    try:
        cap = int(raw)
    except ValueError:
        raise UsageError(f"PATHWAY_SIM_THREADS must be an integer, got {raw!r}")
    if cap < 1:
        raise UsageError("PATHWAY_SIM_THREADS must be >= 1")
    return cap


def cmd_run(args) -> int:
    for path in args.config:
        if not os.path.exists(path):
            print(f"{path}: no such file", file=sys.stderr)
            return EXIT_USAGE
    if len(args.config) == 1:
        _run_one(args.config[0], args.seed, args.out)
        return EXIT_OK
    # One subdirectory per config; fan out across a capped worker pool.
    stems = [os.path.splitext(os.path.basename(p))[0] for p in args.config]
    if len(set(stems)) != len(stems):
        raise UsageError("config basenames must be unique when running several")
    workers = min(_thread_cap(), len(args.config))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_one, path, args.seed, os.path.join(args.out, stem))
            for path, stem in zip(args.config, stems)
        ]
        for future in futures:
            future.result()
    return EXIT_OK


def cmd_peg(args) -> int:
    if not os.path.exists(args.config):
        print(f"{args.config}: no such file", file=sys.stderr)
        return EXIT_USAGE
    with open(args.config) as fh:
        try:
            tree = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"{args.config}: {exc}") from None
    # The model config is the peg_model section, standalone or embedded.
    model_tree = tree.get("peg_model", tree) if isinstance(tree, dict) else tree
    scenario_like = {
        "pool": {"reserve_u": 1.0, "reserve_g": 1.0},
        "peg_model": model_tree,
        "run": {"steps": 0, "seed": 0},
    }
    config = parse_scenario(
        scenario_like, base_dir=os.path.dirname(os.path.abspath(args.config))
    )
    config.peg_model.validate()
    model_cfg = config.peg_model

    rng = random.Random(f"{args.seed}/peg")
    rows = ["t,peg"]
    if model_cfg.kind == "linear":
        model = model_cfg.build_linear_model()
        if args.factors:
            factors = load_factors_csv(args.factors)
        else:
            factors = model_cfg.build_factors(config.base_dir)
        for fid in model.weights:
            if fid not in factors:
                raise ConfigError(f"factor '{fid}' referenced by weights has no data")
        for t in range(args.t0, args.t1):
            rows.append(
                f"{t},{compute_peg_linear(model, factors, t, rng, as_of=True)!r}"
            )
    else:
        peg_fn = build_peg_fn(config, rng)
        for t in range(args.t0, args.t1):
            rows.append(f"{t},{peg_fn(t)!r}")
    text = "\n".join(rows) + "\n"
    if args.out:
        _write(args.out, text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="pathway-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check a scenario config")
    p_validate.add_argument("--config", required=True, help="scenario config path")

    p_intervene = sub.add_parser("intervene", help="run one intervention")
    p_intervene.add_argument(
        "--pool", required=True, help="pool reserves, e.g. 20u,10g"
    )
    p_intervene.add_argument("--peg", type=float, required=True, help="target price")
    p_intervene.add_argument(
        "--method",
        choices=["exact", "paper-approx"],
        default="exact",
        help="burn sizing: exact closed form or the literal half-split",
    )
    p_intervene.add_argument(
        "--fee-bps", type=int, default=0, help="swap fee in basis points"
    )

    p_run = sub.add_parser("run", help="run scenario config(s)")
    p_run.add_argument(
        "--config", action="append", required=True, help="scenario config path"
    )
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    p_run.add_argument("--out", required=True, help="output directory")

    p_peg = sub.add_parser("peg", help="emit a peg series as t,peg CSV")
    p_peg.add_argument("--config", required=True, help="peg model config path")
    p_peg.add_argument("--factors", default=None, help="factor CSV (t,factor_id,value)")
    p_peg.add_argument("--t0", type=int, required=True, help="range start (inclusive)")
    p_peg.add_argument("--t1", type=int, required=True, help="range end (exclusive)")
    p_peg.add_argument("--seed", type=int, default=0, help="noise seed")
    p_peg.add_argument("--out", default=None, help="output file (default stdout)")

    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "intervene": cmd_intervene,
    "run": cmd_run,
    "peg": cmd_peg,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"{exc.filename}: no such file", file=sys.stderr)
        return EXIT_USAGE
    except ConfigParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PathwaySimError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
