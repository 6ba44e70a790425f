"""Scenario configuration: JSON tree -> validated dataclasses.

Schema (sections map one-to-one onto the dataclasses below):

    {
      "pool":      {"reserve_u": 20.0, "reserve_g": 10.0, "fee_bps": 0,
                    "dao_lp_share": 1.0},
      "peg_model": {"kind": "schedule" | "linear" | "portfolio", ...},
      "agents":    [{"kind": "noise_trader" | "arbitrageur" | "front_runner",
                     ...}, ...],
      "defense":   {"mode": "none" | "slippage_threshold" | "probabilistic",
                    ...},
      "policy":    {"deviation_threshold": 0.005, "min_interval_steps": 1,
                    "method": "exact"},
      "run":       {"steps": 100, "seed": 42}
    }

Structural problems (unreadable JSON, missing/mistyped fields) raise
ConfigParseError; value and relationship violations raise ConfigError with
the offending field path in the message.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import ConfigError, ConfigParseError, PegModelError
from .peg import AssetHolding, FactorSeries, LinearPegModel, load_factors_csv

DEFENSE_MODES = ("none", "slippage_threshold", "probabilistic")
AGENT_KINDS = ("noise_trader", "arbitrageur", "front_runner")
PEG_KINDS = ("schedule", "linear", "portfolio")
METHODS = ("exact", "paper_approx")


def _require(tree: dict, key: str, kind, where: str):
    if key not in tree:
        raise ConfigParseError(f"{where}.{key}: missing required field")
    value = tree[key]
    if isinstance(value, bool) and kind is not bool:
        raise ConfigParseError(f"{where}.{key}: expected {kind.__name__}, got bool")
    if kind is float and isinstance(value, int):
        value = float(value)
    if not isinstance(value, kind):
        raise ConfigParseError(
            f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _optional(tree: dict, key: str, kind, where: str, default):
    if key not in tree:
        return default
    return _require(tree, key, kind, where)


@dataclass
class PoolConfig:
    reserve_u: float
    reserve_g: float
    fee_bps: int = 0
    dao_lp_share: float = 1.0

    def validate(self) -> None:
        if self.reserve_u <= 0:
            raise ConfigError("pool.reserve_u: must be > 0")
        if self.reserve_g <= 0:
            raise ConfigError("pool.reserve_g: must be > 0")
        if not 0 <= self.fee_bps <= 10_000:
            raise ConfigError("pool.fee_bps: must be in [0, 10000]")
        if not 0.0 <= self.dao_lp_share <= 1.0:
            raise ConfigError("pool.dao_lp_share: must be in [0, 1]")


@dataclass
class PegModelConfig:
    kind: str
    # schedule
    points: list = field(default_factory=list)
    # linear
    bias: float = 0.0
    max_price: float = 1.0
    noise_amplitude: float = 0.0
    normalization_mode: str = "paper"
    weights: dict = field(default_factory=dict)
    factors: dict = field(default_factory=dict)
    factors_csv: Optional[str] = None
    # portfolio
    holdings: list = field(default_factory=list)
    gov_token_supply: float = 0.0

    def validate(self) -> None:
        if self.kind not in PEG_KINDS:
            raise ConfigError(f"peg_model.kind: must be one of {PEG_KINDS}")
        if self.kind == "schedule":
            if not self.points:
                raise ConfigError("peg_model.points: must not be empty")
            last_t = None
            for i, point in enumerate(self.points):
                if (
                    not isinstance(point, (list, tuple))
                    or len(point) != 2
                    or not isinstance(point[0], int)
                ):
                    raise ConfigError(
                        f"peg_model.points[{i}]: expected [t, value] with integer t"
                    )
                t, value = point
                if last_t is not None and t <= last_t:
                    raise ConfigError(
                        f"peg_model.points[{i}]: timestamps must be increasing"
                    )
                if not isinstance(value, (int, float)) or value <= 0:
                    raise ConfigError(f"peg_model.points[{i}]: value must be > 0")
                last_t = t
        elif self.kind == "linear":
            try:
                self.build_linear_model()
            except PegModelError as exc:
                raise ConfigError(f"peg_model: {exc}") from None
            if not self.weights:
                raise ConfigError("peg_model.weights: must not be empty")
        else:
            if self.gov_token_supply <= 0:
                raise ConfigError("peg_model.gov_token_supply: must be > 0")
            for i, h in enumerate(self.holdings):
                where = f"peg_model.holdings[{i}]"
                if not isinstance(h, dict):
                    raise ConfigParseError(f"{where}: expected object")
                try:
                    AssetHolding(
                        asset_id=str(_require(h, "asset_id", str, where)),
                        amount=_require(h, "amount", float, where),
                        initial_price=_require(h, "initial_price", float, where),
                        growth_rate=_require(h, "growth_rate", float, where),
                    )
                except PegModelError as exc:
                    raise ConfigError(f"{where}: {exc}") from None

    def build_linear_model(self) -> LinearPegModel:
        return LinearPegModel(
            weights={str(k): float(v) for k, v in self.weights.items()},
            bias=self.bias,
            max_price=self.max_price,
            noise_amplitude=self.noise_amplitude,
            normalization_mode=self.normalization_mode,
        )

    def build_factors(self, base_dir: str = ".") -> dict[str, FactorSeries]:
        """Inline factor samples win; otherwise read factors_csv (relative
        to the config file's directory)."""
        if self.factors:
            out = {}
            for fid, rows in self.factors.items():
                try:
                    out[str(fid)] = FactorSeries(
                        str(fid), [(int(t), float(v)) for t, v in rows]
                    )
                except (TypeError, ValueError) as exc:
                    raise ConfigParseError(
                        f"peg_model.factors.{fid}: expected [[t, value], ...] ({exc})"
                    ) from None
                except PegModelError as exc:
                    raise ConfigError(f"peg_model.factors.{fid}: {exc}") from None
            return out
        if self.factors_csv:
            path = self.factors_csv
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            return load_factors_csv(path)
        return {}


@dataclass
class AgentConfig:
    kind: str
    endowment_g: float = 0.0
    endowment_u: float = 0.0
    # noise_trader
    trade_probability: float = 0.5
    size_min_u: float = 1.0
    size_max_u: float = 10.0
    # arbitrageur
    reference: str = "peg"
    profit_threshold: float = 0.0
    series: Optional[list] = None
    # front_runner
    sandwich_size_u: float = 0.0
    gas_cost_u: float = 0.0

    def validate(self, where: str) -> None:
        if self.kind not in AGENT_KINDS:
            raise ConfigError(f"{where}.kind: must be one of {AGENT_KINDS}")
        if self.endowment_g < 0 or self.endowment_u < 0:
            raise ConfigError(f"{where}: endowments must be >= 0")
        if self.kind == "noise_trader":
            if not 0.0 <= self.trade_probability <= 1.0:
                raise ConfigError(f"{where}.trade_probability: must be in [0, 1]")
            if not 0 < self.size_min_u <= self.size_max_u:
                raise ConfigError(
                    f"{where}: need 0 < size_min_u <= size_max_u "
                    f"(got {self.size_min_u}, {self.size_max_u})"
                )
        elif self.kind == "arbitrageur":
            if self.reference not in ("peg", "external"):
                raise ConfigError(f"{where}.reference: must be 'peg' or 'external'")
            if self.profit_threshold < 0:
                raise ConfigError(f"{where}.profit_threshold: must be >= 0")
            if self.reference == "external" and not self.series:
                raise ConfigError(f"{where}.series: required for external reference")
        else:
            if self.sandwich_size_u <= 0:
                raise ConfigError(f"{where}.sandwich_size_u: must be > 0")
            if self.gas_cost_u < 0:
                raise ConfigError(f"{where}.gas_cost_u: must be >= 0")


@dataclass
class DefenseSettings:
    mode: str = "none"
    slippage_tolerance: float = 0.01
    execution_probability: float = 1.0

    def validate(self) -> None:
        if self.mode not in DEFENSE_MODES:
            raise ConfigError(f"defense.mode: must be one of {DEFENSE_MODES}")
        if self.mode == "slippage_threshold" and self.slippage_tolerance <= 0:
            raise ConfigError("defense.slippage_tolerance: must be > 0")
        if not 0.0 < self.execution_probability <= 1.0:
            raise ConfigError("defense.execution_probability: must be in (0, 1]")


@dataclass
class PolicyConfig:
    deviation_threshold: float = 0.005
    min_interval_steps: int = 1
    method: str = "exact"

    def validate(self) -> None:
        if self.deviation_threshold < 0:
            raise ConfigError("policy.deviation_threshold: must be >= 0")
        if self.min_interval_steps < 0:
            raise ConfigError("policy.min_interval_steps: must be >= 0")
        if self.method not in METHODS:
            raise ConfigError(f"policy.method: must be one of {METHODS}")


@dataclass
class RunConfig:
    steps: int
    seed: int

    def validate(self) -> None:
        if self.steps < 0:
            raise ConfigError("run.steps: must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("run.seed: must fit in u64")


@dataclass
class ScenarioConfig:
    pool: PoolConfig
    peg_model: PegModelConfig
    agents: list[AgentConfig]
    defense: DefenseSettings
    policy: PolicyConfig
    run: RunConfig
    base_dir: str = "."

    def validate(self) -> None:
        self.pool.validate()
        self.peg_model.validate()
        for i, agent in enumerate(self.agents):
            agent.validate(f"agents[{i}]")
        self.defense.validate()
        self.policy.validate()
        self.run.validate()


def parse_scenario(tree: Any, base_dir: str = ".") -> ScenarioConfig:
    """Build a ScenarioConfig from a parsed JSON tree (no validation yet)."""
    if not isinstance(tree, dict):
        raise ConfigParseError("config root: expected object")
    pool_tree = _require(tree, "pool", dict, "config")
    pool = PoolConfig(
        reserve_u=_require(pool_tree, "reserve_u", float, "pool"),
        reserve_g=_require(pool_tree, "reserve_g", float, "pool"),
        fee_bps=_optional(pool_tree, "fee_bps", int, "pool", 0),
        dao_lp_share=_optional(pool_tree, "dao_lp_share", float, "pool", 1.0),
    )
    peg_tree = _require(tree, "peg_model", dict, "config")
    peg_model = PegModelConfig(
        kind=_require(peg_tree, "kind", str, "peg_model"),
        points=_optional(peg_tree, "points", list, "peg_model", []),
        bias=_optional(peg_tree, "bias", float, "peg_model", 0.0),
        max_price=_optional(peg_tree, "max_price", float, "peg_model", 1.0),
        noise_amplitude=_optional(peg_tree, "noise_amplitude", float, "peg_model", 0.0),
        normalization_mode=_optional(
            peg_tree, "normalization_mode", str, "peg_model", "paper"
        ),
        weights=_optional(peg_tree, "weights", dict, "peg_model", {}),
        factors=_optional(peg_tree, "factors", dict, "peg_model", {}),
        factors_csv=_optional(peg_tree, "factors_csv", str, "peg_model", None),
        holdings=_optional(peg_tree, "holdings", list, "peg_model", []),
        gov_token_supply=_optional(
            peg_tree, "gov_token_supply", float, "peg_model", 0.0
        ),
    )
    agents = []
    for i, agent_tree in enumerate(_optional(tree, "agents", list, "config", [])):
        where = f"agents[{i}]"
        if not isinstance(agent_tree, dict):
            raise ConfigParseError(f"{where}: expected object")
        agents.append(
            AgentConfig(
                kind=_require(agent_tree, "kind", str, where),
                endowment_g=_optional(agent_tree, "endowment_g", float, where, 0.0),
                endowment_u=_optional(agent_tree, "endowment_u", float, where, 0.0),
                trade_probability=_optional(
                    agent_tree, "trade_probability", float, where, 0.5
                ),
                size_min_u=_optional(agent_tree, "size_min_u", float, where, 1.0),
                size_max_u=_optional(agent_tree, "size_max_u", float, where, 10.0),
                reference=_optional(agent_tree, "reference", str, where, "peg"),
                profit_threshold=_optional(
                    agent_tree, "profit_threshold", float, where, 0.0
                ),
                series=_optional(agent_tree, "series", list, where, None),
                sandwich_size_u=_optional(
                    agent_tree, "sandwich_size_u", float, where, 0.0
                ),
                gas_cost_u=_optional(agent_tree, "gas_cost_u", float, where, 0.0),
            )
        )
    defense_tree = _optional(tree, "defense", dict, "config", {})
    defense = DefenseSettings(
        mode=_optional(defense_tree, "mode", str, "defense", "none"),
        slippage_tolerance=_optional(
            defense_tree, "slippage_tolerance", float, "defense", 0.01
        ),
        execution_probability=_optional(
            defense_tree, "execution_probability", float, "defense", 1.0
        ),
    )
    policy_tree = _optional(tree, "policy", dict, "config", {})
    policy = PolicyConfig(
        deviation_threshold=_optional(
            policy_tree, "deviation_threshold", float, "policy", 0.005
        ),
        min_interval_steps=_optional(
            policy_tree, "min_interval_steps", int, "policy", 1
        ),
        method=_optional(policy_tree, "method", str, "policy", "exact"),
    )
    run_tree = _require(tree, "run", dict, "config")
    run = RunConfig(
        steps=_require(run_tree, "steps", int, "run"),
        seed=_require(run_tree, "seed", int, "run"),
    )
    return ScenarioConfig(pool, peg_model, agents, defense, policy, run, base_dir)


def load_scenario(path: str) -> ScenarioConfig:
    """Read, parse, and validate a scenario config file."""
    with open(path) as fh:
        try:
            tree = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(f"{path}: {exc}") from None
    config = parse_scenario(tree, base_dir=os.path.dirname(os.path.abspath(path)))
    config.validate()
    return config
