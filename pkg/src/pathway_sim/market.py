"""Discrete-time agent-based market around one pool.

Intra-step action order is fixed and replaces a mempool:

    0. the DAO computes the peg, checks its trigger policy, and announces
       a pending intervention plan (the "transaction" everyone can see);
    1. noise traders trade;
    2. the front-runner sees the pending plan and may open its sandwich;
    3. the DAO attempt resolves under the configured defense
       (slippage guard or probabilistic execution) and either executes the
       announced plan on the pool as it now stands, or aborts - after
       which the front-runner unwinds its sandwich;
    4. arbitrageurs close residual gaps toward their reference price.

Randomness is split into independent substreams (noise / defense / peg)
derived from the run seed, so flipping the defense mode or its probability
never perturbs the other streams: paired-seed comparisons stay paired.

Token conservation (sum of all wallets plus pool reserves, per token) is
asserted after every step. The front-runner's gas proxy is a PnL charge
only, never a token transfer.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .agents import Arbitrageur, FrontRunner, NoiseTrader, TradeFill, Wallet
from .config import ScenarioConfig
from .errors import ConfigError, PathwaySimError
from .intervention import (
    InterventionPlan,
    TriggerPolicy,
    execute_intervention,
    plan_intervention,
)
from .peg import (
    AssetHolding,
    PortfolioPegModel,
    compute_peg_linear,
    compute_peg_portfolio,
)
from .pool import LpHolding, PoolState

EVENTS_CSV_HEADER = "t,actor,action,amount_g,amount_u,price_pre,price_post,peg"

# Conservation tolerance: 1e-9 absolute per 1e6 units of total supply.
CONSERVATION_TOL_PER_1E6 = 1e-9

ACTIONS = ("swap", "burn", "mint", "intervene", "defense_abort")


@dataclass(frozen=True)
class EventRecord:
    """One logged action; amounts are signed flows into the pool."""

    t: int
    actor: str
    action: str
    amount_g: float
    amount_u: float
    price_pre: float
    price_post: float
    peg: float

    def csv_row(self) -> str:
        return ",".join(
            [
                str(self.t),
                self.actor,
                self.action,
                repr(self.amount_g),
                repr(self.amount_u),
                repr(self.price_pre),
                repr(self.price_post),
                repr(self.peg),
            ]
        )


def events_to_csv(events: list[EventRecord]) -> str:
    lines = [EVENTS_CSV_HEADER]
    lines.extend(e.csv_row() for e in events)
    return "\n".join(lines) + "\n"


@dataclass
class RngBundle:
    """Independent substreams per purpose, all derived from one seed."""

    noise: random.Random
    defense: random.Random
    peg: random.Random

    @classmethod
    def from_seed(cls, seed: int) -> "RngBundle":
        return cls(
            noise=random.Random(f"{seed}/noise"),
            defense=random.Random(f"{seed}/defense"),
            peg=random.Random(f"{seed}/peg"),
        )


def apply_slippage_guard(
    plan: InterventionPlan, pool_now: PoolState, tolerance: float
) -> bool:
    """True to proceed: the pool price has not strayed from the plan's p1
    by more than tolerance (closed bound, exactly-at-tolerance proceeds)."""
    drift = abs(pool_now.spot_price() - plan.p1) / plan.p1
    return drift <= tolerance


def apply_probabilistic_execution(rng, p: float) -> bool:
    """Bernoulli(p) execute decision from the defense substream."""
    if not 0.0 < p <= 1.0:
        raise ConfigError(f"execution probability must be in (0, 1], got {p}")
    return rng.random() < p


@dataclass
class WorldState:
    pool: PoolState
    dao_lp: LpHolding
    other_lp: LpHolding
    dao_wallet: Wallet
    noise_traders: list[NoiseTrader]
    arbitrageurs: list[Arbitrageur]
    front_runner: Optional[FrontRunner]
    policy: TriggerPolicy
    method: str
    defense_mode: str
    slippage_tolerance: float
    execution_probability: float
    t: int = 0
    events: list[EventRecord] = field(default_factory=list)
    last_attempt_step: Optional[int] = None
    interventions_executed: int = 0
    interventions_aborted: int = 0
    max_exec_price_drift: float = 0.0
    max_step_drift_g: float = 0.0
    max_step_drift_u: float = 0.0
    _prev_total_g: float = 0.0
    _prev_total_u: float = 0.0

    def wallets(self) -> list[Wallet]:
        out = [self.dao_wallet]
        out += [a.wallet for a in self.noise_traders]
        out += [a.wallet for a in self.arbitrageurs]
        if self.front_runner is not None:
            out.append(self.front_runner.wallet)
        return out

    def total_g(self) -> float:
        return self.pool.reserve_g + sum(w.g for w in self.wallets())

    def total_u(self) -> float:
        return self.pool.reserve_u + sum(w.u for w in self.wallets())

    def snapshot_totals(self) -> None:
        self._prev_total_g = self.total_g()
        self._prev_total_u = self.total_u()

    def check_conservation(self) -> None:
        """Per-step conservation of each token across wallets + pool."""
        drift_g = abs(self.total_g() - self._prev_total_g)
        drift_u = abs(self.total_u() - self._prev_total_u)
        tol_g = CONSERVATION_TOL_PER_1E6 * max(1.0, self._prev_total_g / 1e6)
        tol_u = CONSERVATION_TOL_PER_1E6 * max(1.0, self._prev_total_u / 1e6)
        self.max_step_drift_g = max(self.max_step_drift_g, drift_g)
        self.max_step_drift_u = max(self.max_step_drift_u, drift_u)
        if drift_g > tol_g or drift_u > tol_u:
            raise PathwaySimError(
                f"token conservation violated at t={self.t}: "
                f"drift G={drift_g}, U={drift_u}"
            )

    def pol_share(self) -> float:
        if self.pool.lp_supply <= 0:
            return 0.0
        return self.dao_lp.lp_amount / self.pool.lp_supply


def _fill_event(
    t: int, actor: str, fill: Optional[TradeFill], price_pre: float,
    price_post: float, peg: float,
) -> Optional[EventRecord]:
    if fill is None:
        return None
    return EventRecord(
        t=t,
        actor=actor,
        action="swap",
        amount_g=fill.amount_g_into_pool,
        amount_u=fill.amount_u_into_pool,
        price_pre=price_pre,
        price_post=price_post,
        peg=peg,
    )


def step(world: WorldState, peg_at_t: float, rngs: RngBundle) -> list[EventRecord]:
    """Advance the world one step; returns the events appended this step."""
    t = world.t
    events: list[EventRecord] = []

    def log(record: Optional[EventRecord]) -> None:
        if record is not None:
            events.append(record)

    # Slot 0: DAO announces a pending plan if policy allows.
    pending: Optional[InterventionPlan] = None
    cooldown_ok = (
        world.last_attempt_step is None
        or t - world.last_attempt_step >= world.policy.min_interval_steps
    )
    if cooldown_ok and world.pool.initialized:
        pending = plan_intervention(
            world.pool, peg_at_t, world.dao_lp, world.policy, world.method
        )
        if pending is not None:
            world.last_attempt_step = t

    # Slot 1: noise traders.
    for trader in world.noise_traders:
        pre = world.pool.spot_price()
        fill = trader.act(world.pool, rngs.noise)
        log(_fill_event(t, trader.name, fill, pre, world.pool.spot_price(), peg_at_t))

    # Slot 2: front-runner opens a sandwich around the announced plan.
    fr = world.front_runner
    if fr is not None and pending is not None:
        pre = world.pool.spot_price()
        fill = fr.front_leg(world.pool, pending)
        log(_fill_event(t, fr.name, fill, pre, world.pool.spot_price(), peg_at_t))

    # Slot 3: the DAO attempt resolves under the defense.
    executed = False
    if pending is not None:
        price_at_exec = world.pool.spot_price()
        proceed = True
        if world.defense_mode == "slippage_threshold":
            proceed = apply_slippage_guard(
                pending, world.pool, world.slippage_tolerance
            )
        elif world.defense_mode == "probabilistic":
            # Drawn only now, after the front-runner committed its leg.
            proceed = apply_probabilistic_execution(
                rngs.defense, world.execution_probability
            )
        if proceed:
            before = world.pool.copy()
            report = execute_intervention(
                world.pool, pending, world.dao_lp, allow_stale=True
            )
            world.dao_wallet.g += report.dao_gain_g
            world.dao_wallet.u += report.dao_gain_u
            world.interventions_executed += 1
            executed = True
            drift = abs(price_at_exec - pending.p1) / pending.p1
            world.max_exec_price_drift = max(world.max_exec_price_drift, drift)
            log(
                EventRecord(
                    t=t,
                    actor="dao",
                    action="intervene",
                    amount_g=world.pool.reserve_g - before.reserve_g,
                    amount_u=world.pool.reserve_u - before.reserve_u,
                    price_pre=price_at_exec,
                    price_post=world.pool.spot_price(),
                    peg=peg_at_t,
                )
            )
        else:
            world.interventions_aborted += 1
            log(
                EventRecord(
                    t=t,
                    actor="dao",
                    action="defense_abort",
                    amount_g=0.0,
                    amount_u=0.0,
                    price_pre=price_at_exec,
                    price_post=price_at_exec,
                    peg=peg_at_t,
                )
            )

    # Slot 3b: the front-runner unwinds whatever it opened.
    if fr is not None:
        pre = world.pool.spot_price()
        fill, _attempt = fr.back_leg(world.pool, executed)
        log(_fill_event(t, fr.name, fill, pre, world.pool.spot_price(), peg_at_t))

    # Slot 4: arbitrageurs close residual gaps.
    for arb in world.arbitrageurs:
        pre = world.pool.spot_price()
        fill = arb.act(world.pool, t, peg_at_t)
        log(_fill_event(t, arb.name, fill, pre, world.pool.spot_price(), peg_at_t))

    world.check_conservation()
    world.snapshot_totals()
    world.events.extend(events)
    world.t += 1
    return events


@dataclass(frozen=True)
class SummaryMetrics:
    steps: int
    final_price: float
    final_peg: float
    peg_rmse: float
    interventions_executed: int
    interventions_aborted: int
    dao_pnl_u: float
    frontrunner_pnl_u: float
    frontrunner_attempts: int
    pol_share_initial: float
    pol_share_final: float
    pol_share_mean: float
    max_exec_price_drift: float
    max_step_drift_g: float
    max_step_drift_u: float

    def to_flat_dict(self) -> dict:
        return {
            "steps": self.steps,
            "final_price": self.final_price,
            "final_peg": self.final_peg,
            "peg_rmse": self.peg_rmse,
            "interventions_executed": self.interventions_executed,
            "interventions_aborted": self.interventions_aborted,
            "dao_pnl_u": self.dao_pnl_u,
            "frontrunner_pnl_u": self.frontrunner_pnl_u,
            "frontrunner_attempts": self.frontrunner_attempts,
            "pol_share_initial": self.pol_share_initial,
            "pol_share_final": self.pol_share_final,
            "pol_share_mean": self.pol_share_mean,
            "max_exec_price_drift": self.max_exec_price_drift,
            "max_step_drift_g": self.max_step_drift_g,
            "max_step_drift_u": self.max_step_drift_u,
        }


def build_world(config: ScenarioConfig) -> WorldState:
    pool = PoolState(fee_bps=config.pool.fee_bps)
    lp = pool.add_liquidity(config.pool.reserve_g, config.pool.reserve_u)
    dao_amount = lp * config.pool.dao_lp_share
    dao_lp = LpHolding("dao", dao_amount)
    other_lp = LpHolding("other_lps", lp - dao_amount)

    noise_traders: list[NoiseTrader] = []
    arbitrageurs: list[Arbitrageur] = []
    front_runner: Optional[FrontRunner] = None
    for i, spec in enumerate(config.agents):
        wallet = Wallet(g=spec.endowment_g, u=spec.endowment_u)
        if spec.kind == "noise_trader":
            noise_traders.append(
                NoiseTrader(
                    name=f"noise_trader_{i}",
                    trade_probability=spec.trade_probability,
                    size_min_u=spec.size_min_u,
                    size_max_u=spec.size_max_u,
                    wallet=wallet,
                )
            )
        elif spec.kind == "arbitrageur":
            series = None
            if spec.series is not None:
                series = [(int(t), float(v)) for t, v in spec.series]
            arbitrageurs.append(
                Arbitrageur(
                    name=f"arbitrageur_{i}",
                    reference=spec.reference,
                    profit_threshold=spec.profit_threshold,
                    series=series,
                    wallet=wallet,
                )
            )
        else:
            if front_runner is not None:
                raise ConfigError(f"agents[{i}]: only one front_runner supported")
            front_runner = FrontRunner(
                name="front_runner",
                sandwich_size_u=spec.sandwich_size_u,
                gas_cost_u=spec.gas_cost_u,
                wallet=wallet,
            )

    world = WorldState(
        pool=pool,
        dao_lp=dao_lp,
        other_lp=other_lp,
        dao_wallet=Wallet(),
        noise_traders=noise_traders,
        arbitrageurs=arbitrageurs,
        front_runner=front_runner,
        policy=TriggerPolicy(
            deviation_threshold=config.policy.deviation_threshold,
            min_interval_steps=config.policy.min_interval_steps,
        ),
        method=config.policy.method,
        defense_mode=config.defense.mode,
        slippage_tolerance=config.defense.slippage_tolerance,
        execution_probability=config.defense.execution_probability,
    )
    world.snapshot_totals()
    return world


def build_peg_fn(
    config: ScenarioConfig, rng_peg: random.Random
) -> Callable[[int], float]:
    """Peg price as a function of the step index."""
    model_cfg = config.peg_model
    if model_cfg.kind == "schedule":
        points = [(int(t), float(v)) for t, v in model_cfg.points]

        def schedule_peg(t: int) -> float:
            value = points[0][1]
            for ts, v in points:
                if ts > t:
                    break
                value = v
            return value

        return schedule_peg
    if model_cfg.kind == "linear":
        model = model_cfg.build_linear_model()
        factors = model_cfg.build_factors(config.base_dir)
        return lambda t: compute_peg_linear(model, factors, t, rng_peg, as_of=True)
    holdings = [
        AssetHolding(
            asset_id=str(h["asset_id"]),
            amount=float(h["amount"]),
            initial_price=float(h["initial_price"]),
            growth_rate=float(h["growth_rate"]),
        )
        for h in model_cfg.holdings
    ]
    supply = model_cfg.gov_token_supply
    model = PortfolioPegModel(holdings=holdings, gov_token_supply=lambda _t: supply)
    return lambda t: compute_peg_portfolio(model, t)


def run_scenario(config: ScenarioConfig) -> tuple[list[EventRecord], SummaryMetrics]:
    """Run a validated scenario; identical (config, seed) pairs give
    byte-identical event logs."""
    config.validate()
    world = build_world(config)
    rngs = RngBundle.from_seed(config.run.seed)
    peg_fn = build_peg_fn(config, rngs.peg)

    sq_rel_errors: list[float] = []
    pol_shares: list[float] = []
    final_peg = 0.0
    for t in range(config.run.steps):
        peg_at_t = peg_fn(t)
        final_peg = peg_at_t
        step(world, peg_at_t, rngs)
        price = world.pool.spot_price()
        sq_rel_errors.append(((price - peg_at_t) / peg_at_t) ** 2)
        pol_shares.append(world.pol_share())

    fr = world.front_runner
    metrics = SummaryMetrics(
        steps=config.run.steps,
        final_price=world.pool.spot_price() if world.pool.initialized else 0.0,
        final_peg=final_peg,
        peg_rmse=math.sqrt(sum(sq_rel_errors) / len(sq_rel_errors))
        if sq_rel_errors
        else 0.0,
        interventions_executed=world.interventions_executed,
        interventions_aborted=world.interventions_aborted,
        dao_pnl_u=(
            world.dao_wallet.g * world.pool.spot_price() + world.dao_wallet.u
            if world.pool.initialized
            else world.dao_wallet.u
        ),
        frontrunner_pnl_u=fr.total_pnl_u if fr else 0.0,
        frontrunner_attempts=fr.attempts if fr else 0,
        pol_share_initial=pol_shares[0] if pol_shares else world.pol_share(),
        pol_share_final=pol_shares[-1] if pol_shares else world.pol_share(),
        pol_share_mean=sum(pol_shares) / len(pol_shares)
        if pol_shares
        else world.pol_share(),
        max_exec_price_drift=world.max_exec_price_drift,
        max_step_drift_g=world.max_step_drift_g,
        max_step_drift_u=world.max_step_drift_u,
    )
    return world.events, metrics


def frontrunner_pnl_study(
    config: ScenarioConfig,
    execution_probabilities: list[float],
    episodes: int,
    seed_base: int = 0,
) -> dict[float, float]:
    """Mean front-runner PnL per attempt under each execution probability.

    Runs `episodes` independent scenario episodes per probability with
    paired seeds (episode i uses seed seed_base + i under every
    probability), so the noise and peg paths are identical across the
    compared defenses and only the defense draws differ.
    """
    import copy

    results: dict[float, float] = {}
    for p in execution_probabilities:
        total_pnl = 0.0
        total_attempts = 0
        for i in range(episodes):
            cfg = copy.deepcopy(config)
            cfg.defense.mode = "probabilistic"
            cfg.defense.execution_probability = p
            cfg.run.seed = seed_base + i
            _, metrics = run_scenario(cfg)
            total_pnl += metrics.frontrunner_pnl_u
            total_attempts += metrics.frontrunner_attempts
        results[p] = total_pnl / total_attempts if total_attempts else 0.0
    return results
