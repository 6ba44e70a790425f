"""Market agents: noise traders, arbitrageurs, and a sandwiching front-runner.

All agents trade against the same pool and keep their own token wallet.
Randomness comes only from generators handed in by the scenario runner,
and each agent consumes draws in a fixed order regardless of whether the
trade later gets clipped by its wallet, so event streams stay aligned
across paired runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .intervention import DOWN, UP, InterventionPlan
from .pool import PoolState


@dataclass
class Wallet:
    g: float = 0.0
    u: float = 0.0


@dataclass
class TradeFill:
    """One executed swap from an agent's perspective (pool-relative flows)."""

    amount_g_into_pool: float
    amount_u_into_pool: float


def _buy_g(pool: PoolState, wallet: Wallet, spend_u: float) -> Optional[TradeFill]:
    amount = min(spend_u, wallet.u)
    if amount <= 0:
        return None
    out = pool.swap_exact_in("u_to_g", amount)
    wallet.u -= amount
    wallet.g += out
    return TradeFill(amount_g_into_pool=-out, amount_u_into_pool=amount)


def _sell_g(pool: PoolState, wallet: Wallet, amount_g: float) -> Optional[TradeFill]:
    amount = min(amount_g, wallet.g)
    if amount <= 0:
        return None
    out = pool.swap_exact_in("g_to_u", amount)
    wallet.g -= amount
    wallet.u += out
    return TradeFill(amount_g_into_pool=amount, amount_u_into_pool=-out)


@dataclass
class NoiseTrader:
    """Trades a log-uniform U-denominated size with fixed probability per step."""

    name: str
    trade_probability: float
    size_min_u: float
    size_max_u: float
    wallet: Wallet = field(default_factory=Wallet)

    def act(self, pool: PoolState, rng) -> Optional[TradeFill]:
        # Draw order is fixed: gate, direction, size. Wallet clipping must
        # not change the number of draws.
        if rng.random() >= self.trade_probability:
            return None
        buy = rng.random() < 0.5
        size_u = math.exp(
            rng.uniform(math.log(self.size_min_u), math.log(self.size_max_u))
        )
        if buy:
            return _buy_g(pool, self.wallet, size_u)
        return _sell_g(pool, self.wallet, size_u / pool.spot_price())


def input_u_for_exact_g_out(pool: PoolState, g_out: float) -> float:
    """U input that buys exactly g_out of G: x = (k/(g - g_out) - u) / (1 - phi)."""
    phi = pool.fee_bps / 10_000.0
    k = pool.reserve_g * pool.reserve_u
    if g_out >= pool.reserve_g:
        raise ConfigError("cannot buy the entire G reserve")
    return (k / (pool.reserve_g - g_out) - pool.reserve_u) / (1.0 - phi)


def arb_size_to_price(pool: PoolState, target_price: float) -> tuple[str, float]:
    """Closed-form input amount that moves the pool price to target_price.

    After swapping x of U in, the price is (u+x) * (u + x*(1-phi)) / k, so
    the landing amount solves a quadratic in x (and the G mirror for
    selling). Returns (side, amount); amount 0 when already past target.
    """
    phi = pool.fee_bps / 10_000.0
    k = pool.reserve_g * pool.reserve_u
    price = pool.spot_price()
    if target_price > price:
        a = 1.0 - phi
        b = pool.reserve_u * (2.0 - phi)
        c = pool.reserve_u**2 - k * target_price
        side = "u_to_g"
    elif target_price < price:
        a = 1.0 - phi
        b = pool.reserve_g * (2.0 - phi)
        c = pool.reserve_g**2 - k / target_price
        side = "g_to_u"
    else:
        return ("u_to_g", 0.0)
    # c < 0 on this branch, so the positive root exists.
    x = (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
    return (side, max(0.0, x))


@dataclass
class Arbitrageur:
    """Closes the gap between pool price and a reference price.

    Trades only while the marginal profit rate (reference vs pool price,
    net of the swap fee) exceeds profit_threshold, and sizes the trade to
    land exactly on that boundary. reference is "peg" or "external"; the
    external series is a step function over (t, price) points.
    """

    name: str
    reference: str = "peg"
    profit_threshold: float = 0.0
    series: Optional[list[tuple[int, float]]] = None
    wallet: Wallet = field(default_factory=Wallet)

    def reference_price(self, t: int, peg: float) -> float:
        if self.reference == "peg":
            return peg
        if self.series is None:
            raise ConfigError(f"agent '{self.name}': external reference needs a series")
        value = None
        for ts, price in self.series:
            if ts > t:
                break
            value = price
        if value is None:
            value = self.series[0][1]
        return value

    def act(self, pool: PoolState, t: int, peg: float) -> Optional[TradeFill]:
        m = self.reference_price(t, peg)
        phi = pool.fee_bps / 10_000.0
        price = pool.spot_price()
        # Marginal profit of the first unit: buying pays price/(1-phi),
        # selling receives price*(1-phi), both valued at m.
        buy_target = m * (1.0 - phi) / (1.0 + self.profit_threshold)
        sell_target = m * (1.0 + self.profit_threshold) / (1.0 - phi)
        if price < buy_target:
            side, amount = arb_size_to_price(pool, buy_target)
            if side != "u_to_g":
                return None
            return _buy_g(pool, self.wallet, amount)
        if price > sell_target:
            side, amount = arb_size_to_price(pool, sell_target)
            if side != "g_to_u":
                return None
            return _sell_g(pool, self.wallet, amount)
        return None


@dataclass
class SandwichAttempt:
    """Result of one closed sandwich: PnL is U-denominated, net of gas."""

    pnl_u: float
    intervention_executed: bool


@dataclass
class FrontRunner:
    """Sandwiches announced interventions: trade ahead, unwind right after.

    For a pending Up plan it buys G before the DAO's swap and sells the
    same G immediately after; a Down plan mirrors with a pre-sale and
    buy-back. The gas cost proxy is charged per attempt against PnL only;
    it is not a token transfer, so wallet conservation stays exact.
    """

    name: str
    sandwich_size_u: float
    gas_cost_u: float = 0.0
    wallet: Wallet = field(default_factory=Wallet)
    _open_direction: Optional[str] = None
    _open_g: float = 0.0
    _open_u: float = 0.0
    attempts: int = 0
    total_pnl_u: float = 0.0

    def front_leg(
        self, pool: PoolState, plan: InterventionPlan
    ) -> Optional[TradeFill]:
        if plan.direction not in (UP, DOWN) or self._open_direction is not None:
            return None
        if plan.direction == UP:
            fill = _buy_g(pool, self.wallet, self.sandwich_size_u)
            if fill is None:
                return None
            self._open_direction = UP
            self._open_g = -fill.amount_g_into_pool
            self._open_u = fill.amount_u_into_pool
            return fill
        amount_g = self.sandwich_size_u / pool.spot_price()
        fill = _sell_g(pool, self.wallet, amount_g)
        if fill is None:
            return None
        self._open_direction = DOWN
        self._open_g = fill.amount_g_into_pool
        self._open_u = -fill.amount_u_into_pool
        return fill

    def back_leg(
        self, pool: PoolState, intervention_executed: bool
    ) -> tuple[Optional[TradeFill], Optional[SandwichAttempt]]:
        if self._open_direction is None:
            return None, None
        if self._open_direction == UP:
            fill = _sell_g(pool, self.wallet, self._open_g)
            received = -fill.amount_u_into_pool if fill else 0.0
            pnl = received - self._open_u - self.gas_cost_u
        else:
            # Buy back exactly the G sold in the front leg.
            need_u = input_u_for_exact_g_out(pool, self._open_g)
            fill = _buy_g(pool, self.wallet, need_u)
            spent = fill.amount_u_into_pool if fill else 0.0
            pnl = self._open_u - spent - self.gas_cost_u
        self._open_direction = None
        self._open_g = 0.0
        self._open_u = 0.0
        self.attempts += 1
        self.total_pnl_u += pnl
        return fill, SandwichAttempt(pnl, intervention_executed)
