"""Constant-product pool state machine with LP-share accounting.

Reserves satisfy reserve_g * reserve_u = k. The spot price of G quoted
in U is reserve_u / reserve_g, so the pool value quoted in U,
reserve_g * price + reserve_u, collapses to 2 * reserve_u.

Swaps charge fee_bps on the input side. The whole input (fee included)
enters the reserves while only the fee-reduced amount prices the trade,
so k is constant at zero fee and strictly grows otherwise.

LP tokens are pro-rata claims on both reserves. The first deposit mints
sqrt(g * u); later deposits mint in proportion to reserve growth and must
match the current price, since an unbalanced add would move the price
without a trade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import PoolError

Side = Literal["u_to_g", "g_to_u"]

# Relative tolerance on the deposit ratio for add_liquidity.
ADD_RATIO_TOL = 1e-9


@dataclass
class PoolState:
    """Mutable pool state. fee_bps is taken on swap input, 0..10000."""

    reserve_g: float = 0.0
    reserve_u: float = 0.0
    lp_supply: float = 0.0
    fee_bps: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.fee_bps <= 10_000:
            raise PoolError(f"fee_bps must be in [0, 10000], got {self.fee_bps}")
        if self.reserve_g < 0 or self.reserve_u < 0 or self.lp_supply < 0:
            raise PoolError("reserves and lp_supply must be non-negative")

    @property
    def initialized(self) -> bool:
        return self.lp_supply > 0

    def copy(self) -> "PoolState":
        return PoolState(self.reserve_g, self.reserve_u, self.lp_supply, self.fee_bps)

    def fingerprint(self) -> tuple[float, float, float, int]:
        """Exact state snapshot used for stale-plan detection."""
        return (self.reserve_g, self.reserve_u, self.lp_supply, self.fee_bps)

    def _require_initialized(self) -> None:
        if not self.initialized:
            raise PoolError("empty pool")

    def spot_price(self) -> float:
        """Price of one G in U: reserve_u / reserve_g."""
        self._require_initialized()
        return self.reserve_u / self.reserve_g

    def liquidity_value(self) -> float:
        """Pool liquidity quoted in U: reserve_g * price + reserve_u == 2 * reserve_u."""
        self._require_initialized()
        # price = reserve_u / reserve_g makes the G leg identically reserve_u.
        return 2.0 * self.reserve_u

    def liquidity_value_in_g(self) -> float:
        """Pool liquidity quoted in G; the mirror identity 2 * reserve_g."""
        self._require_initialized()
        return 2.0 * self.reserve_g

    def swap_exact_in(self, side: Side, amount_in: float) -> float:
        """Swap amount_in of the input token, return the output amount.

        Output follows out = reserve_out - k / (reserve_in + eff) where
        eff = amount_in * (1 - fee_bps/10000). Reserves take the full input.
        """
        self._require_initialized()
        if amount_in < 0:
            raise PoolError(f"negative swap amount: {amount_in}")
        if amount_in == 0:
            return 0.0
        if side == "u_to_g":
            reserve_in, reserve_out = self.reserve_u, self.reserve_g
        elif side == "g_to_u":
            reserve_in, reserve_out = self.reserve_g, self.reserve_u
        else:
            raise PoolError(f"unknown swap side: {side!r}")

        eff = amount_in * (1.0 - self.fee_bps / 10_000.0)
        k = reserve_in * reserve_out
        amount_out = reserve_out - k / (reserve_in + eff)
        # CPMM output bound: k/(reserve_in + eff) > 0 for any finite input.
        assert 0.0 <= amount_out < reserve_out

        if side == "u_to_g":
            self.reserve_u = reserve_in + amount_in
            self.reserve_g = reserve_out - amount_out
        else:
            self.reserve_g = reserve_in + amount_in
            self.reserve_u = reserve_out - amount_out
        return amount_out

    def add_liquidity(self, amount_g: float, amount_u: float) -> float:
        """Deposit both tokens, return LP minted.

        First deposit mints sqrt(g * u). Later deposits must match the pool
        price (amount_u/amount_g == spot within 1e-9 relative) and mint
        lp_supply * amount_g / reserve_g.
        """
        if amount_g <= 0 or amount_u <= 0:
            raise PoolError("deposit amounts must be positive")
        if not self.initialized:
            lp_minted = math.sqrt(amount_g * amount_u)
        else:
            price = self.spot_price()
            deposit_price = amount_u / amount_g
            if abs(deposit_price - price) > ADD_RATIO_TOL * price:
                raise PoolError(
                    f"ratio mismatch: deposit price {deposit_price} vs pool price {price}"
                )
            lp_minted = self.lp_supply * amount_g / self.reserve_g
        self.reserve_g += amount_g
        self.reserve_u += amount_u
        self.lp_supply += lp_minted
        return lp_minted

    def remove_liquidity(self, lp_amount: float) -> tuple[float, float]:
        """Burn lp_amount, return the pro-rata (g_out, u_out). Price is unchanged."""
        self._require_initialized()
        if lp_amount < 0:
            raise PoolError(f"negative LP amount: {lp_amount}")
        if lp_amount > self.lp_supply:
            raise PoolError(
                f"insufficient LP: burning {lp_amount} of supply {self.lp_supply}"
            )
        if lp_amount == 0:
            return (0.0, 0.0)
        if lp_amount == self.lp_supply:
            g_out, u_out = self.reserve_g, self.reserve_u
            self.reserve_g = self.reserve_u = self.lp_supply = 0.0
            return (g_out, u_out)
        share = lp_amount / self.lp_supply
        g_out = self.reserve_g * share
        u_out = self.reserve_u * share
        self.reserve_g -= g_out
        self.reserve_u -= u_out
        self.lp_supply -= lp_amount
        return (g_out, u_out)


@dataclass
class LpHolding:
    """LP tokens held by one party, 0 <= lp_amount <= pool lp_supply."""

    holder_id: str
    lp_amount: float = 0.0
