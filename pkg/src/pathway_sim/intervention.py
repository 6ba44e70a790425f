"""Burn-then-swap interventions that move the pool price onto a peg.

An Up-Intervention on a pool (g, u) at price p1 = u/g targeting p2 > p1
burns a fraction f of the LP supply, which withdraws (f*g, f*u), then
swaps the entire withdrawn U side back through the pool. At zero fee the
swap input exactly restores reserve_u, so

    final reserves = ((1-f)^2 * g, u),    final price = p1 / (1-f)^2.

Solving final price == p2 gives the exact burn fraction

    f = 1 - sqrt(p1 / p2)            (Up;  Down mirrors with p2/p1).

Under this f the untouched reserve and the pool liquidity value measured
in the untouched-side token are preserved exactly, and the DAO's token
gain equals |delta_g| = g * (1 - p1/p2). With a nonzero swap fee there is
no such closed form here; f is found by bisection on the simulated
burn-and-swap so the realized price lands on the peg.

The alternative "paper_approx" planner is the literal half-split
procedure from the protocol's published walkthrough: withdraw the LP
whose G-side share equals |delta_g| / 2 and swap the freed U. Its two G
contributions are f*g from the burn and f*(1-f)*g from the swap, so it
always undershoots the peg; the residual is reported, not hidden.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import InterventionError, PoolError, StalePlanError
from .pool import LpHolding, PoolState

# Bisection controls for nonzero-fee planning.
BISECT_MAX_ITERS = 200
BISECT_F_TOL = 1e-12
PRICE_REL_TOL = 1e-9

UP = "up"
DOWN = "down"
NONE = "none"


@dataclass(frozen=True)
class TriggerPolicy:
    """When the DAO intervenes: relative deviation gate plus a step cooldown."""

    deviation_threshold: float = 0.005
    min_interval_steps: int = 1

    def __post_init__(self) -> None:
        if self.deviation_threshold < 0:
            raise InterventionError("deviation_threshold must be >= 0")
        if self.min_interval_steps < 0:
            raise InterventionError("min_interval_steps must be >= 0")


@dataclass(frozen=True)
class InterventionPlan:
    """A fully resolved burn-then-swap, computed against one pool snapshot.

    expected_extract_* and expected_swap_out come from simulating the plan
    on a copy of the snapshot. delta_g / delta_u hold the signed reserve
    change the peg requires (g * (p1/p2 - 1) for Up, the U mirror for
    Down); the untouched side's delta is 0. `capped` marks plans truncated
    to the DAO's available LP, which land short of the peg.
    """

    direction: str
    p1: float
    p2: float
    burn_fraction: float
    lp_to_burn: float
    expected_extract_g: float
    expected_extract_u: float
    expected_swap_out: float
    delta_g: float
    delta_u: float
    expected_final_g: float
    expected_final_u: float
    method: str
    capped: bool
    pool_fingerprint: tuple


@dataclass(frozen=True)
class InterventionReport:
    """Realized outcome of an intervention plus invariance checks.

    liquidity_value_error is measured in the untouched-side numeraire
    (U for Up, G for Down): that is the liquidity measure the burn-and-swap
    preserves. quote_reserve_error is the relative drift of the untouched
    reserve itself. dao_gain_* are the DAO wallet's token changes.
    """

    realized_final: PoolState
    dao_gain_g: float
    dao_gain_u: float
    price_error: float
    liquidity_value_error: float
    quote_reserve_error: float


def delta_g(pool: PoolState, p2: float) -> float:
    """Required G-reserve change for price p1 -> p2: g * (p1/p2 - 1)."""
    if p2 <= 0:
        raise InterventionError(f"target price must be > 0, got {p2}")
    p1 = pool.spot_price()
    return pool.reserve_g * (p1 / p2 - 1.0)


def delta_u(pool: PoolState, p2: float) -> float:
    """Required U-reserve change for price p1 -> p2: u * (p2/p1 - 1)."""
    if p2 <= 0:
        raise InterventionError(f"target price must be > 0, got {p2}")
    p1 = pool.spot_price()
    return pool.reserve_u * (p2 / p1 - 1.0)


def _simulate_burn_swap(
    pool: PoolState, lp_to_burn: float, direction: str
) -> tuple[PoolState, float, float, float]:
    """Run burn-then-swap on a copy; returns (pool_after, x_g, x_u, swap_out)."""
    sim = pool.copy()
    x_g, x_u = sim.remove_liquidity(lp_to_burn)
    if direction == UP:
        swap_out = sim.swap_exact_in("u_to_g", x_u)
    elif direction == DOWN:
        swap_out = sim.swap_exact_in("g_to_u", x_g)
    else:
        swap_out = 0.0
    return sim, x_g, x_u, swap_out


def _bisect_burn_fraction(pool: PoolState, peg: float, direction: str) -> float:
    """Find f so the simulated burn-and-swap lands the price on the peg.

    The realized price is monotonic in f for either direction, so plain
    bisection on [0, 1) converges; used when fee_bps > 0.
    """
    lo, hi = 0.0, 1.0 - 1e-12
    for _ in range(BISECT_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        sim, *_ = _simulate_burn_swap(pool, mid * pool.lp_supply, direction)
        price = sim.spot_price()
        too_low = price < peg if direction == UP else price > peg
        if too_low:
            lo = mid
        else:
            hi = mid
        if hi - lo < BISECT_F_TOL:
            break
    return 0.5 * (lo + hi)


def _build_plan(
    pool: PoolState,
    peg: float,
    direction: str,
    burn_fraction: float,
    dao_lp: Optional[LpHolding],
    method: str,
) -> InterventionPlan:
    p1 = pool.spot_price()
    lp_to_burn = burn_fraction * pool.lp_supply
    available = dao_lp.lp_amount if dao_lp is not None else pool.lp_supply
    capped = lp_to_burn > available
    if capped:
        lp_to_burn = available
        burn_fraction = available / pool.lp_supply
    sim, x_g, x_u, swap_out = _simulate_burn_swap(pool, lp_to_burn, direction)
    d_g = delta_g(pool, peg) if direction == UP else 0.0
    d_u = delta_u(pool, peg) if direction == DOWN else 0.0
    return InterventionPlan(
        direction=direction,
        p1=p1,
        p2=peg,
        burn_fraction=burn_fraction,
        lp_to_burn=lp_to_burn,
        expected_extract_g=x_g,
        expected_extract_u=x_u,
        expected_swap_out=swap_out,
        delta_g=d_g,
        delta_u=d_u,
        expected_final_g=sim.reserve_g,
        expected_final_u=sim.reserve_u,
        method=method,
        capped=capped,
        pool_fingerprint=pool.fingerprint(),
    )


def plan_intervention(
    pool: PoolState,
    peg: float,
    dao_lp: Optional[LpHolding] = None,
    policy: Optional[TriggerPolicy] = None,
    method: str = "exact",
) -> Optional[InterventionPlan]:
    """Plan a burn-then-swap that moves the pool price onto the peg.

    Returns None when the relative deviation |peg - p1| / p1 is zero or
    below the policy threshold. With method "exact" the burn fraction is
    the closed form 1 - sqrt(p1/p2) (Up) or 1 - sqrt(p2/p1) (Down) at zero
    fee, and bisection on the simulated outcome otherwise. The burn is
    capped at the DAO's LP when dao_lp is given; a capped plan lands the
    price toward, not onto, the peg.
    """
    if peg <= 0:
        raise InterventionError(f"peg must be > 0, got {peg}")
    if method not in ("exact", "paper_approx"):
        raise InterventionError(f"unknown method: {method!r}")
    p1 = pool.spot_price()
    policy = policy or TriggerPolicy()
    deviation = abs(peg - p1) / p1
    if deviation == 0 or deviation < policy.deviation_threshold:
        return None
    if method == "paper_approx":
        return plan_paper_approx(pool, peg, dao_lp=dao_lp)
    direction = UP if peg > p1 else DOWN
    if pool.fee_bps == 0:
        ratio = p1 / peg if direction == UP else peg / p1
        burn_fraction = 1.0 - ratio**0.5
    else:
        burn_fraction = _bisect_burn_fraction(pool, peg, direction)
    return _build_plan(pool, peg, direction, burn_fraction, dao_lp, "exact")


def plan_paper_approx(
    pool: PoolState,
    peg: float,
    dao_lp: Optional[LpHolding] = None,
    round_decimals: Optional[int] = 2,
) -> InterventionPlan:
    """Plan the literal half-split procedure.

    Withdraws the LP whose moved-side share equals half the required
    reserve change, then swaps the whole freed opposite side. The
    published walkthrough carries the reserve change at two decimals;
    round_decimals reproduces that arithmetic (pass None for the pure
    half-split). Always returns a plan; at zero deviation it is a
    degenerate no-op with nothing to burn.
    """
    if peg <= 0:
        raise InterventionError(f"peg must be > 0, got {peg}")
    p1 = pool.spot_price()
    if peg == p1:
        return _build_plan(pool, peg, NONE, 0.0, dao_lp, "paper_approx")
    direction = UP if peg > p1 else DOWN
    if direction == UP:
        required = abs(delta_g(pool, peg))
        if round_decimals is not None:
            required = round(required, round_decimals)
        burn_fraction = (required / 2.0) / pool.reserve_g
    else:
        required = abs(delta_u(pool, peg))
        if round_decimals is not None:
            required = round(required, round_decimals)
        burn_fraction = (required / 2.0) / pool.reserve_u
    return _build_plan(pool, peg, direction, burn_fraction, dao_lp, "paper_approx")


def _invariance_errors(
    before: PoolState, after: PoolState, peg: float
) -> tuple[float, float, float]:
    """(price_error, liquidity_value_error, quote_reserve_error) between states.

    Direction is inferred from peg vs the before price; the untouched side
    (U for Up, G for Down) fixes both the liquidity numeraire and the
    reserve whose drift is reported.
    """
    price_error = abs(after.spot_price() - peg) / peg
    if peg < before.spot_price():
        lv_before = before.liquidity_value_in_g()
        lv_after = after.liquidity_value_in_g()
        reserve_before, reserve_after = before.reserve_g, after.reserve_g
    else:
        lv_before = before.liquidity_value()
        lv_after = after.liquidity_value()
        reserve_before, reserve_after = before.reserve_u, after.reserve_u
    liquidity_error = abs(lv_after - lv_before) / lv_before
    reserve_error = abs(reserve_after - reserve_before) / reserve_before
    return price_error, liquidity_error, reserve_error


def verify_invariance(
    before: PoolState, after: PoolState, peg: float
) -> InterventionReport:
    """Invariance checks between two pool states; DAO balances unknown here."""
    price_error, liquidity_error, reserve_error = _invariance_errors(
        before, after, peg
    )
    return InterventionReport(
        realized_final=after.copy(),
        dao_gain_g=0.0,
        dao_gain_u=0.0,
        price_error=price_error,
        liquidity_value_error=liquidity_error,
        quote_reserve_error=reserve_error,
    )


def execute_intervention(
    pool: PoolState,
    plan: InterventionPlan,
    dao: LpHolding,
    allow_stale: bool = False,
) -> InterventionReport:
    """Execute a plan against the pool, mutating pool and the DAO's LP holding.

    Refuses a plan whose pool snapshot no longer matches unless allow_stale
    is set (scenario stepping executes announced plans on a moved pool on
    purpose). The whole freed quote side is swapped back, whatever the
    current reserves are.
    """
    if plan is None:
        raise InterventionError("no plan to execute")
    if not allow_stale and pool.fingerprint() != plan.pool_fingerprint:
        raise StalePlanError("stale plan: pool changed since planning")
    if dao.lp_amount < plan.lp_to_burn:
        raise InterventionError(
            f"insufficient DAO LP: need {plan.lp_to_burn}, have {dao.lp_amount}"
        )
    before = pool.copy()
    x_g, x_u = pool.remove_liquidity(plan.lp_to_burn)
    dao.lp_amount -= plan.lp_to_burn
    if plan.direction == UP:
        swap_out = pool.swap_exact_in("u_to_g", x_u)
        dao_gain_g, dao_gain_u = x_g + swap_out, 0.0
    elif plan.direction == DOWN:
        swap_out = pool.swap_exact_in("g_to_u", x_g)
        dao_gain_g, dao_gain_u = 0.0, x_u + swap_out
    else:
        dao_gain_g, dao_gain_u = x_g, x_u
    price_error, liquidity_error, reserve_error = _invariance_errors(
        before, pool, plan.p2
    )
    return InterventionReport(
        realized_final=pool.copy(),
        dao_gain_g=dao_gain_g,
        dao_gain_u=dao_gain_u,
        price_error=price_error,
        liquidity_value_error=liquidity_error,
        quote_reserve_error=reserve_error,
    )
