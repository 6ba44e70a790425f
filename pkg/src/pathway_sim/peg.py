"""Peg (intrinsic-value) price models.

Two model families:

* portfolio: the peg is the DAO's asset portfolio value per governance
  token, peg(t) = sum_i c_i * FV(t, A_i) / supply(t), with each asset
  compounding at its own per-step growth rate.

* linear: the peg is a weighted sum of normalized success factors,
  peg(t) = bias + (max_price - bias) * sum_i w_i * Fhat_i(t) + noise(t),
  clamped to the [bias, max_price] corridor. Weights must sum to 1.
  noise(t) is uniform on [-noise_amplitude, +noise_amplitude], drawn from
  an explicitly passed generator so runs stay reproducible.

Factor normalization offers two modes. "paper" divides the distance from
the running minimum by the running maximum, (F - Min) / Max, which only
reaches 1 when Min is 0; "min_max" is conventional (F - Min) / (Max - Min)
scaling. Both clamp to [0, 1]. Running Min/Max use the expanding window of
samples at or before t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .errors import ConfigParseError, PegModelError

WEIGHT_SUM_TOL = 1e-9

NORMALIZATION_MODES = ("paper", "min_max")


@dataclass
class FactorSeries:
    """One success factor sampled over discrete time, timestamps strictly increasing."""

    factor_id: str
    samples: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        for prev, cur in zip(self.samples, self.samples[1:]):
            if cur[0] <= prev[0]:
                raise PegModelError(
                    f"factor '{self.factor_id}': timestamps must be strictly "
                    f"increasing, got {prev[0]} then {cur[0]}"
                )

    def value_at(self, t: int) -> float:
        """Exact-match lookup; raises if t has no sample."""
        for ts, value in self.samples:
            if ts == t:
                return value
        raise PegModelError(f"factor '{self.factor_id}': no sample at t={t}")

    def last_sample_time(self, t: int) -> int:
        """Timestamp of the latest sample at or before t."""
        result = None
        for ts, _ in self.samples:
            if ts > t:
                break
            result = ts
        if result is None:
            raise PegModelError(
                f"factor '{self.factor_id}': no sample at or before t={t}"
            )
        return result

    def window_min(self, t: int) -> float:
        values = [v for ts, v in self.samples if ts <= t]
        if not values:
            raise PegModelError(f"factor '{self.factor_id}': empty window at t={t}")
        return min(values)

    def window_max(self, t: int) -> float:
        values = [v for ts, v in self.samples if ts <= t]
        if not values:
            raise PegModelError(f"factor '{self.factor_id}': empty window at t={t}")
        return max(values)


def normalize_factor(series: FactorSeries, t: int, mode: str = "paper") -> float:
    """Normalize the factor value at t into [0, 1] using the expanding window.

    mode "paper": (F - Min) / Max. mode "min_max": (F - Min) / (Max - Min),
    which returns 0 by convention when Max == Min. Both modes require
    window_max > 0 and clamp the result to [0, 1].
    """
    if mode not in NORMALIZATION_MODES:
        raise PegModelError(f"unknown normalization mode: {mode!r}")
    value = series.value_at(t)
    lo = series.window_min(t)
    hi = series.window_max(t)
    if hi <= 0:
        raise PegModelError(
            f"degenerate factor range: factor '{series.factor_id}' has "
            f"window max {hi} <= 0 at t={t}"
        )
    if mode == "paper":
        raw = (value - lo) / hi
    else:
        if hi == lo:
            return 0.0
        raw = (value - lo) / (hi - lo)
    return min(1.0, max(0.0, raw))


def future_value(initial_price: float, rate: float, t: int) -> float:
    """Compound initial_price by rate per step for t steps."""
    if t < 0:
        raise PegModelError(f"future_value: t must be >= 0, got {t}")
    if rate <= -1:
        raise PegModelError(f"future_value: rate must be > -1, got {rate}")
    return initial_price * (1.0 + rate) ** t


@dataclass(frozen=True)
class AssetHolding:
    asset_id: str
    amount: float
    initial_price: float
    growth_rate: float

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise PegModelError(f"asset '{self.asset_id}': amount must be >= 0")
        if self.growth_rate <= -1:
            raise PegModelError(f"asset '{self.asset_id}': growth_rate must be > -1")


@dataclass
class PortfolioPegModel:
    """Peg from a DAO-held asset portfolio divided by governance-token supply."""

    holdings: list[AssetHolding]
    gov_token_supply: Callable[[int], float]


def compute_peg_portfolio(model: PortfolioPegModel, t: int) -> float:
    supply = model.gov_token_supply(t)
    if supply <= 0:
        raise PegModelError(f"gov token supply must be > 0, got {supply} at t={t}")
    total = sum(
        h.amount * future_value(h.initial_price, h.growth_rate, t)
        for h in model.holdings
    )
    return total / supply


@dataclass
class LinearPegModel:
    """Weighted-factor peg with a [bias, max_price] corridor and bounded noise."""

    weights: dict[str, float]
    bias: float
    max_price: float
    noise_amplitude: float = 0.0
    normalization_mode: str = "paper"
    scaling_mode: str = "linear"

    def __post_init__(self) -> None:
        for fid, w in self.weights.items():
            if not 0.0 <= w <= 1.0:
                raise PegModelError(f"weight for '{fid}' must be in [0, 1], got {w}")
        total = sum(self.weights.values())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise PegModelError(f"weights must sum to 1, got {total}")
        if self.bias < 0:
            raise PegModelError(f"bias must be >= 0, got {self.bias}")
        if self.max_price <= self.bias:
            raise PegModelError(
                f"max_price {self.max_price} must exceed bias {self.bias}"
            )
        if not 0.0 <= self.noise_amplitude < self.max_price - self.bias:
            raise PegModelError(
                f"noise_amplitude {self.noise_amplitude} must be in "
                f"[0, max_price - bias)"
            )
        if self.normalization_mode not in NORMALIZATION_MODES:
            raise PegModelError(
                f"unknown normalization mode: {self.normalization_mode!r}"
            )
        if self.scaling_mode != "linear":
            raise PegModelError(f"unknown scaling mode: {self.scaling_mode!r}")


def compute_peg_linear(
    model: LinearPegModel,
    factors: Mapping[str, FactorSeries],
    t: int,
    rng,
    as_of: bool = False,
) -> float:
    """Evaluate the linear peg at t.

    Each weighted factor must be present in `factors`. With as_of=True the
    factor is normalized at its latest sample time <= t (step-function
    semantics for sparse series); otherwise t must be sampled exactly.
    """
    weighted = 0.0
    for fid, w in model.weights.items():
        series = factors.get(fid)
        if series is None:
            raise PegModelError(f"missing factor '{fid}' referenced by weights")
        ts = series.last_sample_time(t) if as_of else t
        weighted += w * normalize_factor(series, ts, model.normalization_mode)
    scale = model.max_price - model.bias
    noise = rng.uniform(-model.noise_amplitude, model.noise_amplitude)
    peg = model.bias + scale * weighted + noise
    return min(model.max_price, max(model.bias, peg))


def load_factors_csv(path: str) -> dict[str, FactorSeries]:
    """Read factor samples from a CSV with header t,factor_id,value.

    Rows must be sorted by t within each factor. Any malformed row aborts
    with an error naming the offending line.
    """
    samples: dict[str, list[tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "factor_id", "value"]:
            raise ConfigParseError(f"{path}:1: expected header 't,factor_id,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or row == [""]:
                continue
            if len(row) != 3:
                raise ConfigParseError(f"{path}:{lineno}: expected 3 columns")
            try:
                t = int(row[0])
                value = float(row[2])
            except ValueError as exc:
                raise ConfigParseError(f"{path}:{lineno}: {exc}") from None
            fid = row[1].strip()
            if not fid:
                raise ConfigParseError(f"{path}:{lineno}: empty factor_id")
            bucket = samples.setdefault(fid, [])
            if bucket and t <= bucket[-1][0]:
                raise ConfigParseError(
                    f"{path}:{lineno}: factor '{fid}' timestamps not strictly "
                    f"increasing ({bucket[-1][0]} then {t})"
                )
            bucket.append((t, value))
    return {fid: FactorSeries(fid, rows) for fid, rows in samples.items()}
