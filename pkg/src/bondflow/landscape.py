"""Client landscape: a fixed grid of bond/cash holders.

Each grid cell is one client with immutable position, mutable bond and cash
holdings, and per-step stochastic state: whether the client answers the
phone this step (availability) and which side it would trade (direction).
Whether the client actually wants to trade is resolved lazily, only when a
market maker calls, by the decision layer; the landscape just stores the
outcome for the rest of the step.

Holdings are initialized from truncated log-normal distributions using
rejection sampling, so there is no probability atom at the cap. The system
is closed: nothing here creates or destroys bonds or cash after
initialization; only trades (in the engine) move holdings around.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, types only
    from .decision import DecisionOutcome


class Direction(Enum):
    """Side a client would take if it traded this step."""

    BUY = "buy"
    SELL = "sell"


class LognormalParams(Enum):
    """How (mu, sigma) in the config are interpreted."""

    UNDERLYING = "underlying"  # parameters of the underlying normal
    ARITHMETIC = "arithmetic"  # arithmetic mean/std of the log-normal itself


@dataclass(frozen=True)
class LandscapeConfig:
    grid_width: int = 50
    grid_height: int = 50
    bond_mu: float = 2.5
    bond_sigma: float = 1.0
    cash_mu: float = 1.0
    cash_sigma: float = 0.5
    max_bonds: float = 100.0
    max_cash: float = 5.0
    availability_p: float = 0.20
    direction_p: float = 0.5
    lognormal_params: LognormalParams = LognormalParams.UNDERLYING

    def validate(self) -> None:
        if self.grid_width < 1 or self.grid_height < 1:
            raise ConfigError("grid dimensions must be positive integers")
        if self.bond_sigma <= 0 or self.cash_sigma <= 0:
            raise ConfigError("log-normal sigmas must be > 0")
        if self.max_bonds <= 0 or self.max_cash <= 0:
            raise ConfigError("truncation caps must be > 0")
        if not 0.0 <= self.availability_p <= 1.0:
            raise ConfigError("availability_p must lie in [0, 1]")
        if not 0.0 <= self.direction_p <= 1.0:
            raise ConfigError("direction_p must lie in [0, 1]")

    def bond_normal_params(self) -> tuple[float, float]:
        return self._resolve(self.bond_mu, self.bond_sigma)

    def cash_normal_params(self) -> tuple[float, float]:
        return self._resolve(self.cash_mu, self.cash_sigma)

    def _resolve(self, mu: float, sigma: float) -> tuple[float, float]:
        if self.lognormal_params is LognormalParams.UNDERLYING:
            return mu, sigma
        return arithmetic_to_underlying(mu, sigma)


def arithmetic_to_underlying(mean: float, std: float) -> tuple[float, float]:
    """Convert arithmetic mean/std of a log-normal to its normal (mu, sigma)."""
    if mean <= 0 or std <= 0:
        raise ConfigError("arithmetic log-normal moments must be > 0")
    sigma_sq = math.log(1.0 + (std / mean) ** 2)
    mu = math.log(mean) - sigma_sq / 2.0
    return mu, math.sqrt(sigma_sq)


@dataclass
class ClientCell:
    """Snapshot of one client cell (positions are immutable; see Landscape)."""

    position: tuple[int, int]
    bonds: float
    cash: float
    available_now: bool
    direction_now: Direction
    desire_now: "DecisionOutcome | None" = field(default=None)


def sample_truncated_lognormal(
    mu: float,
    sigma: float,
    cap: float,
    rng: np.random.Generator,
    size: int | None = None,
):
    """Draw exp(Normal(mu, sigma^2)) conditioned on the result being <= cap.

    Rejection re-draw, never clamping, so the density has no atom at the
    cap. Refuses configurations where acceptance is practically impossible.
    Returns a float when size is None, else a 1-D float array.
    """
    if sigma <= 0:
        raise ConfigError("sigma must be > 0")
    if cap <= 0:
        raise ConfigError("cap must be > 0")
    if cap < math.exp(mu - 6.0 * sigma):
        raise ConfigError(
            f"cap {cap} is below exp(mu - 6*sigma) = {math.exp(mu - 6.0 * sigma):.6g}; "
            "rejection sampling would practically never terminate"
        )
    n = 1 if size is None else int(size)
    out = np.empty(n, dtype=np.float64)
    pending = np.arange(n)
    while pending.size:
        draws = np.exp(rng.normal(mu, sigma, size=pending.size))
        ok = draws <= cap
        out[pending[ok]] = draws[ok]
        pending = pending[~ok]
    if size is None:
        return float(out[0])
    return out


class Landscape:
    """The client grid plus its per-step stochastic state.

    Internally array-backed (row-major, indexed [y, x]) for cheap per-step
    rerolls over all cells; single-writer per simulation.
    """

    def __init__(self, cfg: LandscapeConfig, rng: np.random.Generator) -> None:
        cfg.validate()
        self.cfg = cfg
        h, w = cfg.grid_height, cfg.grid_width
        n = h * w
        bmu, bsig = cfg.bond_normal_params()
        cmu, csig = cfg.cash_normal_params()
        # Fixed draw order: all bonds, then all cash.
        self.bonds = sample_truncated_lognormal(bmu, bsig, cfg.max_bonds, rng, size=n).reshape(h, w)
        self.cash = sample_truncated_lognormal(cmu, csig, cfg.max_cash, rng, size=n).reshape(h, w)
        self.available = np.zeros((h, w), dtype=bool)
        self.direction_sell = np.zeros((h, w), dtype=bool)
        # Sparse: only cells actually contacted this step carry a desire.
        self.desires: dict[tuple[int, int], DecisionOutcome] = {}

    @property
    def shape(self) -> tuple[int, int]:
        """(width, height)."""
        return self.cfg.grid_width, self.cfg.grid_height

    @property
    def n_cells(self) -> int:
        return self.cfg.grid_width * self.cfg.grid_height

    def roll_step_state(self, rng: np.random.Generator) -> None:
        """Redraw availability and direction for every cell; clear desires.

        Fixed draw order (availability grid first, then direction grid) so
        the consumed random stream is reproducible.
        """
        h, w = self.cfg.grid_height, self.cfg.grid_width
        self.available = rng.random((h, w)) < self.cfg.availability_p
        self.direction_sell = rng.random((h, w)) < self.cfg.direction_p
        self.desires.clear()

    def cell(self, x: int, y: int) -> ClientCell:
        """Current snapshot of the cell at (x, y)."""
        pos = (x, y)
        return ClientCell(
            position=pos,
            bonds=float(self.bonds[y, x]),
            cash=float(self.cash[y, x]),
            available_now=bool(self.available[y, x]),
            direction_now=Direction.SELL if self.direction_sell[y, x] else Direction.BUY,
            desire_now=self.desires.get(pos),
        )

    def set_desire(self, x: int, y: int, outcome: "DecisionOutcome") -> None:
        self.desires[(x, y)] = outcome

    def apply_trade(self, x: int, y: int, bond_delta: float, cash_delta: float) -> None:
        """Apply a settled trade's deltas to a client; holdings stay >= 0."""
        nb = self.bonds[y, x] + bond_delta
        nc = self.cash[y, x] + cash_delta
        if nb < -1e-12 or nc < -1e-12:
            raise AssertionError(f"client holdings driven negative at ({x}, {y})")
        self.bonds[y, x] = max(nb, 0.0)
        self.cash[y, x] = max(nc, 0.0)

    def totals(self) -> tuple[float, float]:
        """(total bonds, total cash), summed in a fixed order."""
        return float(self.bonds.sum()), float(self.cash.sum())

    def to_csv(self, path: Path | str) -> None:
        """Snapshot export: one row per cell, header x,y,bonds,cash."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "bonds", "cash"])
            for y in range(self.cfg.grid_height):
                for x in range(self.cfg.grid_width):
                    writer.writerow([x, y, repr(float(self.bonds[y, x])), repr(float(self.cash[y, x]))])


def init_landscape(cfg: LandscapeConfig, rng: np.random.Generator) -> Landscape:
    """Build a fresh landscape; all cells unavailable, no desires."""
    return Landscape(cfg, rng)
