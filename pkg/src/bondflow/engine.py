"""The simulation engine: one society, stepped to collapse or the cap.

Fixed per-step order, documented and load-bearing for replayability:

1. Reroll every client's availability and direction; clear desires.
2. Each Active market maker, in id order, phones exactly one uniformly
   chosen client from its base. Unavailable client: contact ends, no
   decision. Available: one desire query to the provider. Yes: the MM MUST
   trade (servicing obligation), sized by the client's direction.
3. Interbank rebalancing: cash-poor MMs sell bonds at par to the
   richest-cash peer, at most one trade per needy MM per step.
4. Business costs burn each Active MM's resources; the cease rule runs.
5. The step counter increments.

Trades never create or destroy value: the engine tracks exactly how much
each resource the cost metabolism consumed, and the conservation audit
checks clients + MMs + consumed == initial totals after every step.

A run is strictly single-threaded; batch parallelism lives in the harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .agents import (
    AgentConfig,
    CeaseRule,
    MarketMakerState,
    apply_costs,
    client_base,
    init_market_makers,
)
from .decision import (
    DecisionOutcome,
    DecisionProvider,
    DecisionState,
    DesireQuery,
    journal_line,
)
from .errors import ProviderHardFailure
from .landscape import Direction, Landscape, LandscapeConfig, init_landscape
from .prompts import PromptTemplate
from .seeding import (
    STREAM_AGENT_INIT,
    STREAM_CONTACT_SELECTION,
    STREAM_LANDSCAPE_INIT,
    STREAM_PROVIDER,
    STREAM_STEP_ROLLS,
    substream,
)

DEFAULT_MAX_STEPS = 1500
DEFAULT_INTERBANK_RUNWAY_STEPS = 3.0


class TerminalReason(Enum):
    ALL_CEASED = "all_ceased"
    STEP_LIMIT = "step_limit"


class CounterpartyKind(Enum):
    CLIENT = "client"
    MARKET_MAKER = "mm"


@dataclass(frozen=True)
class TradeRecord:
    step: int
    mm_id: int
    counterparty_kind: CounterpartyKind
    counterparty: tuple[int, int] | int  # client position or partner mm_id
    client_direction: Direction | None  # None for interbank legs
    bond_qty: float
    cash_qty: float


@dataclass(frozen=True)
class StepReport:
    contacts: int
    decision_requests: int
    trades: int
    ceases: int


@dataclass
class SimulationResult:
    """Final state bundle of one run - everything metrics needs."""

    sim_id: int
    seed: int
    terminal_step: int
    terminal_reason: TerminalReason | None
    steps_executed: int
    contacts: int
    mms: list[MarketMakerState]
    trades: list[TradeRecord]
    decisions: list[tuple[DesireQuery, DecisionOutcome]]
    initial_client_bonds: float
    initial_client_cash: float
    initial_mm_bonds: float
    initial_mm_cash: float
    consumed_bonds: float
    consumed_cash: float
    journal_lines: list[str] | None = None
    aborted: bool = False
    abort_reason: str | None = None


class Simulation:
    def __init__(
        self,
        sim_id: int,
        seed: int,
        landscape_cfg: LandscapeConfig,
        agent_cfg: AgentConfig,
        provider: DecisionProvider,
        *,
        max_steps: int = DEFAULT_MAX_STEPS,
        interbank_runway_steps: float = DEFAULT_INTERBANK_RUNWAY_STEPS,
        journal_template: PromptTemplate = PromptTemplate.TIMELINESS,
        keep_journal: bool = False,
    ) -> None:
        self.sim_id = sim_id
        self.seed = seed
        self.provider = provider
        self.max_steps = max_steps
        self.interbank_runway_steps = interbank_runway_steps
        self.cease_rule: CeaseRule = agent_cfg.cease_rule
        self.journal_template = journal_template

        # Named substreams: provider draws never perturb landscape draws.
        self._rng_rolls = substream(seed, STREAM_STEP_ROLLS)
        self._rng_contact = substream(seed, STREAM_CONTACT_SELECTION)
        self._rng_provider = substream(seed, STREAM_PROVIDER)

        self.grid: Landscape = init_landscape(landscape_cfg, substream(seed, STREAM_LANDSCAPE_INIT))
        dims = self.grid.shape
        self.mms: list[MarketMakerState] = init_market_makers(
            agent_cfg, dims, substream(seed, STREAM_AGENT_INIT)
        )
        # Bases are immutable; compute once.
        self._bases: list[list[tuple[int, int]]] = [client_base(mm, dims) for mm in self.mms]

        self.step_no = 0
        self.seq = 0
        self.contacts = 0
        self.trades: list[TradeRecord] = []
        self.decisions: list[tuple[DesireQuery, DecisionOutcome]] = []
        self.journal_lines: list[str] | None = [] if keep_journal else None

        self.initial_client_bonds, self.initial_client_cash = self.grid.totals()
        self.initial_mm_bonds = sum(mm.bonds_acc for mm in self.mms)
        self.initial_mm_cash = sum(mm.cash_acc for mm in self.mms)
        self.consumed_bonds = 0.0
        self.consumed_cash = 0.0

    # -- step phases --------------------------------------------------

    def any_active(self) -> bool:
        return any(mm.active for mm in self.mms)

    def step(self) -> StepReport:
        """Execute one full round; see the module docstring for the order."""
        assert self.any_active(), "step() on a fully ceased society"
        assert self.step_no < self.max_steps, "step() past max_steps"

        self.grid.roll_step_state(self._rng_rolls)

        contacts = requests = trades = 0
        for mm in self.mms:
            if not mm.active:
                continue
            contacts += 1
            record, requested = self._contact_client(mm)
            requests += requested
            if record is not None:
                trades += 1

        self.contacts += contacts
        interbank = self._interbank_rebalance()
        trades += len(interbank)

        ceases = 0
        for mm in self.mms:
            if not mm.active:
                continue
            consumed_b, consumed_c, ceased = apply_costs(mm, self.step_no, self.cease_rule)
            self.consumed_bonds += consumed_b
            self.consumed_cash += consumed_c
            if ceased:
                ceases += 1

        self.step_no += 1
        return StepReport(contacts=contacts, decision_requests=requests, trades=trades, ceases=ceases)

    def _contact_client(self, mm: MarketMakerState) -> tuple[TradeRecord | None, int]:
        """One call: pick a client, maybe ask, maybe trade. Returns (trade, asked)."""
        base = self._bases[mm.id]
        x, y = base[int(self._rng_contact.integers(len(base)))]
        if not self.grid.available[y, x]:
            return None, 0
        cell = self.grid.cell(x, y)
        query = DesireQuery(
            sim_id=self.sim_id,
            step=self.step_no,
            mm_id=mm.id,
            client_position=(x, y),
            client_bonds=cell.bonds,
            client_cash=cell.cash,
            sequence_no=self.seq,
        )
        self.seq += 1
        outcome = self.provider.decide(query, self._rng_provider)
        self.decisions.append((query, outcome))
        self.grid.set_desire(x, y, outcome)
        if self.journal_lines is not None:
            self.journal_lines.append(journal_line(query, outcome, self.journal_template))
        if outcome.state is not DecisionState.YES:
            return None, 1
        record = self._execute_client_trade(mm, x, y, cell.direction_now)
        if record is not None:
            self.trades.append(record)
        return record, 1

    def _execute_client_trade(
        self, mm: MarketMakerState, x: int, y: int, direction: Direction
    ) -> TradeRecord | None:
        """Obligated trade with the client at (x, y); None if zero-quantity.

        Sell: the client unloads its FULL bond holding; the MM pays what
        cash it can, capped at par value. Buy: par swap capped by both the
        client's cash and the MM's bond inventory.
        """
        bonds = float(self.grid.bonds[y, x])
        cash = float(self.grid.cash[y, x])
        if direction is Direction.SELL:
            bond_qty = bonds
            cash_qty = min(mm.cash_acc, bond_qty)
            if bond_qty <= 0.0 and cash_qty <= 0.0:
                return None
            self.grid.apply_trade(x, y, -bond_qty, cash_qty)
            mm.bonds_acc += bond_qty
            mm.cash_acc -= cash_qty
        else:
            qty = min(cash, mm.bonds_acc)
            if qty <= 0.0:
                return None
            bond_qty = cash_qty = qty
            self.grid.apply_trade(x, y, qty, -qty)
            mm.bonds_acc -= qty
            mm.cash_acc += qty
        return TradeRecord(
            step=self.step_no,
            mm_id=mm.id,
            counterparty_kind=CounterpartyKind.CLIENT,
            counterparty=(x, y),
            client_direction=direction,
            bond_qty=bond_qty,
            cash_qty=cash_qty,
        )

    def _interbank_rebalance(self) -> list[TradeRecord]:
        """Cash-poor MMs sell bonds at par to the richest-cash peer.

        Needy = cash runway (cash / cash rate) below the configured
        threshold. Processed in id order; the buyer is re-picked per needy
        MM (ties to the lowest id); at most one trade per needy MM per
        step; zero-quantity outcomes are skipped.
        """
        records: list[TradeRecord] = []
        active = [mm for mm in self.mms if mm.active]
        if len(active) < 2:
            return records
        for mm in active:
            runway = mm.cash_acc / mm.cash_rate
            if runway >= self.interbank_runway_steps:
                continue
            partners = [p for p in active if p.id != mm.id]
            buyer = max(partners, key=lambda p: (p.cash_acc, -p.id))
            need = self.interbank_runway_steps * mm.cash_rate - mm.cash_acc
            qty = min(mm.bonds_acc, buyer.cash_acc, need)
            if qty <= 0.0:
                continue
            mm.bonds_acc -= qty
            mm.cash_acc += qty
            buyer.bonds_acc += qty
            buyer.cash_acc -= qty
            record = TradeRecord(
                step=self.step_no,
                mm_id=mm.id,
                counterparty_kind=CounterpartyKind.MARKET_MAKER,
                counterparty=buyer.id,
                client_direction=None,
                bond_qty=qty,
                cash_qty=qty,
            )
            records.append(record)
            self.trades.append(record)
        return records

    # -- whole-run API -------------------------------------------------

    def run(self) -> SimulationResult:
        """Step until all MMs cease or the cap; hard failures flush partial logs."""
        aborted = False
        abort_reason: str | None = None
        try:
            while self.any_active() and self.step_no < self.max_steps:
                self.step()
        except ProviderHardFailure as exc:
            aborted = True
            abort_reason = str(exc)
        if aborted:
            reason = None
        elif not self.any_active():
            reason = TerminalReason.ALL_CEASED
        else:
            reason = TerminalReason.STEP_LIMIT
        return SimulationResult(
            sim_id=self.sim_id,
            seed=self.seed,
            terminal_step=self.terminal_step,
            terminal_reason=reason,
            steps_executed=self.step_no,
            contacts=self.contacts,
            mms=self.mms,
            trades=self.trades,
            decisions=self.decisions,
            initial_client_bonds=self.initial_client_bonds,
            initial_client_cash=self.initial_client_cash,
            initial_mm_bonds=self.initial_mm_bonds,
            initial_mm_cash=self.initial_mm_cash,
            consumed_bonds=self.consumed_bonds,
            consumed_cash=self.consumed_cash,
            journal_lines=self.journal_lines,
            aborted=aborted,
            abort_reason=abort_reason,
        )

    @property
    def terminal_step(self) -> int:
        """Index of the last executed step (0 if none ran yet)."""
        return max(0, self.step_no - 1)

    def conservation_errors(self) -> tuple[float, float]:
        """Relative drift of (bonds, cash) vs the closed-system law."""
        grid_b, grid_c = self.grid.totals()
        mm_b = sum(mm.bonds_acc for mm in self.mms)
        mm_c = sum(mm.cash_acc for mm in self.mms)
        init_b = self.initial_client_bonds + self.initial_mm_bonds
        init_c = self.initial_client_cash + self.initial_mm_cash
        err_b = abs(grid_b + mm_b + self.consumed_bonds - init_b) / max(init_b, 1e-12)
        err_c = abs(grid_c + mm_c + self.consumed_cash - init_c) / max(init_c, 1e-12)
        return err_b, err_c


def run_simulation(
    sim_id: int,
    seed: int,
    landscape_cfg: LandscapeConfig,
    agent_cfg: AgentConfig,
    provider: DecisionProvider,
    *,
    max_steps: int = DEFAULT_MAX_STEPS,
    interbank_runway_steps: float = DEFAULT_INTERBANK_RUNWAY_STEPS,
    journal_template: PromptTemplate = PromptTemplate.TIMELINESS,
    keep_journal: bool = False,
) -> SimulationResult:
    """Build and run one simulation to its terminal state."""
    sim = Simulation(
        sim_id,
        seed,
        landscape_cfg,
        agent_cfg,
        provider,
        max_steps=max_steps,
        interbank_runway_steps=interbank_runway_steps,
        journal_template=journal_template,
        keep_journal=keep_journal,
    )
    return sim.run()
