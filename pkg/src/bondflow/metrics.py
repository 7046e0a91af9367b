"""Statistics over completed runs: summaries, batch tables, ratio series.

Everything here is a pure function over logs. Two properties matter:

- Recount equivalence: every summary field is recomputable from the raw
  CSV logs, and the recount matches the in-memory summary EXACTLY (same
  float values), because both paths sum the same numbers in the same
  order and CSV floats round-trip through shortest-repr formatting.
- Ratio arithmetic: rolling-window yes ratios are integer window counts
  divided once, so an all-yes window is exactly 1.0 and an all-no window
  exactly 0.0 (float convolution would give 0.9999999999999999).

Error outcomes are excluded from both ratio series (yes/(yes+no)
semantics) and tallied separately.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np

from .decision import DecisionState
from .engine import CounterpartyKind, SimulationResult, TerminalReason

DEFAULT_ROLLING_WINDOW = 10

# Columns and row labels of the three emitted tables. The shapes mirror
# the reporting tables this package exists to reproduce; golden tests pin
# them.
FULL_TABLE_COLUMNS = [
    "Statistic",
    "MaxLife",
    "MM-to-Client Bond Trading (%)",
    "MM-to-Client Cash Trading (%)",
    "MM-2-MM Bonds (%)",
    "MM-2-MM Cash (%)",
]
FULL_TABLE_ROWS = ["mean", "std", "25%", "50%", "75%", "max"]
CLIENT_TABLE_COLUMNS = [
    "Statistic",
    "Max Life Agents",
    "MM-to-Client Bond Trading (%)",
    "MM-to-Client Cash Trading (%)",
]
CLIENT_TABLE_ROWS = ["Mean", "Std", "25%", "50%", "75%", "Max"]
YES_RATIO_TABLE_COLUMNS = ["Statistic", "Yes/No Ratio (%)", "Rolling 10 Requests (%)"]
YES_RATIO_TABLE_ROWS = ["Mean", "Std Dev", "Min", "Max"]


@dataclass(frozen=True)
class SimulationSummary:
    sim_id: int
    terminal_step: int
    terminal_reason: TerminalReason | None
    steps_executed: int
    max_life: int
    mm_client_bond_pct: float
    mm_client_cash_pct: float
    interbank_bond_pct: float
    interbank_cash_pct: float
    contacts: int
    decision_requests: int
    yes_count: int
    no_count: int
    error_count: int
    trade_count: int  # client legs only
    interbank_trade_count: int
    initial_client_bonds: float
    initial_client_cash: float


@dataclass(frozen=True)
class StatRow:
    mean: float
    std: float
    p25: float
    p50: float
    p75: float
    max: float


@dataclass(frozen=True)
class BatchSummary:
    n_simulations: int
    metrics: Mapping[str, StatRow]
    cap_count: int  # simulations with an MM still alive at the step cap


@dataclass(frozen=True)
class SeriesStats:
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class YesRatioSeries:
    """Cumulative and rolling yes/(yes+no) ratios over a decision stream.

    positions[i] is the index of the i-th non-error outcome in the input
    stream. rolling[i] covers the window ending at positions[i+window-1].
    """

    window: int
    positions: list[int]
    cumulative: list[float]
    rolling: list[float]
    yes_count: int
    no_count: int
    error_count: int


def _client_pct(volume: float, initial_total: float) -> float:
    if initial_total <= 0.0:
        return 0.0
    return min(100.0, 100.0 * volume / initial_total)


def _share_pct(part: float, total: float) -> float:
    if total <= 0.0:
        return 0.0
    return 100.0 * part / total


def summarize_simulation(result: SimulationResult) -> SimulationSummary:
    """All per-run metrics from the final state bundle."""
    client_bond_vol = client_cash_vol = 0.0
    ib_bond_vol = ib_cash_vol = 0.0
    trade_count = interbank_trade_count = 0
    for trade in result.trades:
        if trade.counterparty_kind is CounterpartyKind.CLIENT:
            client_bond_vol += trade.bond_qty
            client_cash_vol += trade.cash_qty
            trade_count += 1
        else:
            ib_bond_vol += trade.bond_qty
            ib_cash_vol += trade.cash_qty
            interbank_trade_count += 1

    yes = no = err = 0
    for _, outcome in result.decisions:
        if outcome.state is DecisionState.YES:
            yes += 1
        elif outcome.state is DecisionState.NO:
            no += 1
        else:
            err += 1

    if result.steps_executed == 0:
        max_life = 0
    else:
        max_life = max(
            mm.ceased_at_step if mm.ceased_at_step is not None else result.terminal_step
            for mm in result.mms
        )

    return SimulationSummary(
        sim_id=result.sim_id,
        terminal_step=result.terminal_step,
        terminal_reason=result.terminal_reason,
        steps_executed=result.steps_executed,
        max_life=max_life,
        mm_client_bond_pct=_client_pct(client_bond_vol, result.initial_client_bonds),
        mm_client_cash_pct=_client_pct(client_cash_vol, result.initial_client_cash),
        interbank_bond_pct=_share_pct(ib_bond_vol, client_bond_vol + ib_bond_vol),
        interbank_cash_pct=_share_pct(ib_cash_vol, client_cash_vol + ib_cash_vol),
        contacts=result.contacts,
        decision_requests=len(result.decisions),
        yes_count=yes,
        no_count=no,
        error_count=err,
        trade_count=trade_count,
        interbank_trade_count=interbank_trade_count,
        initial_client_bonds=result.initial_client_bonds,
        initial_client_cash=result.initial_client_cash,
    )


BATCH_METRIC_FIELDS = (
    "max_life",
    "mm_client_bond_pct",
    "mm_client_cash_pct",
    "interbank_bond_pct",
    "interbank_cash_pct",
)


def aggregate_batch(summaries: Sequence[SimulationSummary]) -> BatchSummary:
    """Mean/std/quartiles/max per metric; population std, linear percentiles."""
    if not summaries:
        raise ValueError("aggregate_batch needs at least one summary")
    metrics: dict[str, StatRow] = {}
    for name in BATCH_METRIC_FIELDS:
        xs = np.array([float(getattr(s, name)) for s in summaries], dtype=np.float64)
        metrics[name] = StatRow(
            mean=float(xs.mean()),
            std=float(xs.std()),
            p25=float(np.percentile(xs, 25)),
            p50=float(np.percentile(xs, 50)),
            p75=float(np.percentile(xs, 75)),
            max=float(xs.max()),
        )
    cap_count = sum(1 for s in summaries if s.terminal_reason is TerminalReason.STEP_LIMIT)
    return BatchSummary(n_simulations=len(summaries), metrics=metrics, cap_count=cap_count)


def yes_ratio_series(
    states: Sequence[DecisionState], window: int = DEFAULT_ROLLING_WINDOW
) -> YesRatioSeries:
    """Cumulative and rolling yes ratios over an ordered decision stream."""
    if window < 1:
        raise ValueError("window must be >= 1")
    positions = [i for i, s in enumerate(states) if s is not DecisionState.ERROR]
    flags = np.array(
        [1 if states[i] is DecisionState.YES else 0 for i in positions], dtype=np.int64
    )
    error_count = len(states) - len(positions)
    k = len(flags)
    if k == 0:
        return YesRatioSeries(window, [], [], [], 0, 0, error_count)
    csum = np.cumsum(flags)
    denominators = np.arange(1, k + 1, dtype=np.int64)
    cumulative = (csum / denominators).tolist()
    rolling: list[float] = []
    if k >= window:
        window_sums = csum[window - 1 :].copy()
        window_sums[1:] -= csum[: k - window]
        rolling = (window_sums / float(window)).tolist()
    yes_count = int(csum[-1])
    return YesRatioSeries(
        window=window,
        positions=positions,
        cumulative=cumulative,
        rolling=rolling,
        yes_count=yes_count,
        no_count=k - yes_count,
        error_count=error_count,
    )


def series_stats(values: Sequence[float]) -> SeriesStats:
    if not values:
        return SeriesStats(0.0, 0.0, 0.0, 0.0)
    xs = np.asarray(values, dtype=np.float64)
    return SeriesStats(
        mean=float(xs.mean()), std=float(xs.std()), min=float(xs.min()), max=float(xs.max())
    )


# --------------------------------------------------------------------------
# Recount: summaries rebuilt from the raw CSV logs


def recount_simulation(
    trade_rows: Iterable[Mapping[str, str]],
    decision_rows: Iterable[Mapping[str, str]],
    lifecycle_rows: Iterable[Mapping[str, str]],
    *,
    sim_id: int,
    terminal_step: int,
    terminal_reason: TerminalReason | None,
    steps_executed: int,
    initial_client_bonds: float,
    initial_client_cash: float,
) -> SimulationSummary:
    """Rebuild a SimulationSummary from parsed CSV log rows.

    Row iterables must be in file order (which is append order) so that
    float summation reproduces the original exactly. The scalar run facts
    (terminal step/reason, denominators) are echoed inputs from the
    summaries log; everything else is recounted.
    """
    client_bond_vol = client_cash_vol = 0.0
    ib_bond_vol = ib_cash_vol = 0.0
    trade_count = interbank_trade_count = 0
    for row in trade_rows:
        if int(row["sim_id"]) != sim_id:
            continue
        if row["counterparty_kind"] == CounterpartyKind.CLIENT.value:
            client_bond_vol += float(row["bond_qty"])
            client_cash_vol += float(row["cash_qty"])
            trade_count += 1
        else:
            ib_bond_vol += float(row["bond_qty"])
            ib_cash_vol += float(row["cash_qty"])
            interbank_trade_count += 1

    yes = no = err = requests = 0
    for row in decision_rows:
        if int(row["sim_id"]) != sim_id:
            continue
        requests += 1
        state = DecisionState(row["state"])
        if state is DecisionState.YES:
            yes += 1
        elif state is DecisionState.NO:
            no += 1
        else:
            err += 1

    cease_steps: list[int | None] = []
    for row in lifecycle_rows:
        if int(row["sim_id"]) != sim_id:
            continue
        raw = row["ceased_at_step"].strip()
        cease_steps.append(int(raw) if raw else None)

    if steps_executed == 0 or not cease_steps:
        max_life = 0
        contacts = 0
    else:
        max_life = max(terminal_step if c is None else c for c in cease_steps)
        contacts = sum(
            sum(1 for c in cease_steps if c is None or c >= s) for s in range(steps_executed)
        )

    return SimulationSummary(
        sim_id=sim_id,
        terminal_step=terminal_step,
        terminal_reason=terminal_reason,
        steps_executed=steps_executed,
        max_life=max_life,
        mm_client_bond_pct=_client_pct(client_bond_vol, initial_client_bonds),
        mm_client_cash_pct=_client_pct(client_cash_vol, initial_client_cash),
        interbank_bond_pct=_share_pct(ib_bond_vol, client_bond_vol + ib_bond_vol),
        interbank_cash_pct=_share_pct(ib_cash_vol, client_cash_vol + ib_cash_vol),
        contacts=contacts,
        decision_requests=requests,
        yes_count=yes,
        no_count=no,
        error_count=err,
        trade_count=trade_count,
        interbank_trade_count=interbank_trade_count,
        initial_client_bonds=initial_client_bonds,
        initial_client_cash=initial_client_cash,
    )


# --------------------------------------------------------------------------
# Table rendering


def _format_value(v: float) -> str:
    return f"{v:.6g}"


def _render_csv(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    return buf.getvalue()


def _render_pretty(columns: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    table = [list(columns)] + [list(r) for r in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(columns))]
    lines = []
    for idx, row in enumerate(table):
        cells = [
            row[i].ljust(widths[i]) if i == 0 else row[i].rjust(widths[i])
            for i in range(len(row))
        ]
        lines.append("  ".join(cells).rstrip())
        if idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _stat_cell(stat: StatRow, row_label: str) -> float:
    key = {
        "mean": "mean",
        "std": "std",
        "std dev": "std",
        "25%": "p25",
        "50%": "p50",
        "75%": "p75",
        "max": "max",
    }[row_label.lower()]
    return getattr(stat, key)


def render_full_stats_table(batch: BatchSummary) -> tuple[str, str]:
    """Table of MaxLife plus client and interbank volume shares (csv, pretty)."""
    metric_order = BATCH_METRIC_FIELDS
    rows = []
    for label in FULL_TABLE_ROWS:
        rows.append(
            [label] + [_format_value(_stat_cell(batch.metrics[m], label)) for m in metric_order]
        )
    return _render_csv(FULL_TABLE_COLUMNS, rows), _render_pretty(FULL_TABLE_COLUMNS, rows)


def render_client_stats_table(batch: BatchSummary) -> tuple[str, str]:
    """Table of MaxLife plus client volume shares only (csv, pretty)."""
    metric_order = ("max_life", "mm_client_bond_pct", "mm_client_cash_pct")
    rows = []
    for label in CLIENT_TABLE_ROWS:
        rows.append(
            [label] + [_format_value(_stat_cell(batch.metrics[m], label)) for m in metric_order]
        )
    return _render_csv(CLIENT_TABLE_COLUMNS, rows), _render_pretty(CLIENT_TABLE_COLUMNS, rows)


def render_yes_ratio_table(series: YesRatioSeries) -> tuple[str, str]:
    """Table of cumulative vs rolling ratio statistics, in percent (csv, pretty)."""
    cum = series_stats(series.cumulative)
    roll = series_stats(series.rolling)
    cells = {
        "Mean": (cum.mean, roll.mean),
        "Std Dev": (cum.std, roll.std),
        "Min": (cum.min, roll.min),
        "Max": (cum.max, roll.max),
    }
    rows = []
    for label in YES_RATIO_TABLE_ROWS:
        c, r = cells[label]
        rows.append([label, _format_value(100.0 * c), _format_value(100.0 * r)])
    return _render_csv(YES_RATIO_TABLE_COLUMNS, rows), _render_pretty(YES_RATIO_TABLE_COLUMNS, rows)


def summary_field_names() -> list[str]:
    return [f.name for f in fields(SimulationSummary)]
