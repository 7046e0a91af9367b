"""Experiment harness: presets, config resolution, batch execution, outputs.

Three presets mirror the study this package reproduces:

- exp1: Bernoulli coin-flip desire (p=0.5), availability 0.20, 200 runs.
- exp2: an aversion-prompt society, availability 0.20, 200 runs. Offline
  by default, replaying the recorded corpus shipped with the package; a
  live gateway run is opt-in.
- exp3: a timeliness-prompt society, availability 0.40, 150 runs. Offline
  by default via the calibrated bursty provider; live is opt-in.

Config precedence: CLI flags > config file > preset. A preset also locks
the fields that define it (exp1 IS the coin-flip experiment, so overriding
its prompt template or bernoulli probability elsewhere is a contradiction,
not an override).

Batches are deterministic: per-sim seeds derive from the master seed, all
output files are written in sim order with fixed formatting, and the
parallelism degree never changes a byte of output. The manifest is the
single file carrying wall-clock data, so determinism checks compare trees
excluding it.
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import datetime as _dt
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Mapping

import yaml

from .agents import AgentConfig, CeaseRule
from .decision import (
    DecisionProvider,
    DecisionState,
    JournalRecord,
    ProviderConfig,
    ProviderKind,
    build_provider,
    read_journal,
    split_journal,
)
from .engine import (
    DEFAULT_INTERBANK_RUNWAY_STEPS,
    DEFAULT_MAX_STEPS,
    CounterpartyKind,
    SimulationResult,
    Simulation,
)
from .errors import ConfigError
from .landscape import LandscapeConfig, LognormalParams
from .metrics import (
    DEFAULT_ROLLING_WINDOW,
    BatchSummary,
    SimulationSummary,
    YesRatioSeries,
    aggregate_batch,
    render_client_stats_table,
    render_full_stats_table,
    render_yes_ratio_table,
    summarize_simulation,
    summary_field_names,
    yes_ratio_series,
)
from .prompts import PromptTemplate
from .seeding import simulation_seed

logger = logging.getLogger(__name__)

PRESET_NAMES = ("exp1", "exp2", "exp3")

TRADES_CSV = "trades.csv"
DECISIONS_CSV = "decisions.csv"
LIFECYCLE_CSV = "lifecycle.csv"
SUMMARIES_CSV = "summaries.csv"
SERIES_CSV = "yes_ratio_series.csv"
MANIFEST_JSON = "manifest.json"
CONFIG_ECHO = "resolved_config.yaml"
JOURNAL_DIR = "journals"
TABLE_FILES = {
    "full": ("stats_full.csv", "stats_full.txt"),
    "client": ("stats_client.csv", "stats_client.txt"),
    "yes_ratio": ("stats_yes_ratio.csv", "stats_yes_ratio.txt"),
}


def shipped_aversion_corpus() -> str:
    """Path of the recorded aversion-reply corpus shipped as package data."""
    return str(resources.files("bondflow").joinpath("data", "fixtures", "aversion_replay.jsonl"))


def shipped_timeliness_fixture() -> str:
    """Path of the 10k-decision bursty fixture shipped as package data."""
    return str(resources.files("bondflow").joinpath("data", "fixtures", "timeliness_10k.jsonl"))


@dataclass(frozen=True)
class ExperimentConfig:
    landscape: LandscapeConfig = field(default_factory=LandscapeConfig)
    agents: AgentConfig = field(default_factory=AgentConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    max_steps: int = DEFAULT_MAX_STEPS
    n_simulations: int = 200
    master_seed: int = 42
    output_dir: str | None = None
    parallelism: int = 1
    interbank_runway_steps: float = DEFAULT_INTERBANK_RUNWAY_STEPS
    rolling_window: int = DEFAULT_ROLLING_WINDOW
    journal: bool | None = None  # None = journal unless replaying
    preset: str | None = None

    def validate(self) -> None:
        self.landscape.validate()
        self.agents.validate()
        self.provider.validate()
        if self.n_simulations < 1:
            raise ConfigError("n_simulations must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be >= 0")
        if self.interbank_runway_steps < 0:
            raise ConfigError("interbank_runway_steps must be >= 0")
        if self.rolling_window < 1:
            raise ConfigError("rolling_window must be >= 1")

    def journal_enabled(self) -> bool:
        if self.journal is not None:
            return self.journal
        return self.provider.kind is not ProviderKind.REPLAY


# --------------------------------------------------------------------------
# Presets and config resolution


def _build_preset(name: str) -> ExperimentConfig:
    if name == "exp1":
        return ExperimentConfig(
            landscape=LandscapeConfig(availability_p=0.20),
            provider=ProviderConfig(kind=ProviderKind.BERNOULLI, bernoulli_p=0.5),
            n_simulations=200,
            preset="exp1",
        )
    if name == "exp2":
        return ExperimentConfig(
            landscape=LandscapeConfig(availability_p=0.20),
            provider=ProviderConfig(
                kind=ProviderKind.REPLAY,
                replay_path=shipped_aversion_corpus(),
                prompt_template=PromptTemplate.AVERSION2,
            ),
            n_simulations=200,
            preset="exp2",
        )
    if name == "exp3":
        return ExperimentConfig(
            landscape=LandscapeConfig(availability_p=0.40),
            provider=ProviderConfig(
                kind=ProviderKind.SYNTHETIC_BURSTY,
                prompt_template=PromptTemplate.TIMELINESS,
            ),
            n_simulations=150,
            preset="exp3",
        )
    raise ConfigError(f"unknown preset {name!r} (expected one of {', '.join(PRESET_NAMES)})")


# Fields a preset pins. Overriding one of these is a contradiction.
_PRESET_PROVIDER_KINDS: dict[str, set[ProviderKind]] = {
    "exp1": {ProviderKind.BERNOULLI},
    "exp2": {ProviderKind.REPLAY, ProviderKind.LIVE_LLM},
    "exp3": {ProviderKind.SYNTHETIC_BURSTY, ProviderKind.REPLAY, ProviderKind.LIVE_LLM},
}
_PRESET_LOCKED_KEYS: dict[str, set[str]] = {
    "exp1": {
        "provider.prompt_template",
        "provider.replay_path",
        "provider.burst_stay_yes",
        "provider.burst_stay_no",
    },
    "exp2": {"provider.bernoulli_p", "provider.burst_stay_yes", "provider.burst_stay_no"},
    "exp3": {"provider.bernoulli_p"},
}
_PRESET_TEMPLATES: dict[str, set[PromptTemplate]] = {
    "exp2": {PromptTemplate.AVERSION1, PromptTemplate.AVERSION2, PromptTemplate.AVERSION3},
    "exp3": {PromptTemplate.TIMELINESS},
}

_ENUM_FIELDS: dict[str, Callable[[str], Any]] = {
    "landscape.lognormal_params": LognormalParams,
    "agents.cease_rule": CeaseRule,
    "provider.kind": ProviderKind,
    "provider.prompt_template": PromptTemplate,
}

_SECTION_TYPES = {"landscape": LandscapeConfig, "agents": AgentConfig, "provider": ProviderConfig}


def _coerce(path: str, value: Any) -> Any:
    if path in _ENUM_FIELDS and isinstance(value, str):
        enum_cls = _ENUM_FIELDS[path]
        try:
            return enum_cls(value)
        except ValueError as exc:
            raise ConfigError(f"invalid value {value!r} for {path}") from exc
    return value


def _apply_updates(
    cfg: ExperimentConfig, updates: Mapping[str, Any]
) -> tuple[ExperimentConfig, set[str]]:
    """Apply dotted-key updates; returns (new config, touched key paths)."""
    touched: set[str] = set()
    section_updates: dict[str, dict[str, Any]] = {}
    top_updates: dict[str, Any] = {}
    top_fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    for key, value in updates.items():
        if value is None and key not in ("journal", "output_dir"):
            continue
        if "." in key:
            section, _, leaf = key.partition(".")
        elif key in _SECTION_TYPES:
            # whole-section dict from a config file
            if not isinstance(value, Mapping):
                raise ConfigError(f"config section {key!r} must be a mapping")
            for leaf, leaf_value in value.items():
                _check_section_field(key, leaf)
                path = f"{key}.{leaf}"
                section_updates.setdefault(key, {})[leaf] = _coerce(path, leaf_value)
                touched.add(path)
            continue
        else:
            section, leaf = "", key
        if section:
            _check_section_field(section, leaf)
            path = f"{section}.{leaf}"
            section_updates.setdefault(section, {})[leaf] = _coerce(path, value)
            touched.add(path)
        else:
            if leaf not in top_fields or leaf in _SECTION_TYPES:
                raise ConfigError(f"unknown config key {leaf!r}")
            top_updates[leaf] = _coerce(leaf, value)
            touched.add(leaf)
    for section, section_vals in section_updates.items():
        current = getattr(cfg, section)
        cfg = replace(cfg, **{section: replace(current, **section_vals)})
    if top_updates:
        cfg = replace(cfg, **top_updates)
    return cfg, touched


def _check_section_field(section: str, leaf: str) -> None:
    if section not in _SECTION_TYPES:
        raise ConfigError(f"unknown config section {section!r}")
    names = {f.name for f in dataclasses.fields(_SECTION_TYPES[section])}
    if leaf not in names:
        raise ConfigError(f"unknown config key {section}.{leaf!r}")


def _check_preset_locks(preset: str, cfg: ExperimentConfig, touched: set[str]) -> None:
    locked = _PRESET_LOCKED_KEYS.get(preset, set())
    clash = sorted(touched & locked)
    if clash:
        raise ConfigError(
            f"preset {preset} pins {', '.join(clash)}; overriding contradicts the preset"
        )
    allowed_kinds = _PRESET_PROVIDER_KINDS.get(preset)
    if allowed_kinds and cfg.provider.kind not in allowed_kinds:
        names = ", ".join(sorted(k.value for k in allowed_kinds))
        raise ConfigError(
            f"preset {preset} requires a provider kind in {{{names}}}, got {cfg.provider.kind.value}"
        )
    allowed_templates = _PRESET_TEMPLATES.get(preset)
    if allowed_templates and cfg.provider.prompt_template not in allowed_templates:
        names = ", ".join(sorted(t.value for t in allowed_templates))
        raise ConfigError(
            f"preset {preset} requires a prompt template in {{{names}}}, "
            f"got {cfg.provider.prompt_template.value}"
        )


def resolve_preset(
    name: str, overrides: Mapping[str, Any] | None = None
) -> ExperimentConfig:
    """Preset base plus explicit dotted-key overrides, contradiction-checked."""
    cfg = _build_preset(name)
    cfg, touched = _apply_updates(cfg, overrides or {})
    _check_preset_locks(name, cfg, touched)
    cfg.validate()
    return cfg


def load_config_file(path: Path | str, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Config from a YAML document, optionally based on a preset.

    Precedence: overrides (CLI) > file values > preset values.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must contain a mapping")
    preset = data.pop("preset", None)
    if preset is not None and preset not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {preset!r} in config file")
    cfg = _build_preset(preset) if preset else ExperimentConfig()
    cfg, touched_file = _apply_updates(cfg, data)
    cfg, touched_cli = _apply_updates(cfg, overrides or {})
    if preset:
        _check_preset_locks(preset, cfg, touched_file | touched_cli)
    cfg.validate()
    return cfg


def resolve_config(source: str, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Resolve a CLI source argument: a preset name or a config-file path."""
    if source in PRESET_NAMES:
        return resolve_preset(source, overrides)
    if Path(source).exists():
        return load_config_file(source, overrides)
    raise ConfigError(f"{source!r} is neither a preset ({', '.join(PRESET_NAMES)}) nor a config file")


# Fields that affect how a batch executes but not a single numeric output.
# They live in the manifest, not the config echo, so output trees stay
# byte-identical across parallelism degrees and directory choices.
_EXECUTION_FIELDS = ("parallelism", "output_dir")


def config_to_dict(cfg: ExperimentConfig, *, include_execution: bool = False) -> dict[str, Any]:
    """Plain-type dict mirror of the config (enums by value), YAML/JSON-safe."""
    import enum

    def scrub(obj: Any) -> Any:
        if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
            return {f.name: scrub(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        if isinstance(obj, enum.Enum):
            return obj.value
        return obj

    data = scrub(cfg)
    if not include_execution:
        for name in _EXECUTION_FIELDS:
            data.pop(name, None)
    return data


def config_hash(cfg: ExperimentConfig) -> str:
    """Content hash of the resolved config; changes iff any field changes."""
    canon = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# --------------------------------------------------------------------------
# Batch execution


@dataclass(frozen=True)
class _SimTask:
    sim_id: int
    seed: int
    landscape: LandscapeConfig
    agents: AgentConfig
    provider: ProviderConfig
    replay_slice: list[JournalRecord] | None
    max_steps: int
    interbank_runway_steps: float
    journal_template: PromptTemplate
    keep_journal: bool


def _run_one_task(task: _SimTask) -> SimulationResult:
    """Worker entry point; must stay module-level and picklable."""
    provider = build_provider(task.provider, task.replay_slice)
    sim = Simulation(
        task.sim_id,
        task.seed,
        task.landscape,
        task.agents,
        provider,
        max_steps=task.max_steps,
        interbank_runway_steps=task.interbank_runway_steps,
        journal_template=task.journal_template,
        keep_journal=task.keep_journal,
    )
    return sim.run()


@dataclass
class BatchResult:
    config: ExperimentConfig
    results: list[SimulationResult]
    summaries: list[SimulationSummary]
    batch: BatchSummary | None
    series: YesRatioSeries | None
    aborted: list[tuple[int, str]]
    skipped: list[int]
    output_dir: Path | None

    @property
    def ok(self) -> bool:
        return not self.aborted and not self.skipped


ProviderFactory = Callable[[int], DecisionProvider]


def run_batch(
    cfg: ExperimentConfig,
    *,
    provider_factory: ProviderFactory | None = None,
) -> BatchResult:
    """Run the whole batch and (if output_dir is set) write the artifact tree.

    provider_factory injects a custom provider per sim_id (testing and
    fixture capture); it bypasses the configured provider kind but keeps
    every other contract (journaling, seeding, outputs) intact.
    """
    cfg.validate()

    replay_slices: list[list[JournalRecord]] | None = None
    if provider_factory is None and cfg.provider.kind is ProviderKind.REPLAY:
        assert cfg.provider.replay_path is not None
        try:
            corpus = read_journal(cfg.provider.replay_path)
        except OSError as exc:
            raise ConfigError(f"cannot read replay corpus: {exc}") from exc
        replay_slices = split_journal(corpus)
        if len(replay_slices) < cfg.n_simulations:
            logger.warning(
                "replay corpus holds %d simulation slices for %d simulations; "
                "extra simulations will replay empty journals (all Error)",
                len(replay_slices), cfg.n_simulations,
            )
    if provider_factory is None and cfg.provider.kind is ProviderKind.LIVE_LLM:
        build_provider(cfg.provider)  # fail fast on missing credentials

    keep_journal = cfg.journal_enabled()
    tasks = []
    for i in range(cfg.n_simulations):
        replay_slice: list[JournalRecord] | None = None
        if replay_slices is not None:
            replay_slice = replay_slices[i] if i < len(replay_slices) else []
        tasks.append(
            _SimTask(
                sim_id=i,
                seed=simulation_seed(cfg.master_seed, i),
                landscape=cfg.landscape,
                agents=cfg.agents,
                provider=cfg.provider,
                replay_slice=replay_slice,
                max_steps=cfg.max_steps,
                interbank_runway_steps=cfg.interbank_runway_steps,
                journal_template=cfg.provider.prompt_template,
                keep_journal=keep_journal,
            )
        )

    results: list[SimulationResult] = []
    aborted: list[tuple[int, str]] = []
    started_at = _dt.datetime.now(_dt.timezone.utc)

    def note(result: SimulationResult) -> bool:
        """Collect one result; returns False once the batch should stop."""
        results.append(result)
        if result.aborted:
            aborted.append((result.sim_id, result.abort_reason or "unknown"))
            logger.error("simulation %d aborted: %s", result.sim_id, result.abort_reason)
            return False
        return True

    if provider_factory is not None:
        for task in tasks:
            provider = provider_factory(task.sim_id)
            sim = Simulation(
                task.sim_id,
                task.seed,
                task.landscape,
                task.agents,
                provider,
                max_steps=task.max_steps,
                interbank_runway_steps=task.interbank_runway_steps,
                journal_template=task.journal_template,
                keep_journal=task.keep_journal,
            )
            if not note(sim.run()):
                break
    elif cfg.parallelism <= 1 or cfg.n_simulations == 1:
        for task in tasks:
            if not note(_run_one_task(task)):
                break
    elif cfg.provider.kind is ProviderKind.LIVE_LLM:
        # Threads, not processes: the request-rate limiter must actually be
        # shared process-wide across concurrent simulations.
        with concurrent.futures.ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            for result in pool.map(_run_one_task, tasks):
                if not note(result):
                    break
    else:
        chunk = max(1, cfg.n_simulations // (cfg.parallelism * 4))
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.parallelism) as pool:
            for result in pool.map(_run_one_task, tasks, chunksize=chunk):
                if not note(result):
                    break

    finished_at = _dt.datetime.now(_dt.timezone.utc)
    skipped = [t.sim_id for t in tasks[len(results):]]

    completed = [r for r in results if not r.aborted]
    summaries = [summarize_simulation(r) for r in completed]
    batch = aggregate_batch(summaries) if summaries else None

    # Pooled decision stream in (sim_id, seq) order, over everything logged.
    pooled_states: list[DecisionState] = []
    for r in results:
        pooled_states.extend(outcome.state for _, outcome in r.decisions)
    series = yes_ratio_series(pooled_states, cfg.rolling_window) if pooled_states else None

    out_dir = Path(cfg.output_dir) if cfg.output_dir else None
    batch_result = BatchResult(
        config=cfg,
        results=results,
        summaries=summaries,
        batch=batch,
        series=series,
        aborted=aborted,
        skipped=skipped,
        output_dir=out_dir,
    )
    if out_dir is not None:
        write_outputs(batch_result, started_at=started_at, finished_at=finished_at)
    return batch_result


# --------------------------------------------------------------------------
# Output assembly


def _csv_writer(fh):
    import csv

    return csv.writer(fh, lineterminator="\n")


def _fmt_float(x: float) -> str:
    return str(float(x))


def write_outputs(
    batch: BatchResult,
    *,
    started_at: _dt.datetime | None = None,
    finished_at: _dt.datetime | None = None,
) -> None:
    """Write the full artifact tree for a finished batch."""
    assert batch.output_dir is not None
    out = batch.output_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg = batch.config

    with open(out / TRADES_CSV, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(
            ["sim_id", "step", "mm_id", "counterparty_kind", "counterparty", "direction", "bond_qty", "cash_qty"]
        )
        for r in batch.results:
            for t in r.trades:
                if t.counterparty_kind is CounterpartyKind.CLIENT:
                    cp = f"{t.counterparty[0]}:{t.counterparty[1]}"
                else:
                    cp = str(t.counterparty)
                direction = t.client_direction.value if t.client_direction else ""
                w.writerow(
                    [r.sim_id, t.step, t.mm_id, t.counterparty_kind.value, cp, direction,
                     _fmt_float(t.bond_qty), _fmt_float(t.cash_qty)]
                )

    with open(out / DECISIONS_CSV, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["sim_id", "seq", "step", "mm_id", "x", "y", "state", "provider"])
        for r in batch.results:
            for q, o in r.decisions:
                x, y = q.client_position
                w.writerow(
                    [q.sim_id, q.sequence_no, q.step, q.mm_id, x, y, o.state.value, o.provider.value]
                )

    with open(out / LIFECYCLE_CSV, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["sim_id", "mm_id", "ceased_at_step", "breadth", "bond_rate", "cash_rate"])
        for r in batch.results:
            for mm in r.mms:
                ceased = "" if mm.ceased_at_step is None else mm.ceased_at_step
                w.writerow(
                    [r.sim_id, mm.id, ceased, mm.breadth, _fmt_float(mm.bond_rate), _fmt_float(mm.cash_rate)]
                )

    with open(out / SUMMARIES_CSV, "w", encoding="utf-8", newline="") as fh:
        w = _csv_writer(fh)
        names = summary_field_names()
        w.writerow(names)
        for s in batch.summaries:
            row = []
            for name in names:
                value = getattr(s, name)
                if name == "terminal_reason":
                    row.append(value.value if value else "")
                elif isinstance(value, float):
                    row.append(_fmt_float(value))
                else:
                    row.append(value)
            w.writerow(row)

    if batch.series is not None:
        series = batch.series
        with open(out / SERIES_CSV, "w", encoding="utf-8", newline="") as fh:
            w = _csv_writer(fh)
            w.writerow(["seq", "cumulative", "rolling"])
            for i, pos in enumerate(series.positions):
                roll_idx = i - (series.window - 1)
                rolling = (
                    _fmt_float(series.rolling[roll_idx])
                    if 0 <= roll_idx < len(series.rolling)
                    else ""
                )
                w.writerow([pos, _fmt_float(series.cumulative[i]), rolling])

    write_tables(batch, out)

    with open(out / CONFIG_ECHO, "w", encoding="utf-8", newline="") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True, default_flow_style=False)

    if cfg.journal_enabled():
        jdir = out / JOURNAL_DIR
        jdir.mkdir(exist_ok=True)
        for r in batch.results:
            if r.journal_lines is None:
                continue
            with open(jdir / f"sim_{r.sim_id:04d}.jsonl", "w", encoding="utf-8", newline="") as fh:
                fh.writelines(r.journal_lines)

    manifest = {
        "schema_version": 1,
        "started_at": started_at.isoformat() if started_at else None,
        "finished_at": finished_at.isoformat() if finished_at else None,
        "master_seed": cfg.master_seed,
        "provider_kind": cfg.provider.kind.value,
        "preset": cfg.preset,
        "n_simulations": cfg.n_simulations,
        "parallelism": cfg.parallelism,
        "output_dir": str(out),
        "completed": len(batch.summaries),
        "aborted": [{"sim_id": sid, "reason": reason} for sid, reason in batch.aborted],
        "skipped": batch.skipped,
        "config_sha256": config_hash(cfg),
        "status": "ok" if batch.ok else "partial",
    }
    with open(out / MANIFEST_JSON, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_tables(batch: BatchResult, out: Path) -> None:
    """Emit the three stats tables as CSV and pretty text."""
    out.mkdir(parents=True, exist_ok=True)
    if batch.batch is not None:
        for kind, render in (("full", render_full_stats_table), ("client", render_client_stats_table)):
            csv_text, pretty = render(batch.batch)
            csv_name, txt_name = TABLE_FILES[kind]
            (out / csv_name).write_text(csv_text, encoding="utf-8")
            (out / txt_name).write_text(pretty, encoding="utf-8")
    if batch.series is not None:
        csv_text, pretty = render_yes_ratio_table(batch.series)
        csv_name, txt_name = TABLE_FILES["yes_ratio"]
        (out / csv_name).write_text(csv_text, encoding="utf-8")
        (out / txt_name).write_text(pretty, encoding="utf-8")


# --------------------------------------------------------------------------
# Rebuilding tables from a finished output tree (the `tables` command)


def _parse_summary_row(row: Mapping[str, str]) -> SimulationSummary:
    def opt_reason(raw: str):
        from .engine import TerminalReason

        return TerminalReason(raw) if raw else None

    return SimulationSummary(
        sim_id=int(row["sim_id"]),
        terminal_step=int(row["terminal_step"]),
        terminal_reason=opt_reason(row["terminal_reason"]),
        steps_executed=int(row["steps_executed"]),
        max_life=int(row["max_life"]),
        mm_client_bond_pct=float(row["mm_client_bond_pct"]),
        mm_client_cash_pct=float(row["mm_client_cash_pct"]),
        interbank_bond_pct=float(row["interbank_bond_pct"]),
        interbank_cash_pct=float(row["interbank_cash_pct"]),
        contacts=int(row["contacts"]),
        decision_requests=int(row["decision_requests"]),
        yes_count=int(row["yes_count"]),
        no_count=int(row["no_count"]),
        error_count=int(row["error_count"]),
        trade_count=int(row["trade_count"]),
        interbank_trade_count=int(row["interbank_trade_count"]),
        initial_client_bonds=float(row["initial_client_bonds"]),
        initial_client_cash=float(row["initial_client_cash"]),
    )


def load_output_dir(out: Path | str) -> tuple[list[SimulationSummary], list[DecisionState]]:
    """Summaries and the pooled decision stream from a finished output tree."""
    import csv

    out = Path(out)
    summaries_path = out / SUMMARIES_CSV
    decisions_path = out / DECISIONS_CSV
    if not summaries_path.exists():
        raise ConfigError(f"{out} does not look like a batch output directory ({SUMMARIES_CSV} missing)")
    with open(summaries_path, encoding="utf-8", newline="") as fh:
        summaries = [_parse_summary_row(row) for row in csv.DictReader(fh)]
    states: list[DecisionState] = []
    if decisions_path.exists():
        with open(decisions_path, encoding="utf-8", newline="") as fh:
            states = [DecisionState(row["state"]) for row in csv.DictReader(fh)]
    return summaries, states


def rebuild_tables(out: Path | str, window: int = DEFAULT_ROLLING_WINDOW) -> dict[str, str]:
    """Recompute and rewrite the stats tables from a run's CSV logs.

    Returns the pretty text of each table keyed by table kind.
    """
    out = Path(out)
    summaries, states = load_output_dir(out)
    if not summaries:
        raise ConfigError(f"{out} holds no completed simulations to tabulate")
    batch = aggregate_batch(summaries)
    series = yes_ratio_series(states, window) if states else None
    pretty_by_kind: dict[str, str] = {}
    for kind, render in (("full", render_full_stats_table), ("client", render_client_stats_table)):
        csv_text, pretty = render(batch)
        csv_name, txt_name = TABLE_FILES[kind]
        (out / csv_name).write_text(csv_text, encoding="utf-8")
        (out / txt_name).write_text(pretty, encoding="utf-8")
        pretty_by_kind[kind] = pretty
    if series is not None:
        csv_text, pretty = render_yes_ratio_table(series)
        csv_name, txt_name = TABLE_FILES["yes_ratio"]
        (out / csv_name).write_text(csv_text, encoding="utf-8")
        (out / txt_name).write_text(pretty, encoding="utf-8")
        pretty_by_kind["yes_ratio"] = pretty
    return pretty_by_kind
