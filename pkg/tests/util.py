"""Shared test helpers: the canonical mini-batch behind the golden files.

Kept importable by both the test suite and scripts/build_goldens.py so the
committed golden tables and the regenerated ones come from one definition.
"""

from __future__ import annotations

from pathlib import Path

from bondflow import BatchResult, ExperimentConfig, resolve_preset, run_batch

MINI_SEED = 1234
MINI_SIMS = 4
MINI_MAX_STEPS = 60

GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def mini_config(out_dir: Path | str | None = None) -> ExperimentConfig:
    overrides: dict[str, object] = {
        "n_simulations": MINI_SIMS,
        "max_steps": MINI_MAX_STEPS,
        "master_seed": MINI_SEED,
    }
    if out_dir is not None:
        overrides["output_dir"] = str(out_dir)
    return resolve_preset("exp1", overrides)


def run_mini(out_dir: Path | str | None = None) -> BatchResult:
    return run_batch(mini_config(out_dir))
