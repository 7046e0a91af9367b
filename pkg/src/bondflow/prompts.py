"""Prompt templates and rendering.

The four templates ship as plain-text package data and are treated as
frozen functional inputs: their wording is part of the experiment, so they
are loaded byte-for-byte, never reflowed or reformatted. Placeholders use
single-brace names; the timeliness template says {client_bonds} and
{client_cash} while the aversion templates say {bonds} and {cash}, and the
renderer accepts both spellings. Floats render with two decimals, grid
coordinates as plain integers.
"""

from __future__ import annotations

import re
from enum import Enum
from functools import lru_cache
from importlib import resources


class PromptTemplate(Enum):
    TIMELINESS = "timeliness"
    AVERSION1 = "aversion1"
    AVERSION2 = "aversion2"
    AVERSION3 = "aversion3"


_PLACEHOLDER = re.compile(r"\{(client_bonds|client_cash|bonds|cash|x|y)\}")


@lru_cache(maxsize=None)
def load_template(template: PromptTemplate) -> str:
    """Raw template text, exactly as shipped."""
    ref = resources.files("bondflow").joinpath("data", "prompts", f"{template.value}.txt")
    return ref.read_text(encoding="utf-8")


def render_template(
    template: PromptTemplate,
    *,
    client_bonds: float,
    client_cash: float,
    x: int,
    y: int,
) -> str:
    """Substitute a client's holdings and position into the template.

    Templates without placeholders render unchanged. Unknown brace
    expressions in a template are left as-is rather than erroring, since
    template text is data, not code.
    """
    values = {
        "client_bonds": f"{client_bonds:.2f}",
        "client_cash": f"{client_cash:.2f}",
        "bonds": f"{client_bonds:.2f}",
        "cash": f"{client_cash:.2f}",
        "x": str(int(x)),
        "y": str(int(y)),
    }
    return _PLACEHOLDER.sub(lambda m: values[m.group(1)], load_template(template))
