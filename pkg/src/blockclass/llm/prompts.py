"""Loader for the versioned prompt templates shipped with the package."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

_PROMPT_DIR = Path(__file__).parent / "templates"


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = _PROMPT_DIR / f"{name}.txt"
    return path.read_text(encoding="utf-8")


def render(template_name: str, /, **values: str) -> str:
    """Fill a template's {placeholders}; unknown placeholders are an error."""
    template = load_template(template_name)
    return template.format(**values)
