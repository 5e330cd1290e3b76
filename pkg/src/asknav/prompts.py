"""Prompt templates with named {placeholder} markers.

Templates are plain-text files; substitution is literal string replacement
(not str.format) so instruction text may contain JSON braces. Loading checks
that each template carries every placeholder its operation substitutes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

PLACEHOLDERS = ("target_object", "facts", "description", "qa_container")

_REQUIRED = {
    "p_init": {"target_object"},
    "p_details": {"description", "facts"},
    "p_check": {"target_object"},
    "p_selfquestion": {"facts", "description"},
    "p_refined": {"description", "qa_container"},
    "p_score": {"description", "facts"},
}

_MARKER = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")


class TemplateError(ValueError):
    pass


def render(template: str, **values: str) -> str:
    """Substitute {name} markers; any marker left unresolved is an error."""
    out = template
    for name, value in values.items():
        if name not in PLACEHOLDERS:
            raise TemplateError(f"unknown placeholder {name!r}")
        out = out.replace("{" + name + "}", value)
    leftover = _MARKER.search(out)
    if leftover:
        raise TemplateError(f"unresolved placeholder {leftover.group(0)} after substitution")
    return out


@dataclass(frozen=True)
class PromptSet:
    p_init: str
    p_details: str
    p_check: str
    p_selfquestion: str
    p_refined: str
    p_score: str

    def __post_init__(self):
        for f in fields(self):
            text = getattr(self, f.name)
            missing = {p for p in _REQUIRED[f.name] if "{" + p + "}" not in text}
            if missing:
                raise TemplateError(f"template {f.name} is missing placeholders {sorted(missing)}")

    @classmethod
    def from_dir(cls, directory: str | Path) -> "PromptSet":
        directory = Path(directory)
        return cls(
            **{f.name: (directory / f"{f.name}.txt").read_text().rstrip("\n") for f in fields(cls)}
        )

    @classmethod
    def default(cls) -> "PromptSet":
        root = resources.files("asknav") / "templates"
        return cls(**{f.name: (root / f"{f.name}.txt").read_text().rstrip("\n") for f in fields(cls)})
