"""Append-only store of known statements about the search target."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class FactOrigin(str, Enum):
    INITIAL_INSTRUCTION = "InitialInstruction"
    USER_RESPONSE = "UserResponse"


INSTRUCTION_TEMPLATE = "Find the {category}"


@dataclass(frozen=True)
class FactItem:
    text: str
    origin: FactOrigin


class Facts:
    """Ordered statements seeded with the templated initial instruction.

    Statements can only be appended; the seed always sits at index 0.
    """

    def __init__(self, category: str):
        if not category:
            raise ValueError("category must be non-empty")
        self._items: list[FactItem] = [
            FactItem(INSTRUCTION_TEMPLATE.format(category=category), FactOrigin.INITIAL_INSTRUCTION)
        ]

    def append(self, text: str, origin: FactOrigin = FactOrigin.USER_RESPONSE) -> None:
        if not text:
            raise ValueError("fact text must be non-empty")
        if origin is FactOrigin.INITIAL_INSTRUCTION:
            raise ValueError("only the seed statement has origin InitialInstruction")
        self._items.append(FactItem(text, origin))

    @property
    def statements(self) -> tuple[FactItem, ...]:
        return tuple(self._items)

    def render(self) -> str:
        """Bullet list used when substituting facts into prompt templates."""
        return "\n".join(f"- {item.text}" for item in self._items)

    def __len__(self) -> int:
        return len(self._items)
