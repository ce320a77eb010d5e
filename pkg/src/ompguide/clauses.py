"""Clause keyword table and the order-sensitivity registry.

Both tables are plain data so they can be overridden from a config file.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

CLAUSE_KEYWORDS: frozenset[str] = frozenset(
    {
        "private",
        "firstprivate",
        "lastprivate",
        "shared",
        "reduction",
        "schedule",
        "collapse",
        "num_threads",
        "default",
        "if",
        "copyin",
        "copyprivate",
        "ordered",
        "nowait",
    }
)

# Words that may form the directive kind ("parallel for", "parallel for simd", ...).
DIRECTIVE_WORDS: frozenset[str] = frozenset(
    {
        "parallel",
        "for",
        "do",
        "simd",
        "sections",
        "section",
        "single",
        "master",
        "masked",
        "critical",
        "barrier",
        "atomic",
        "flush",
        "ordered",
        "task",
        "taskloop",
        "taskwait",
        "taskyield",
        "taskgroup",
        "target",
        "teams",
        "distribute",
        "loop",
        "declare",
        "threadprivate",
        "data",
        "enter",
        "exit",
        "update",
        "end",
    }
)


class Sensitivity(str, enum.Enum):
    ORDER_SENSITIVE = "order_sensitive"
    ORDER_INSENSITIVE = "order_insensitive"


_DEFAULT_SENSITIVITY = {
    "private": Sensitivity.ORDER_INSENSITIVE,
    "firstprivate": Sensitivity.ORDER_INSENSITIVE,
    "lastprivate": Sensitivity.ORDER_INSENSITIVE,
    "shared": Sensitivity.ORDER_INSENSITIVE,
    "copyin": Sensitivity.ORDER_INSENSITIVE,
    "copyprivate": Sensitivity.ORDER_INSENSITIVE,
    "reduction": Sensitivity.ORDER_SENSITIVE,
    "schedule": Sensitivity.ORDER_SENSITIVE,
    "collapse": Sensitivity.ORDER_SENSITIVE,
    "num_threads": Sensitivity.ORDER_SENSITIVE,
    "default": Sensitivity.ORDER_SENSITIVE,
    "if": Sensitivity.ORDER_SENSITIVE,
    "ordered": Sensitivity.ORDER_SENSITIVE,
    "map": Sensitivity.ORDER_SENSITIVE,
    "linear": Sensitivity.ORDER_SENSITIVE,
}


@dataclass(frozen=True)
class SensitivityRegistry:
    """Maps clause keywords to their sensitivity; unknown keywords are order-sensitive."""

    entries: Mapping[str, Sensitivity] = field(
        default_factory=lambda: MappingProxyType(dict(_DEFAULT_SENSITIVITY))
    )
    unknown: Sensitivity = Sensitivity.ORDER_SENSITIVE

    def lookup(self, keyword: str) -> Sensitivity:
        return self.entries.get(keyword.lower(), self.unknown)

    def is_order_insensitive(self, keyword: str) -> bool:
        return self.lookup(keyword) is Sensitivity.ORDER_INSENSITIVE

    def with_overrides(self, overrides: Mapping[str, str | Sensitivity]) -> "SensitivityRegistry":
        merged = dict(self.entries)
        for keyword, value in overrides.items():
            merged[keyword.lower()] = Sensitivity(value)
        return SensitivityRegistry(MappingProxyType(merged), self.unknown)


DEFAULT_REGISTRY = SensitivityRegistry()
