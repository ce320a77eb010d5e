"""TOML configuration: model endpoint, templates and the sensitivity registry.

Example::

    [llm]
    model = "gpt-4"
    backend = "replay"
    replay_dir = "replay/"

    [prompts]
    family = "generic"
    clause_detail = "full"
    guided = "templates/guided.txt"

    [ompscore.registry]
    aligned = "order_insensitive"

API keys are read from the environment only (``llm.api_key_env`` names the
variable); a key in the file is rejected.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .clauses import DEFAULT_REGISTRY, Sensitivity, SensitivityRegistry
from .errors import SchemaError
from .llm import GenerationConfig
from .prompts import DEFAULT_TEMPLATES, MODEL_FAMILIES, TemplateSet

_TEMPLATE_KEYS = ("basic", "guided", "codellama_basic", "codellama_guided")


@dataclass
class Settings:
    llm: dict = field(default_factory=dict)
    family: str | None = None  # None: let the caller pick from the model name
    templates: TemplateSet = DEFAULT_TEMPLATES
    registry: SensitivityRegistry = DEFAULT_REGISTRY

    def generation_config(self, **overrides) -> GenerationConfig:
        merged = {**self.llm, **{k: v for k, v in overrides.items() if v is not None}}
        return GenerationConfig(**merged)


def load_config(path: str | Path | None) -> Settings:
    if path is None:
        return Settings()
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    base = path.parent

    llm = dict(data.get("llm", {}))
    if "api_key" in llm:
        raise SchemaError("API keys must come from the environment, not the config file", field="llm.api_key")
    allowed = {f.name for f in fields(GenerationConfig)}
    unknown = set(llm) - allowed
    if unknown:
        raise SchemaError(f"unknown [llm] keys {sorted(unknown)}", field="llm")
    if "replay_dir" in llm:
        llm["replay_dir"] = str(base / llm["replay_dir"])

    prompts = data.get("prompts", {})
    family = prompts.get("family")
    if family is not None and family not in MODEL_FAMILIES:
        raise SchemaError(f"unknown model family {family!r}", field="prompts.family")
    paths = {k: base / prompts[k] for k in _TEMPLATE_KEYS if k in prompts}
    templates = TemplateSet.from_files(
        clause_detail=prompts.get("clause_detail", "full"),
        fix_typos=bool(prompts.get("fix_typos", False)),
        **paths,
    )

    overrides = data.get("ompscore", {}).get("registry", {})
    try:
        registry = DEFAULT_REGISTRY.with_overrides(overrides)
    except ValueError as exc:
        valid = [s.value for s in Sensitivity]
        raise SchemaError(f"registry values must be one of {valid}", field="ompscore.registry") from exc
    return Settings(llm, family, templates, registry)
