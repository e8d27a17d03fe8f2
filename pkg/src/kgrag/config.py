"""Settings resolution: defaults, config file, environment, CLI flags.

Precedence is flags > environment > file > defaults. The file is plain JSON
(`kgrag.json` by convention); unknown keys are rejected with the valid list.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigError
from .provider import MockProvider, OpenAIProvider

ENV_API_KEY = "KGRAG_API_KEY"
ENV_BASE_URL = "KGRAG_BASE_URL"

MODEL_ROLES = ("chat", "embedding", "tagging", "extraction", "judge")

_DEFAULT_MODELS = {
    "chat": "gpt-4o-mini",
    "embedding": "text-embedding-3-small",
    # Tagging/extraction/judge fall back to the chat model when unset; the
    # extraction role exists so a smaller, faster model can be plugged in.
    "tagging": None,
    "extraction": None,
    "judge": None,
}

VALID_KEYS = (
    "base_url",
    "models",
    "k",
    "target_tokens",
    "overlap_tokens",
    "hops",
    "prompt_budget_chars",
    "triple_budget_chars",
    "retrieval_mode",
    "concurrency",
    "timeout_s",
    "mock_seed",
    "mock_dim",
    "gazetteer",
)


@dataclass(frozen=True)
class Settings:
    base_url: str = "https://api.openai.com/v1"
    api_key: str | None = None
    models: dict = field(default_factory=lambda: dict(_DEFAULT_MODELS))
    k: int = 8
    target_tokens: int = 512
    overlap_tokens: int = 64
    hops: int = 1
    prompt_budget_chars: int = 24000
    triple_budget_chars: int = 6000
    retrieval_mode: str = "filter"
    concurrency: int = 4
    timeout_s: float = 30.0
    mock_seed: int = 0
    mock_dim: int = 32
    gazetteer: str | None = None
    offline: bool = False

    def model_for(self, role: str) -> str:
        if role not in MODEL_ROLES:
            raise ConfigError(f"unknown model role: {role!r}")
        return self.models.get(role) or self.models.get("chat") or _DEFAULT_MODELS["chat"]

    def validate(self) -> "Settings":
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.target_tokens < 64:
            raise ConfigError("target_tokens must be >= 64")
        if not 0 <= self.overlap_tokens < self.target_tokens:
            raise ConfigError("overlap_tokens must satisfy 0 <= overlap < target_tokens")
        if self.hops < 0:
            raise ConfigError("hops must be >= 0")
        if self.retrieval_mode not in ("filter", "boost"):
            raise ConfigError("retrieval_mode must be 'filter' or 'boost'")
        if self.prompt_budget_chars <= 0 or self.triple_budget_chars <= 0:
            raise ConfigError("budgets must be positive")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        return self


def load_config(path: str | Path | None = None) -> Settings:
    """Resolve settings from an optional JSON file plus the environment."""
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8") or "{}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc.msg})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        for key in raw:
            if key not in VALID_KEYS:
                raise ConfigError(
                    f"{path}: unknown config key {key!r}; valid keys: {', '.join(VALID_KEYS)}"
                )
        if "models" in raw:
            models = raw["models"]
            if not isinstance(models, dict):
                raise ConfigError(f"{path}: 'models' must be a JSON object")
            for role in models:
                if role not in MODEL_ROLES:
                    raise ConfigError(
                        f"{path}: unknown model role {role!r}; valid roles: {', '.join(MODEL_ROLES)}"
                    )
            merged = dict(_DEFAULT_MODELS)
            merged.update(models)
            raw = dict(raw, models=merged)
        values.update(raw)

    settings = Settings(**values)
    base_url = os.environ.get(ENV_BASE_URL)
    if base_url:
        settings = replace(settings, base_url=base_url)
    api_key = os.environ.get(ENV_API_KEY)
    if api_key:
        settings = replace(settings, api_key=api_key)
    return settings.validate()


def make_provider(settings: Settings):
    """Build the provider the settings ask for: mock when offline."""
    if settings.offline:
        return MockProvider(seed=settings.mock_seed, dim=settings.mock_dim)
    return OpenAIProvider(
        settings.base_url,
        settings.api_key,
        embed_model=settings.model_for("embedding"),
        timeout_s=settings.timeout_s,
        concurrency=settings.concurrency,
    )
