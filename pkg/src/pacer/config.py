"""Run configuration: one YAML file, every key overridable from the CLI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import yaml

from .backend.base import GenerationSettings
from .screening import ScreeningConfig

GENERATION_TEMPLATE = "{problem}\n\nPlease reason step by step, and put your final answer within \\boxed{{}}."


@dataclass(frozen=True)
class PacerConfig:
    # screening
    n_try: int = 256
    n_init: int = 64
    eta: float = 10.0
    k: int = 5
    window: int = 1024
    # packet
    n_top: int = 4
    l_sum: int = 512
    vote_temperature: float = 1.0
    raw_weights: bool = False
    # review
    l_rev: int = 1024
    trace_tail_budget: int = 1024
    skip_unanimous: bool = False
    # execution / sampling
    parallel: int = 8
    seed: int = 0
    max_tokens: int = 16384
    sampling_temperature: float = 0.6
    top_p: float = 0.95
    # backend
    model: str = ""
    endpoint: str = ""
    api: str = "completions"
    api_key_env: str = "PACER_API_KEY"

    def __post_init__(self):
        self.screening()  # validates n_try/n_init/eta/parallel
        for name in ("k", "window", "n_top", "l_sum", "l_rev", "trace_tail_budget", "max_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not self.vote_temperature > 0:
            raise ValueError("vote_temperature must be positive")

    @classmethod
    def from_file(cls, path) -> "PacerConfig":
        data = yaml.safe_load(Path(path).read_text()) or {}
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "PacerConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**data)

    def with_overrides(self, **overrides) -> "PacerConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    def screening(self) -> ScreeningConfig:
        return ScreeningConfig(
            n_try=self.n_try, n_init=self.n_init, eta=self.eta,
            k=self.k, window=self.window, parallel=self.parallel,
        )

    def generation(self) -> GenerationSettings:
        return GenerationSettings(
            model_name=self.model,
            max_tokens=self.max_tokens,
            temperature=self.sampling_temperature,
            top_p=self.top_p,
            top_logprobs=self.k,
            seed=self.seed,
        )
