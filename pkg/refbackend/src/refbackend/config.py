"""Server configuration: model stacks, bind address, capacity."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8999
    max_jobs: int = 2  # concurrent model jobs; beyond this, 503
    segmenter: dict = field(default_factory=lambda: {"kind": "felzenszwalb"})
    inpainter: dict = field(default_factory=lambda: {"kind": "telea"})

    def __post_init__(self):
        if self.max_jobs < 1:
            raise ValueError("max_jobs must be >= 1")

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ServerConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls(**data)
