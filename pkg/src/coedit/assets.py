"""Access to packaged text/data assets (templates, judge questions, manifest)."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources


def asset_path(relpath: str):
    return resources.files("coedit").joinpath("assets").joinpath(relpath)


@lru_cache(maxsize=None)
def asset_text(relpath: str) -> str:
    """Asset file contents with a single trailing newline stripped."""
    text = asset_path(relpath).read_text(encoding="utf-8")
    return text[:-1] if text.endswith("\n") else text


def asset_bytes(relpath: str) -> bytes:
    return asset_path(relpath).read_bytes()
