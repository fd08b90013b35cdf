"""Automated part of the fictional-protagonist dataset workflow.

Builds *candidate* items only: concept expansion, teddy-bear subject
substitution, seeded dispatch across the configured generators, and
variant-A marker stamping. Human curation is represented as an editable
item status (candidate/accepted/rejected), never automated.
"""
from __future__ import annotations

import json
import random
import re
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Sequence

from .assets import asset_text
from .backends import Backends, ChatTurn
from .errors import InsufficientDescriptions, SubstitutionFailed
from .marker import VARIANT_ORIGINAL, MarkerSpec, apply_marker
from .promptkit import ConceptSpec, Task, _substitute, _unwrap
from .raster import save_image

EXPAND_RETRIES = 3
SUBSTITUTE_RETRIES = 3
DEFAULT_DESCRIPTIONS = 100

ITEM_STATUSES = ("candidate", "accepted", "rejected")


@dataclass(frozen=True)
class ManifestEntry:
    task: Task
    concept: str
    percent: int


@dataclass(frozen=True)
class ConceptManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        for task in Task:
            rows = [e for e in self.entries if e.task is task]
            if not rows:
                continue
            names = [e.concept for e in rows]
            if len(names) != len(set(names)):
                raise ValueError(f"duplicate concepts in {task.value} manifest")
            total = sum(e.percent for e in rows)
            if abs(total - 100) > 1:  # 100% up to rounding
                raise ValueError(f"{task.value} proportions sum to {total}%, expected 100%")

    def for_task(self, task: Task) -> tuple[ManifestEntry, ...]:
        return tuple(e for e in self.entries if e.task is task)


def parse_manifest(obj: dict) -> ConceptManifest:
    entries = []
    for task_name, rows in obj["tasks"].items():
        task = Task(task_name)
        for row in rows:
            entries.append(ManifestEntry(task, row["concept"], int(row["percent"])))
    return ConceptManifest(tuple(entries))


def load_default_manifest() -> ConceptManifest:
    return parse_manifest(json.loads(asset_text("altbear/manifest.json")))


def load_manifest(path: str | Path) -> ConceptManifest:
    return parse_manifest(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DatasetItem:
    item_id: str
    concept: str
    task: Task
    description: str
    image_file: str  # relative to the dataset directory
    marker_variant: str = VARIANT_ORIGINAL
    generator_index: int = 0
    status: str = "candidate"


_NUMBERED_LINE = re.compile(r"^\s*\d+\s*[.)\]:-]\s*(.+?)\s*$")


def parse_numbered_list(text: str) -> list[str]:
    items = []
    for line in text.splitlines():
        match = _NUMBERED_LINE.match(line)
        if match and match.group(1):
            items.append(match.group(1))
    return items


def expand_concept(spec: ConceptSpec, backends: Backends, n: int = DEFAULT_DESCRIPTIONS) -> list[str]:
    """Ask for n distinct scene descriptions; retries top up duplicates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    chat = backends.require("chat")
    instruction = _substitute(
        asset_text("altbear/expand.txt"), {"concept": spec.concept, "n": str(n)}
    )
    seen: dict[str, None] = {}
    for _ in range(EXPAND_RETRIES + 1):
        reply = chat.chat(ChatTurn((instruction,)))
        for desc in parse_numbered_list(reply):
            seen.setdefault(desc, None)
        if len(seen) >= n:
            return list(seen)[:n]
    raise InsufficientDescriptions(
        f"got {len(seen)} distinct descriptions for {spec.concept!r}, wanted {n}"
    )


def substitute_subject(description: str, backends: Backends) -> str:
    """Rewrite so every human subject is a teddy bear; validated, retried."""
    if not description.strip():
        raise ValueError("description must be nonempty")
    chat = backends.require("chat")
    instruction = _substitute(
        asset_text("altbear/substitute.txt"), {"description": description}
    )
    last = ""
    for _ in range(SUBSTITUTE_RETRIES + 1):
        last = _unwrap(chat.chat(ChatTurn((instruction,))))
        if "teddy bear" in last.lower():
            return last
    raise SubstitutionFailed(f"rewrite still lacks teddy bears: {last[:80]!r}")


def _slug(concept: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", concept.lower()).strip("-")
    return slug or "concept"


def build_items(
    manifest: ConceptManifest,
    per_concept: int,
    seed: int,
    backends: Backends,
    out_dir: str | Path,
    tasks: Sequence[Task] = tuple(Task),
) -> list[DatasetItem]:
    """Generate candidate items for every manifest concept.

    For each concept: expand -> substitute subjects -> generate on a
    seeded-random backend -> stamp the variant-A marker -> save. The RNG
    seed fixes the generator-choice sequence, so reruns pick identically.
    """
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    pool = backends.generate
    if pool is None:
        from .errors import BackendUnavailable

        raise BackendUnavailable("no generation endpoints configured")
    rng = random.Random(seed)
    items: list[DatasetItem] = []
    for task in tasks:
        for entry in manifest.for_task(task):
            spec = ConceptSpec(entry.concept, task)
            descriptions = expand_concept(spec, backends, n=per_concept)
            for i, description in enumerate(descriptions, start=1):
                bear_description = substitute_subject(description, backends)
                image, chosen = pool.generate(bear_description, seed, rng)
                stamped = apply_marker(image, MarkerSpec(task, VARIANT_ORIGINAL))
                item_id = f"{task.value}-{_slug(entry.concept)}-{i:03d}"
                image_file = f"images/{item_id}.png"
                save_image(out_dir / image_file, stamped)
                items.append(
                    DatasetItem(
                        item_id=item_id,
                        concept=entry.concept,
                        task=task,
                        description=bear_description,
                        image_file=image_file,
                        generator_index=chosen,
                    )
                )
    return items


# --- dataset directory records --------------------------------------------------

def save_items(out_dir: str | Path, items: Sequence[DatasetItem]) -> Path:
    path = Path(out_dir) / "items.jsonl"
    with path.open("w", encoding="utf-8") as fh:
        for item in items:
            row = asdict(item)
            row["task"] = item.task.value
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def load_items(out_dir: str | Path) -> list[DatasetItem]:
    path = Path(out_dir) / "items.jsonl"
    items = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        row["task"] = Task(row["task"])
        items.append(DatasetItem(**row))
    return items


def mark_item(out_dir: str | Path, item_id: str, status: str) -> DatasetItem:
    """Record a human curation decision for one item."""
    if status not in ITEM_STATUSES:
        raise ValueError(f"status must be one of {ITEM_STATUSES}")
    items = load_items(out_dir)
    updated = None
    for i, item in enumerate(items):
        if item.item_id == item_id:
            updated = replace(item, status=status)
            items[i] = updated
            break
    if updated is None:
        raise KeyError(f"no item {item_id!r} in {out_dir}")
    save_items(out_dir, items)
    return updated
