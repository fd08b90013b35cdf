"""Operator surface: run edits, evaluations, dataset builds, inspection.

Configuration precedence is flags > environment > config file. The config
file (YAML) declares one endpoint per model role; roles left unconfigured
fall back to deterministic scripted backends so every command also works
offline (a notice is printed when that happens). Secrets are only ever
read from environment variables (COEDIT_API_KEY or per-role variants) and
never logged.
"""
from __future__ import annotations

import json
import os
import re
import sys
from pathlib import Path

import click
import yaml

from . import __version__
from .altbear import (
    build_items,
    load_default_manifest,
    load_manifest,
    mark_item,
    save_items,
)
from .backends import (
    BackendEndpoint,
    Backends,
    GeneratorPool,
    HttpModelClient,
    ModelClient,
    RecordingClient,
    ReplayClient,
    ReplayStore,
    Role,
    ScriptedChat,
    ScriptedGenerator,
    ScriptedInpainter,
    ScriptedSegmenter,
)
from .errors import (
    BackendUnavailable,
    BackendError,
    CoeditError,
    FocusEmpty,
    InsufficientDescriptions,
    ParseError,
    ProtocolError,
    ProviderRefusal,
    SubstitutionFailed,
    Timeout,
)
from .evalharness import aggregate, evaluate_pair, format_report, report_to_dict
from .pipeline import EditRequest, Mode, load_archive, outcome_digest, run_edit, save_outcome
from .promptkit import ConceptSpec, Task
from .raster import load_image, save_image

CONFIG_ENV = "COEDIT_CONFIG"

# stable exit codes, one per error stage (documented in the README)
EXIT_OK = 0
EXIT_USAGE = 2  # click usage errors
EXIT_BACKEND = 3
EXIT_PROTOCOL = 4
EXIT_REFUSAL = 5
EXIT_REASONING = 6
EXIT_IMAGE = 7
EXIT_PARTIAL = 8
EXIT_INTERNAL = 70


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ProviderRefusal):
        return EXIT_REFUSAL
    if isinstance(exc, (Timeout, BackendUnavailable)):
        return EXIT_BACKEND
    if isinstance(exc, ProtocolError):
        return EXIT_PROTOCOL
    if isinstance(exc, (ParseError, FocusEmpty, SubstitutionFailed, InsufficientDescriptions)):
        return EXIT_REASONING
    if isinstance(exc, BackendError):
        return EXIT_PROTOCOL
    if isinstance(exc, CoeditError):
        return EXIT_IMAGE
    return EXIT_INTERNAL


def _fail(exc: BaseException) -> "click.exceptions.Exit":
    stage = getattr(exc, "stage", None)
    where = f" at {stage}" if stage else ""
    click.echo(f"error{where}: {exc}", err=True)
    return click.exceptions.Exit(exit_code_for(exc))


def load_config(path: str | None) -> dict:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise click.UsageError(f"config {path} must be a mapping")
    return data


def demo_chat_rules():
    """Offline chat behavior keyed on instruction markers.

    The planning rule echoes the "different {concept}" phrase the fairness
    steps require, extracted from the instruction itself.
    """

    def plan(body: dict) -> str:
        text = "\n".join(
            p.get("text", "") for p in body.get("parts", []) if p.get("type") == "text"
        )
        match = re.search(r'must contain "different ([^"]+)"', text)
        if match:
            return f"A welcoming scene showing many different {match.group(1)}"
        return "A calm, tidy scene with neutral everyday objects"

    return [
        ("descriptions and traits of concept", '["a thing to reconsider", "the concept under edit"]'),
        ("point out any elements", "[1]"),
        ("The following is a", plan),
        ("Answer with a single word", "no"),
        ("image scene descriptions", "1. a teddy bear placeholder scene"),
        ("every human subject is a teddy bear", "a teddy bear placeholder scene"),
    ]


def _scripted_for(role: Role, params: dict) -> ModelClient:
    if role is Role.SEGMENTATION:
        return ScriptedSegmenter(tiles=int(params.get("tiles", 3)))
    if role is Role.CHAT:
        rules = [(str(k), v) for k, v in params.get("rules", [])]
        if not rules and not params.get("responses"):
            rules = demo_chat_rules()
        return ScriptedChat(
            rules=rules,
            responses=[str(r) for r in params.get("responses", [])],
            default=params.get("default"),
        )
    if role is Role.INPAINT:
        return ScriptedInpainter(
            color=tuple(params.get("color", (255, 0, 0))),
            mode=params.get("mode", "fill_bbox"),
        )
    return ScriptedGenerator(
        width=int(params.get("width", 512)), height=int(params.get("height", 512))
    )


def _client_for(role: Role, params: dict) -> ModelClient:
    kind = params.get("kind", "scripted")
    if kind == "http":
        endpoint = BackendEndpoint(
            role=role,
            base_url=params["base_url"],
            api_key_env=params.get("api_key_env"),
            timeout=float(params.get("timeout", 60.0)),
            retries=int(params.get("retries", 2)),
            max_concurrency=int(params.get("max_concurrency", 4)),
            disable_safety=bool(params.get("disable_safety", True)),
        )
        return HttpModelClient(endpoint)
    if kind == "replay":
        return ReplayClient(ReplayStore(params["store"]))
    if kind == "scripted":
        return _scripted_for(role, params)
    raise click.UsageError(f"unknown backend kind {kind!r} for role {role.value}")


def build_backends(
    config: dict, replay: str | None = None, record: str | None = None
) -> Backends:
    if replay:
        client = ReplayClient(ReplayStore(replay))
        return Backends(
            segment=client, chat=client, inpaint=client, generate=GeneratorPool([client])
        )

    endpoints = config.get("endpoints", {}) or {}
    missing = [r.value for r in Role if r.value not in endpoints]
    if missing:
        click.echo(
            f"notice: no endpoints configured for {', '.join(missing)}; "
            "using offline scripted backends",
            err=True,
        )

    def build(role: Role) -> ModelClient:
        return _client_for(role, endpoints.get(role.value, {}) or {})

    segment = build(Role.SEGMENTATION)
    chat = build(Role.CHAT)
    inpaint = build(Role.INPAINT)
    gen_cfg = endpoints.get("generate", {})
    if isinstance(gen_cfg, list):
        generators = [_client_for(Role.GENERATION, item or {}) for item in gen_cfg]
    else:
        generators = [_client_for(Role.GENERATION, gen_cfg or {})]

    if record:
        store = ReplayStore(record)
        segment = RecordingClient(segment, store)
        chat = RecordingClient(chat, store)
        inpaint = RecordingClient(inpaint, store)
        generators = [RecordingClient(g, store) for g in generators]

    return Backends(
        segment=segment, chat=chat, inpaint=inpaint, generate=GeneratorPool(generators)
    )


@click.group()
@click.version_option(version=__version__, prog_name="coedit")
def main():
    """Concept-guided responsible image editing."""


def _edit_options(fn):
    fn = click.option("--concept", required=True, help="Risk concept to edit.")(fn)
    fn = click.option(
        "--task",
        required=True,
        type=click.Choice([t.value for t in Task]),
        help="Subtask the concept belongs to.",
    )(fn)
    fn = click.option(
        "--mode",
        default=Mode.FULL.value,
        type=click.Choice([m.value for m in Mode]),
        show_default=True,
    )(fn)
    fn = click.option("--granularity", default=1.5, show_default=True, type=float)(fn)
    fn = click.option("--seed", default=42, show_default=True, type=int)(fn)
    fn = click.option("--steps", default=50, show_default=True, type=int)(fn)
    fn = click.option("--extension-radius", default=None, type=int)(fn)
    fn = click.option("--marker/--no-marker", default=False, show_default=True)(fn)
    fn = click.option("--restore-size", is_flag=True, default=False)(fn)
    fn = click.option("--out", default="out", show_default=True, type=click.Path())(fn)
    fn = click.option("--config", "config_path", default=None, type=click.Path(exists=True))(fn)
    return fn


def _run_edit_command(
    image_path, concept, task, mode, granularity, seed, steps,
    extension_radius, marker, restore_size, out, config_path,
    replay=None, record=None,
):
    config = load_config(config_path)
    backends = build_backends(config, replay=replay, record=record)
    image = load_image(image_path)
    request = EditRequest(
        image=image,
        concept=ConceptSpec(concept, Task(task)),
        mode=Mode(mode),
        granularity=granularity,
        extension_radius=extension_radius,
        seed=seed,
        steps=steps,
        marker=marker,
        restore_original_size=restore_size,
    )
    outcome = run_edit(request, backends)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(image_path).stem
    result_path = out_dir / f"{stem}-edited.png"
    trace_path = out_dir / f"{stem}-trace.zip"
    save_image(result_path, outcome.result)
    save_outcome(outcome, trace_path)
    click.echo(
        f"ok digest={outcome_digest(outcome)[:12]} result={result_path} trace={trace_path}"
    )


@main.command()
@click.argument("image_path", type=click.Path(exists=True))
@_edit_options
@click.option("--replay", default=None, type=click.Path(exists=True), help="Serve all roles from a replay store.")
def edit(image_path, replay, **kwargs):
    """Edit one image so the given concept becomes responsible."""
    try:
        _run_edit_command(image_path, replay=replay, **kwargs)
    except CoeditError as exc:
        raise _fail(exc)


@main.command()
@click.argument("image_path", type=click.Path(exists=True))
@_edit_options
@click.option("--store", required=True, type=click.Path(), help="Replay store to write.")
def record(image_path, store, **kwargs):
    """Run an edit while capturing every backend response into a store."""
    try:
        _run_edit_command(image_path, record=store, **kwargs)
        count = len(ReplayStore(store))
        click.echo(f"recorded {count} responses into {store}")
    except CoeditError as exc:
        raise _fail(exc)


@main.command("eval")
@click.argument("pairs", type=click.Path(exists=True))
@click.option("--out", default="eval-out", show_default=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--replay", default=None, type=click.Path(exists=True))
def eval_pairs(pairs, out, config_path, replay):
    """Judge original/edited pairs and write the metrics report.

    PAIRS is a pairs.jsonl file (or a directory containing one); each line
    holds id, concept, task, and the pre/post image paths relative to it.
    """
    pairs_path = Path(pairs)
    if pairs_path.is_dir():
        pairs_path = pairs_path / "pairs.jsonl"
    if not pairs_path.exists():
        raise click.UsageError(f"no pairs.jsonl under {pairs}")
    base = pairs_path.parent

    config = load_config(config_path)
    backends = build_backends(config, replay=replay)

    records = []
    failures = []
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "records.jsonl").open("w", encoding="utf-8") as ledger:
        for line in pairs_path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            item_id = row.get("id", "?")
            try:
                spec = ConceptSpec(row["concept"], Task(row["task"]))
                pre = load_image(base / row["pre"])
                post = load_image(base / row["post"])
                rec = evaluate_pair(item_id, spec, pre, post, backends)
            except (CoeditError, OSError, KeyError, ValueError) as exc:
                failures.append(item_id)
                click.echo(f"item {item_id}: {exc}", err=True)
                ledger.write(json.dumps({"id": item_id, "error": str(exc)}) + "\n")
                continue
            records.append(rec)
            ledger.write(
                json.dumps(
                    {
                        "id": rec.item_id,
                        "concept": rec.concept,
                        "task": rec.task.value,
                        "pre_responsible": rec.pre_verdict.responsible,
                        "post_responsible": rec.post_verdict.responsible,
                        "outcome": rec.outcome().kind.value,
                        "similarity": rec.similarity,
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    report = aggregate(records)
    payload = report_to_dict(report)
    payload["item_errors"] = len(failures)
    (out_dir / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
    )
    table = format_report(report)
    (out_dir / "report.txt").write_text(table + "\n", encoding="utf-8")
    click.echo(table)
    if failures:
        click.echo(f"{len(failures)} item(s) failed: {', '.join(failures)}", err=True)
        raise click.exceptions.Exit(EXIT_PARTIAL)


@main.group()
def dataset():
    """Build and curate dataset candidates."""


@dataset.command("build")
@click.option("--out", required=True, type=click.Path())
@click.option("--manifest", "manifest_path", default=None, type=click.Path(exists=True))
@click.option("--per-concept", default=1, show_default=True, type=int)
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--task", "only_tasks", multiple=True, type=click.Choice([t.value for t in Task]))
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def dataset_build(out, manifest_path, per_concept, seed, only_tasks, config_path):
    """Generate marker-stamped candidate items for every manifest concept."""
    config = load_config(config_path)
    backends = build_backends(config)
    manifest = load_manifest(manifest_path) if manifest_path else load_default_manifest()
    tasks = tuple(Task(t) for t in only_tasks) if only_tasks else tuple(Task)
    try:
        items = build_items(manifest, per_concept, seed, backends, out, tasks=tasks)
    except CoeditError as exc:
        raise _fail(exc)
    save_items(out, items)
    by_task = {t.value: sum(1 for i in items if i.task is t) for t in tasks}
    click.echo(f"built {len(items)} candidate item(s): {by_task}")


@dataset.command("mark")
@click.argument("dataset_dir", type=click.Path(exists=True))
@click.argument("item_id")
@click.argument("status", type=click.Choice(["candidate", "accepted", "rejected"]))
def dataset_mark(dataset_dir, item_id, status):
    """Record a human curation decision for one item."""
    try:
        item = mark_item(dataset_dir, item_id, status)
    except KeyError as exc:
        raise click.UsageError(str(exc))
    click.echo(f"{item.item_id}: {item.status}")


@main.command()
@click.argument("archive", type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path())
def inspect(archive, out):
    """Unpack a trace archive into viewable files and summarize it."""
    try:
        manifest, images, masks = load_archive(archive)
    except Exception as exc:  # noqa: BLE001 - malformed archives are user input
        click.echo(f"error: cannot read archive: {exc}", err=True)
        raise click.exceptions.Exit(EXIT_IMAGE)

    out_dir = Path(out) if out else Path(archive).with_suffix("")
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, image in images.items():
        path = out_dir / f"{name}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_image(path, image)
    for name, mask in masks.items():
        path = out_dir / f"{name}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        from PIL import Image as _Image

        _Image.fromarray(mask.bits.astype("uint8") * 255, mode="L").save(path)
    for key in ("instruction", "target"):
        if manifest.get(key):
            (out_dir / f"{key}.txt").write_text(manifest[key] + "\n", encoding="utf-8")

    req = manifest["request"]
    click.echo(f"request: concept={req['concept']!r} task={req['task']} mode={req['mode']}")
    click.echo(f"granularity={req['granularity']} seed={req['seed']} steps={req['steps']}")
    click.echo(f"masks: {manifest['mask_count']}  extension_radius: {manifest['extension_radius']}")
    for key in ("knowledge", "focus", "instruction", "target"):
        value = manifest.get(key)
        click.echo(f"{key}: {value if value is not None else '(absent)'}")
    click.echo(f"marker_applied: {manifest['marker_applied']}")
    click.echo(f"digest: {manifest['digest'][:12]}  files -> {out_dir}")


if __name__ == "__main__":
    main()
