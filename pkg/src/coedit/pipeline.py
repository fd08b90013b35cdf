"""Orchestration of the two cognitive stages plus inpainting dispatch.

A run is: prepare (resample to the 512x512 working frame) -> locate the
concept region (segmentation, tag overlay, knowledge + focus reasoning,
mask union) -> plan the modification (contour extension, context crop,
prompt planning) -> inpaint -> re-composite. Pixels outside the extended
mask are always copied back from the prepared original, so background
preservation holds by construction rather than by trusting the inpainter.

Ablation modes: "no-pcp" replaces the locate stage with the largest
segmentation mask and issues no reasoning calls; "no-bcp" replaces the
planned prompt with the plain baseline instruction and issues no planning
calls.
"""
from __future__ import annotations

import hashlib
import io
import json
import time
import zipfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .backends import (
    Backends,
    ChatTurn,
    DEFAULT_GRANULARITY,
    DEFAULT_SEED,
    DEFAULT_STEPS,
    InpaintJob,
)
from .errors import (
    CoeditError,
    EmptySelection,
    FocusEmpty,
    ParseError,
    TagOutOfRange,
)
from .marker import VARIANT_EDITED, MarkerSpec, apply_marker
from .maskops import (
    BinaryMask,
    CropPatch,
    MaskSet,
    crop_region,
    default_extension_radius,
    extend_mask,
    largest_mask,
    union_masks,
)
from .promptkit import (
    ConceptSpec,
    FocusSelection,
    KnowledgeResult,
    ModificationTarget,
    parse_focus_response,
    parse_knowledge_response,
    parse_modification_response,
    render_baseline_instruction,
    render_focus_instruction,
    render_knowledge_instruction,
    render_modification_instruction,
)
from .raster import WORKING_SIZE, decode_png, encode_png, require_image, resize
from .visprompt import AnnotatedImage, place_tags

LMM_RETRIES = 3  # identical-instruction retries per reasoning stage

# every way a response can fail to parse, including the tag-range checks
RETRYABLE_PARSE_ERRORS = (ParseError, TagOutOfRange, EmptySelection)

ARCHIVE_FORMAT = "coedit-trace/1"


class Mode(str, Enum):
    FULL = "full"
    NO_PCP = "no-pcp"
    NO_BCP = "no-bcp"


@dataclass(frozen=True)
class EditRequest:
    image: np.ndarray
    concept: ConceptSpec
    mode: Mode = Mode.FULL
    granularity: float = DEFAULT_GRANULARITY
    extension_radius: Optional[int] = None  # None -> radius tied to object scale
    seed: int = DEFAULT_SEED
    steps: int = DEFAULT_STEPS
    marker: bool = False
    restore_original_size: bool = False

    def __post_init__(self):
        require_image(self.image)
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.granularity <= 0:
            raise ValueError("granularity must be > 0")


@dataclass
class EditTrace:
    """Every intermediate artifact of a run, for audit and inspection."""

    original_dims: tuple[int, int]  # (width, height) of the input image
    prepared: np.ndarray  # working frame the stages operated on
    masks: Optional[MaskSet] = None
    annotated: Optional[AnnotatedImage] = None
    knowledge: Optional[KnowledgeResult] = None
    focus: Optional[FocusSelection] = None
    m_p: Optional[BinaryMask] = None
    extension_radius: Optional[int] = None
    m_p_ext: Optional[BinaryMask] = None
    patch: Optional[CropPatch] = None
    instruction: Optional[str] = None
    target: Optional[ModificationTarget] = None
    timings: dict[str, float] = field(default_factory=dict)


@dataclass
class EditOutcome:
    result: np.ndarray
    trace: EditTrace
    request: EditRequest
    marker_applied: bool = False


def prepare(image: np.ndarray) -> np.ndarray:
    """Stretch-resample to the square working frame (bit-exact passthrough
    when the input is already at working size)."""
    require_image(image)
    return resize(image, WORKING_SIZE, WORKING_SIZE)


def _attribute(stage: str):
    """Decorator-free stage attribution: tag and re-raise engine errors."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if isinstance(exc, CoeditError) and exc.stage is None:
                exc.stage = stage
            return False

    return _Ctx()


def _chat_retrying(backends: Backends, turn: ChatTurn, parse):
    """Chat with identical-instruction retries on parse failures."""
    chat = backends.require("chat")
    last: CoeditError | None = None
    for _ in range(LMM_RETRIES + 1):
        text = chat.chat(turn)
        try:
            return parse(text)
        except RETRYABLE_PARSE_ERRORS as exc:
            last = exc
    assert last is not None
    raise last


def run_pcp(
    req: EditRequest, backends: Backends, prepared: Optional[np.ndarray] = None
) -> tuple[BinaryMask, EditTrace]:
    """Locate the image region tied to the concept.

    Full mode reasons over the tagged image; no-pcp mode skips all
    reasoning and takes the largest segmentation mask.
    """
    if prepared is None:
        prepared = prepare(req.image)
    trace = EditTrace(
        original_dims=(req.image.shape[1], req.image.shape[0]), prepared=prepared
    )

    with _attribute("pcp.segment"):
        t0 = time.perf_counter()
        masks = backends.require("segment").segment(prepared, req.granularity)
        trace.timings["segment"] = time.perf_counter() - t0
    trace.masks = masks

    if req.mode is Mode.NO_PCP:
        with _attribute("pcp.largest"):
            m_p = masks.get(largest_mask(masks))
    else:
        with _attribute("pcp.tag"):
            t0 = time.perf_counter()
            trace.annotated = place_tags(prepared, masks)
            trace.timings["tag"] = time.perf_counter() - t0
        with _attribute("pcp.knowledge"):
            t0 = time.perf_counter()
            turn = ChatTurn((render_knowledge_instruction(req.concept),))
            trace.knowledge = _chat_retrying(backends, turn, parse_knowledge_response)
            trace.timings["knowledge"] = time.perf_counter() - t0
        with _attribute("pcp.focus"):
            t0 = time.perf_counter()
            instruction = render_focus_instruction(trace.knowledge, req.concept)
            turn = ChatTurn((trace.annotated.pixels, instruction))
            try:
                trace.focus = _chat_retrying(
                    backends, turn, lambda text: parse_focus_response(text, len(masks))
                )
            except RETRYABLE_PARSE_ERRORS as exc:
                raise FocusEmpty(f"no usable focus selection after retries: {exc}") from exc
            trace.timings["focus"] = time.perf_counter() - t0
            m_p = union_masks(masks, trace.focus.tag_ids)

    trace.m_p = m_p
    return m_p, trace


def run_bcp(
    req: EditRequest,
    m_p: BinaryMask,
    backends: Backends,
    prepared: Optional[np.ndarray] = None,
    trace: Optional[EditTrace] = None,
) -> tuple[BinaryMask, ModificationTarget]:
    """Plan what the focus region should become.

    Full/no-pcp modes crop the extended region and ask for a concrete
    prompt; no-bcp mode uses the plain baseline instruction instead.
    """
    if prepared is None:
        prepared = prepare(req.image)
    if trace is None:
        trace = EditTrace(
            original_dims=(req.image.shape[1], req.image.shape[0]), prepared=prepared
        )

    with _attribute("bcp.extend"):
        t0 = time.perf_counter()
        radius = (
            req.extension_radius
            if req.extension_radius is not None
            else default_extension_radius(m_p)
        )
        m_p_ext = extend_mask(m_p, radius)
        trace.extension_radius = radius
        trace.m_p_ext = m_p_ext
        trace.timings["extend"] = time.perf_counter() - t0

    if req.mode is Mode.NO_BCP:
        with _attribute("bcp.baseline"):
            target = ModificationTarget(
                render_baseline_instruction(req.concept), req.concept.task
            )
    else:
        with _attribute("bcp.plan"):
            t0 = time.perf_counter()
            trace.patch = crop_region(prepared, m_p_ext)
            trace.instruction = render_modification_instruction(req.concept)
            turn = ChatTurn((trace.patch.pixels, trace.instruction))
            target = _chat_retrying(
                backends, turn, lambda text: parse_modification_response(text, req.concept)
            )
            trace.timings["plan"] = time.perf_counter() - t0

    trace.target = target
    return m_p_ext, target


def run_edit(req: EditRequest, backends: Backends) -> EditOutcome:
    """Full pipeline: locate, plan, inpaint, re-composite, optionally mark."""
    with _attribute("prepare"):
        prepared = prepare(req.image)

    m_p, trace = run_pcp(req, backends, prepared)
    m_p_ext, target = run_bcp(req, m_p, backends, prepared, trace)

    with _attribute("inpaint"):
        t0 = time.perf_counter()
        job = InpaintJob(prepared, m_p_ext, target.prompt, seed=req.seed, steps=req.steps)
        raw = backends.require("inpaint").inpaint(job)
        trace.timings["inpaint"] = time.perf_counter() - t0

    # untouched background is guaranteed here, not assumed of the backend
    result = raw.copy()
    outside = ~m_p_ext.bits
    result[outside] = prepared[outside]

    marker_applied = False
    if req.marker:
        with _attribute("marker"):
            result = apply_marker(result, MarkerSpec(req.concept.task, VARIANT_EDITED))
            marker_applied = True

    if req.restore_original_size:
        w, h = trace.original_dims
        result = resize(result, w, h)

    return EditOutcome(result, trace, req, marker_applied)


def run_batch(
    requests, backends: Backends, parallelism: int = 2
) -> list["EditOutcome | CoeditError"]:
    """Run independent requests concurrently; errors are returned in place."""

    def one(req):
        try:
            return run_edit(req, backends)
        except CoeditError as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        return list(pool.map(one, requests))


# --- trace archive ----------------------------------------------------------------

_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed zip timestamps keep archives deterministic


def _mask_png(mask: BinaryMask) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(mask.bits.astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _png_mask(data: bytes) -> BinaryMask:
    arr = np.asarray(Image.open(io.BytesIO(data)).convert("L"))
    return BinaryMask(arr > 127)


def outcome_digest(outcome: EditOutcome) -> str:
    """Digest over every deterministic artifact of a run (timings excluded)."""
    h = hashlib.sha256()

    def put(tag: str, data: bytes):
        h.update(tag.encode())
        h.update(b"\x00")
        h.update(hashlib.sha256(data).digest())

    trace = outcome.trace
    req = outcome.request
    meta = {
        "concept": req.concept.concept,
        "task": req.concept.task.value,
        "mode": req.mode.value,
        "granularity": req.granularity,
        "seed": req.seed,
        "steps": req.steps,
        "extension_radius": trace.extension_radius,
        "focus": sorted(trace.focus.tag_ids) if trace.focus else None,
        "knowledge": list(trace.knowledge.candidates) if trace.knowledge else None,
        "instruction": trace.instruction,
        "target": trace.target.prompt if trace.target else None,
        "marker_applied": outcome.marker_applied,
    }
    put("meta", json.dumps(meta, sort_keys=True).encode())
    put("result", encode_png(outcome.result))
    put("prepared", encode_png(trace.prepared))
    if trace.masks is not None:
        for m in trace.masks.masks:
            put("mask", _mask_png(m))
    if trace.annotated is not None:
        put("annotated", encode_png(trace.annotated.pixels))
    if trace.m_p is not None:
        put("m_p", _mask_png(trace.m_p))
    if trace.m_p_ext is not None:
        put("m_p_ext", _mask_png(trace.m_p_ext))
    if trace.patch is not None:
        put("patch", encode_png(trace.patch.pixels))
    return h.hexdigest()


def save_outcome(outcome: EditOutcome, path: str | Path) -> Path:
    """Write the outcome and its full trace as a single zip archive."""
    path = Path(path)
    trace = outcome.trace
    req = outcome.request

    files: dict[str, bytes] = {
        "result.png": encode_png(outcome.result),
        "prepared.png": encode_png(trace.prepared),
    }
    if trace.masks is not None:
        for i, m in enumerate(trace.masks.masks, start=1):
            files[f"masks/mask_{i:03d}.png"] = _mask_png(m)
    if trace.annotated is not None:
        files["annotated.png"] = encode_png(trace.annotated.pixels)
    if trace.m_p is not None:
        files["m_p.png"] = _mask_png(trace.m_p)
    if trace.m_p_ext is not None:
        files["m_p_ext.png"] = _mask_png(trace.m_p_ext)
    if trace.patch is not None:
        files["patch.png"] = encode_png(trace.patch.pixels)

    manifest = {
        "format": ARCHIVE_FORMAT,
        "request": {
            "concept": req.concept.concept,
            "task": req.concept.task.value,
            "mode": req.mode.value,
            "granularity": req.granularity,
            "seed": req.seed,
            "steps": req.steps,
            "marker": req.marker,
        },
        "original_dims": list(trace.original_dims),
        "mask_count": len(trace.masks) if trace.masks is not None else 0,
        "knowledge": list(trace.knowledge.candidates) if trace.knowledge else None,
        "focus": sorted(trace.focus.tag_ids) if trace.focus else None,
        "extension_radius": trace.extension_radius,
        "patch_origin": list(trace.patch.origin) if trace.patch else None,
        "instruction": trace.instruction,
        "target": trace.target.prompt if trace.target else None,
        "marker_applied": outcome.marker_applied,
        "timings": trace.timings,
        "digest": outcome_digest(outcome),
    }
    files["manifest.json"] = json.dumps(manifest, indent=2, sort_keys=True).encode()

    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED, compresslevel=6) as zf:
        for name in sorted(files):
            info = zipfile.ZipInfo(name, date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, files[name])
    return path


def load_archive(path: str | Path) -> tuple[dict, dict[str, np.ndarray], dict[str, BinaryMask]]:
    """Read an archive back as (manifest, images, masks)."""
    images: dict[str, np.ndarray] = {}
    masks: dict[str, BinaryMask] = {}
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format") != ARCHIVE_FORMAT:
            raise ValueError(f"not a trace archive: {path}")
        for name in zf.namelist():
            if not name.endswith(".png"):
                continue
            data = zf.read(name)
            stem = name[:-4]
            if stem.startswith("masks/") or stem in ("m_p", "m_p_ext"):
                masks[stem] = _png_mask(data)
            else:
                images[stem] = decode_png(data)
    return manifest, images, masks
