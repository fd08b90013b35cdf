"""Concept-guided responsible image editing engine.

Locates the image region tied to an abstract risk concept, plans a
concrete modification, dispatches inpainting, and keeps a full audit
trace — against pluggable model backends that can be live HTTP services,
deterministic scripted mocks, or a record/replay store.
"""
from ._kernels import BACKEND as KERNEL_BACKEND
from .backends import (
    BackendEndpoint,
    Backends,
    ChatTurn,
    GeneratorPool,
    HttpModelClient,
    InpaintJob,
    RecordingClient,
    ReplayClient,
    ReplayStore,
    Role,
    ScriptedChat,
    ScriptedGenerator,
    ScriptedInpainter,
    ScriptedSegmenter,
)
from .evalharness import (
    EvalRecord,
    JudgeVerdict,
    MetricsReport,
    PairKind,
    aggregate,
    classify_pair,
    evaluate_pair,
    judge,
    similarity,
)
from .maskops import (
    BinaryMask,
    CropPatch,
    MaskSet,
    crop_region,
    extend_mask,
    largest_mask,
    modification_ratio,
    union_masks,
)
from .marker import MarkerSpec, apply_marker
from .pipeline import (
    EditOutcome,
    EditRequest,
    EditTrace,
    Mode,
    load_archive,
    outcome_digest,
    run_batch,
    run_edit,
    save_outcome,
)
from .promptkit import ConceptSpec, Task
from .visprompt import AnnotatedImage, TagRegistry, place_tags

__version__ = "0.1.0"

__all__ = [
    "AnnotatedImage",
    "BackendEndpoint",
    "Backends",
    "BinaryMask",
    "ChatTurn",
    "ConceptSpec",
    "CropPatch",
    "EditOutcome",
    "EditRequest",
    "EditTrace",
    "EvalRecord",
    "GeneratorPool",
    "HttpModelClient",
    "InpaintJob",
    "JudgeVerdict",
    "KERNEL_BACKEND",
    "MarkerSpec",
    "MaskSet",
    "MetricsReport",
    "Mode",
    "PairKind",
    "RecordingClient",
    "ReplayClient",
    "ReplayStore",
    "Role",
    "ScriptedChat",
    "ScriptedGenerator",
    "ScriptedInpainter",
    "ScriptedSegmenter",
    "TagRegistry",
    "Task",
    "aggregate",
    "apply_marker",
    "classify_pair",
    "crop_region",
    "evaluate_pair",
    "extend_mask",
    "judge",
    "largest_mask",
    "load_archive",
    "modification_ratio",
    "outcome_digest",
    "place_tags",
    "run_batch",
    "run_edit",
    "save_outcome",
    "similarity",
    "union_masks",
    "__version__",
]
