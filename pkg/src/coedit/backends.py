"""Clients for the external model roles, plus deterministic offline doubles.

Four roles exist: segmentation, chat (the multimodal reasoner), inpaint,
and generation (dataset building only). Every client flavor — HTTP,
scripted mock, recording wrapper, replay — funnels through the same
``handle(role, body)`` seam speaking the bodies defined in ``protocol``,
and every response passes the same shape validation before it is returned.
That is what makes the scripted mocks and the replay store honest stand-ins
for live endpoints.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import httpx
import numpy as np

from . import protocol
from .errors import (
    BackendUnavailable,
    ProtocolError,
    ReplayMiss,
    Timeout,
)
from .maskops import BinaryMask, MaskSet
from .raster import require_image

DEFAULT_GRANULARITY = 1.5
DEFAULT_SEED = 42
DEFAULT_STEPS = 50
DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 1024

GENERIC_KEY_ENV = "COEDIT_API_KEY"


class Role(str, Enum):
    SEGMENTATION = "segment"
    CHAT = "chat"
    INPAINT = "inpaint"
    GENERATION = "generate"


@dataclass(frozen=True)
class BackendEndpoint:
    """Where one model role lives and how to talk to it."""

    role: Role
    base_url: str
    api_key_env: Optional[str] = None  # secret ref; resolved at request time
    timeout: float = 60.0
    retries: int = 2
    max_concurrency: int = 4
    disable_safety: bool = True  # chat only; forwarded on the wire

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")

    def resolve_key(self) -> Optional[str]:
        names = []
        if self.api_key_env:
            names.append(self.api_key_env)
        names.append(f"{GENERIC_KEY_ENV}_{self.role.name}")
        names.append(GENERIC_KEY_ENV)
        for name in names:
            value = os.environ.get(name)
            if value:
                return value
        return None


@dataclass(frozen=True)
class ChatTurn:
    """One multimodal request: interleaved text and image parts."""

    parts: tuple[protocol.ChatPart, ...]
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("a chat turn needs at least one part")
        for part in parts:
            if not isinstance(part, str):
                require_image(part)
        object.__setattr__(self, "parts", parts)

    def text(self) -> str:
        return "\n".join(p for p in self.parts if isinstance(p, str))


@dataclass(frozen=True)
class InpaintJob:
    image: np.ndarray
    mask: BinaryMask
    prompt: str
    seed: int = DEFAULT_SEED
    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        require_image(self.image)
        if (self.mask.height, self.mask.width) != self.image.shape[:2]:
            raise ValueError("mask dims must equal image dims")
        if not self.prompt.strip():
            raise ValueError("prompt must be nonempty")


@dataclass
class WireCall:
    role: str
    body: dict


class ModelClient:
    """Common surface over the ``handle(role, body)`` seam.

    Subclasses implement `handle`; the public methods build protocol bodies
    and enforce response shape, so behavior is identical across HTTP,
    mocks, and replay.
    """

    log_calls = False

    def __init__(self):
        self.calls: list[WireCall] = []
        self._log_lock = threading.Lock()

    def handle(self, role: str, body: dict) -> dict:
        raise NotImplementedError

    def _invoke(self, role: Role, body: dict) -> dict:
        if self.log_calls:
            with self._log_lock:
                self.calls.append(WireCall(role.value, body))
        return self.handle(role.value, body)

    def segment(self, image: np.ndarray, granularity: float = DEFAULT_GRANULARITY) -> MaskSet:
        require_image(image)
        if granularity <= 0:
            raise ValueError("granularity must be > 0")
        body = protocol.segment_request_body(image, granularity)
        reply = self._invoke(Role.SEGMENTATION, body)
        return protocol.parse_segment_response(reply, image.shape[1], image.shape[0])

    def chat(self, turn: ChatTurn, disable_safety: bool = True) -> str:
        body = protocol.chat_request_body(
            turn.parts, turn.temperature, turn.max_tokens, disable_safety
        )
        reply = self._invoke(Role.CHAT, body)
        return protocol.parse_chat_response(reply)

    def inpaint(self, job: InpaintJob) -> np.ndarray:
        body = protocol.inpaint_request_body(job.image, job.mask, job.prompt, job.seed, job.steps)
        reply = self._invoke(Role.INPAINT, body)
        return protocol.parse_inpaint_response(reply, job.image.shape[1], job.image.shape[0])

    def generate(self, prompt: str, seed: int = DEFAULT_SEED) -> np.ndarray:
        if not prompt.strip():
            raise ValueError("prompt must be nonempty")
        body = protocol.generate_request_body(prompt, seed)
        reply = self._invoke(Role.GENERATION, body)
        return protocol.parse_generate_response(reply)


class HttpModelClient(ModelClient):
    """HTTP binding for one endpoint. Secrets go in headers, never in logs."""

    def __init__(self, endpoint: BackendEndpoint, transport=None, backoff: float = 0.25):
        super().__init__()
        self.endpoint = endpoint
        self._backoff = backoff
        self._client = httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            timeout=endpoint.timeout,
            limits=httpx.Limits(
                max_connections=endpoint.max_concurrency,
                max_keepalive_connections=endpoint.max_concurrency,
            ),
            transport=transport,
        )

    def close(self):
        self._client.close()

    def handle(self, role: str, body: dict) -> dict:
        if role != self.endpoint.role.value:
            raise BackendUnavailable(
                f"endpoint {self.endpoint.base_url} serves {self.endpoint.role.value}, not {role}"
            )
        headers = {protocol.VERSION_HEADER: protocol.PROTOCOL_VERSION}
        key = self.endpoint.resolve_key()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        path = protocol.PATHS[role]
        attempts = self.endpoint.retries + 1
        last_exc: Exception | None = None
        for attempt in range(attempts):
            if attempt and self._backoff:
                time.sleep(self._backoff * attempt)
            try:
                response = self._client.post(path, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last_exc = Timeout(f"{role} request timed out: {exc}")
                continue
            except httpx.TransportError as exc:
                last_exc = BackendUnavailable(f"{role} endpoint unreachable: {exc}")
                continue
            if response.status_code in (429, 502, 503, 504):
                last_exc = BackendUnavailable(f"{role} endpoint busy: HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"{role} endpoint returned HTTP {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProtocolError(f"{role} reply is not JSON: {exc}") from None
        assert last_exc is not None
        raise last_exc


# --- scripted offline doubles ---------------------------------------------------

class ScriptedSegmenter(ModelClient):
    """Offline segmentation.

    With a fixture MaskSet, replies with exactly those masks (regardless of
    the request image, which lets tests provoke dimension errors). Without
    one, splits the request image into `tiles` vertical strips.
    """

    log_calls = True

    def __init__(self, mask_set: MaskSet | None = None, tiles: int = 3):
        super().__init__()
        if tiles < 1:
            raise ValueError("tiles must be >= 1")
        self.mask_set = mask_set
        self.tiles = tiles

    def handle(self, role: str, body: dict) -> dict:
        if self.mask_set is not None:
            masks = self.mask_set.masks
        else:
            image = protocol.decode_image(body["image"])
            h, w = image.shape[:2]
            masks = []
            bounds = [round(i * w / self.tiles) for i in range(self.tiles + 1)]
            for i in range(self.tiles):
                if bounds[i] == bounds[i + 1]:  # image narrower than the tile count
                    continue
                bits = np.zeros((h, w), dtype=bool)
                bits[:, bounds[i] : bounds[i + 1]] = True
                masks.append(BinaryMask(bits))
        return {"masks": [protocol.encode_mask(m) for m in masks]}


Reply = Union[str, dict, Callable[[dict], Union[str, dict]]]


class ScriptedChat(ModelClient):
    """Offline chat: first matching rule wins, else round-robin responses.

    Rules are (substring, reply) pairs matched against the concatenated
    text parts. A reply may be a string, a raw protocol reply dict (e.g.
    ``{"refusal": "..."}``), or a callable on the wire body.
    """

    log_calls = True

    def __init__(
        self,
        rules: Sequence[tuple[str, Reply]] = (),
        responses: Sequence[str] = (),
        default: Reply | None = None,
    ):
        super().__init__()
        self.rules = list(rules)
        self.responses = list(responses)
        self.default = default
        self._cursor = 0
        self._cursor_lock = threading.Lock()

    def handle(self, role: str, body: dict) -> dict:
        text = "\n".join(
            p.get("text", "") for p in body.get("parts", []) if p.get("type") == "text"
        )
        reply: Reply | None = None
        for needle, rule_reply in self.rules:
            if needle in text:
                reply = rule_reply
                break
        if reply is None and self.responses:
            with self._cursor_lock:
                reply = self.responses[self._cursor % len(self.responses)]
                self._cursor += 1
        if reply is None:
            reply = self.default
        if reply is None:
            raise BackendUnavailable(f"scripted chat has no reply for: {text[:80]!r}")
        if callable(reply):
            reply = reply(body)
        if isinstance(reply, dict):
            return reply
        return {"text": reply}


class ScriptedInpainter(ModelClient):
    """Offline inpainting: paints the mask region a solid color.

    mode "fill_bbox" (default) paints the mask's whole bounding box — it
    deliberately clobbers context pixels inside the box so tests can prove
    the engine's re-composite restores them. "fill_mask" paints only true
    pixels; "echo" returns the input image.
    """

    log_calls = True

    def __init__(self, color=(255, 0, 0), mode: str = "fill_bbox"):
        super().__init__()
        if mode not in ("fill_bbox", "fill_mask", "echo"):
            raise ValueError(f"unknown mode {mode!r}")
        self.color = tuple(color)
        self.mode = mode

    def handle(self, role: str, body: dict) -> dict:
        image = protocol.decode_image(body["image"]).copy()
        mask = protocol.decode_mask(body["mask"])
        if self.mode == "fill_bbox":
            x0, y0, x1, y1 = mask.bbox()
            image[y0 : y1 + 1, x0 : x1 + 1] = self.color
        elif self.mode == "fill_mask":
            image[mask.bits] = self.color
        return {"image": protocol.encode_image(image)}


class ScriptedGenerator(ModelClient):
    """Offline generation: a deterministic solid color from (prompt, seed)."""

    log_calls = True

    def __init__(self, width: int = 512, height: int = 512):
        super().__init__()
        self.width = width
        self.height = height

    def handle(self, role: str, body: dict) -> dict:
        digest = hashlib.sha256(f"{body['prompt']}\n{body['seed']}".encode()).digest()
        image = np.full((self.height, self.width, 3), list(digest[:3]), dtype=np.uint8)
        return {"image": protocol.encode_image(image)}


class GeneratorPool:
    """The configured generation backends; choice is drawn from a seeded RNG."""

    def __init__(self, clients: Sequence[ModelClient]):
        self.clients = list(clients)

    def generate(self, prompt: str, seed: int, rng) -> tuple[np.ndarray, int]:
        """Returns (image, index of the chosen backend)."""
        if not self.clients:
            raise BackendUnavailable("no generation endpoints configured")
        index = rng.randrange(len(self.clients))
        return self.clients[index].generate(prompt, seed), index


# --- record / replay -------------------------------------------------------------

class ReplayStore:
    """Directory of (request-hash -> response) recordings, one JSON per call."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._lock = threading.Lock()

    def _path(self, role: str, body: dict) -> Path:
        return self.root / f"{role}-{protocol.request_hash(role, body)[:24]}.json"

    def record(self, role: str, body: dict, reply: dict) -> Path:
        path = self._path(role, body)
        payload = {
            "protocol": protocol.PROTOCOL_VERSION,
            "role": role,
            "request": body,
            "response": reply,
        }
        with self._lock:
            self.root.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
        return path

    def lookup(self, role: str, body: dict) -> dict | None:
        path = self._path(role, body)
        if not path.exists():
            return None
        payload = json.loads(path.read_text(encoding="utf-8"))
        return payload["response"]

    def __len__(self) -> int:
        return len(list(self.root.glob("*.json"))) if self.root.exists() else 0


class RecordingClient(ModelClient):
    """Pass-through wrapper that captures every (request, response) pair."""

    def __init__(self, inner: ModelClient, store: ReplayStore):
        super().__init__()
        self.inner = inner
        self.store = store

    def handle(self, role: str, body: dict) -> dict:
        reply = self.inner.handle(role, body)
        self.store.record(role, body, reply)
        return reply


class ReplayClient(ModelClient):
    """Serves recorded responses only; any unrecorded request is an error."""

    def __init__(self, store: ReplayStore):
        super().__init__()
        self.store = store

    def handle(self, role: str, body: dict) -> dict:
        reply = self.store.lookup(role, body)
        if reply is None:
            raise ReplayMiss(
                f"no recording for {role} request {protocol.request_hash(role, body)[:12]}"
            )
        return reply


@dataclass
class Backends:
    """The model roles a run needs; unused roles may stay None."""

    segment: ModelClient | None = None
    chat: ModelClient | None = None
    inpaint: ModelClient | None = None
    generate: GeneratorPool | None = None

    def require(self, name: str) -> ModelClient:
        client = getattr(self, name)
        if client is None:
            raise BackendUnavailable(f"no {name} backend configured")
        return client
