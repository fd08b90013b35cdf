from __future__ import annotations

import json
import random

import httpx
import numpy as np
import pytest

from coedit import protocol
from coedit.backends import (
    BackendEndpoint,
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
from coedit.errors import (
    BackendUnavailable,
    EmptyResult,
    ProtocolError,
    ProviderRefusal,
    ReplayMiss,
    Timeout,
)
from coedit.maskops import BinaryMask, MaskSet

from conftest import rand_image, rand_mask_set


# --- wire codecs ----------------------------------------------------------------

def test_image_codec_round_trip(rng):
    img = rand_image(rng, 21, 13)
    obj = protocol.encode_image(img)
    json.dumps(obj)  # wire-serializable
    back = protocol.decode_image(obj)
    assert (back == img).all()


def test_image_codec_rejects_garbage():
    with pytest.raises(ProtocolError):
        protocol.decode_image({"encoding": "png", "base64": "@@@not-base64@@@"})
    with pytest.raises(ProtocolError):
        protocol.decode_image({"encoding": "jpeg", "base64": "aaaa"})
    with pytest.raises(ProtocolError):
        protocol.decode_image("nope")


def test_mask_codec_round_trip(rng):
    ms = rand_mask_set(rng, 3, 17, 9)
    for m in ms.masks:
        wire = json.loads(json.dumps(protocol.encode_mask(m)))
        back = protocol.decode_mask(wire)
        assert (back.bits == m.bits).all()


def test_request_hash_is_stable_and_sensitive():
    body = {"b": 2, "a": 1}
    assert protocol.request_hash("chat", body) == protocol.request_hash("chat", {"a": 1, "b": 2})
    assert protocol.request_hash("chat", body) != protocol.request_hash("inpaint", body)
    assert protocol.request_hash("chat", body) != protocol.request_hash("chat", {"a": 1, "b": 3})


# --- endpoint validation ------------------------------------------------------------

def test_endpoint_invariants():
    with pytest.raises(ValueError):
        BackendEndpoint(Role.CHAT, "http://x", timeout=0)
    with pytest.raises(ValueError):
        BackendEndpoint(Role.CHAT, "http://x", retries=-1)


def test_chat_turn_validation(rng):
    with pytest.raises(ValueError):
        ChatTurn(())
    turn = ChatTurn((rand_image(rng, 8, 8), "hello"))
    assert turn.text() == "hello"
    assert turn.temperature == 0.0


def test_inpaint_job_validation(rng):
    img = rand_image(rng, 8, 8)
    mask = BinaryMask(np.ones((8, 8), dtype=bool))
    with pytest.raises(ValueError):
        InpaintJob(img, BinaryMask(np.ones((9, 8), dtype=bool)), "x")
    with pytest.raises(ValueError):
        InpaintJob(img, mask, "   ")
    job = InpaintJob(img, mask, "fill it")
    assert job.seed == 42 and job.steps == 50


# --- scripted mocks ------------------------------------------------------------------

def test_scripted_segmenter_tiles(rng):
    img = rand_image(rng, 90, 60)
    client = ScriptedSegmenter(tiles=3)
    masks = client.segment(img)
    assert len(masks) == 3
    assert (masks.width, masks.height) == (90, 60)
    union = masks.get(1).bits | masks.get(2).bits | masks.get(3).bits
    assert union.all()  # tiles cover the frame
    assert client.calls[0].body["granularity"] == 1.5  # default on the wire


def test_scripted_segmenter_fixtures_and_dim_check(rng):
    img = rand_image(rng, 16, 16)
    wrong = rand_mask_set(rng, 2, 8, 8)
    with pytest.raises(ProtocolError):
        ScriptedSegmenter(mask_set=wrong).segment(img)
    right = rand_mask_set(rng, 2, 16, 16)
    got = ScriptedSegmenter(mask_set=right).segment(img)
    assert len(got) == 2


def test_scripted_segmenter_zero_masks_surface(rng):
    img = rand_image(rng, 8, 8)
    with pytest.raises(EmptyResult):
        ScriptedSegmenter(mask_set=MaskSet((), 8, 8)).segment(img)


def test_segment_rejects_bad_granularity(rng):
    with pytest.raises(ValueError):
        ScriptedSegmenter().segment(rand_image(rng, 8, 8), granularity=0)


def test_scripted_chat_rules_and_rotation():
    chat = ScriptedChat(
        rules=[("magic", "matched")],
        responses=["first", "second"],
        default="fallback",
    )
    assert chat.chat(ChatTurn(("say the magic word",))) == "matched"
    assert chat.chat(ChatTurn(("anything",))) == "first"
    assert chat.chat(ChatTurn(("anything",))) == "second"
    assert chat.chat(ChatTurn(("anything",))) == "first"  # wraps around


def test_scripted_chat_refusal_and_misses():
    chat = ScriptedChat(rules=[("risky", {"refusal": "content filter"})])
    with pytest.raises(ProviderRefusal):
        chat.chat(ChatTurn(("risky business",)))
    with pytest.raises(BackendUnavailable):
        chat.chat(ChatTurn(("unmatched",)))


def test_scripted_chat_empty_text_is_protocol_error():
    chat = ScriptedChat(default="  ")
    with pytest.raises(ProtocolError):
        chat.chat(ChatTurn(("hi",)))


def test_scripted_inpainter_modes(rng):
    img = rand_image(rng, 20, 20)
    bits = np.zeros((20, 20), dtype=bool)
    bits[5:9, 6:12] = True
    mask = BinaryMask(bits)
    job = InpaintJob(img, mask, "paint it red")

    boxed = ScriptedInpainter(color=(255, 0, 0), mode="fill_bbox").inpaint(job)
    assert (boxed[5:9, 6:12] == (255, 0, 0)).all()
    assert (boxed[0, 0] == img[0, 0]).all()

    masked = ScriptedInpainter(color=(0, 255, 0), mode="fill_mask").inpaint(job)
    assert (masked[bits] == (0, 255, 0)).all()
    assert (masked[~bits] == img[~bits]).all()

    echoed = ScriptedInpainter(mode="echo").inpaint(job)
    assert (echoed == img).all()


def test_scripted_inpainter_wire_defaults(rng):
    img = rand_image(rng, 8, 8)
    client = ScriptedInpainter()
    client.inpaint(InpaintJob(img, BinaryMask(np.ones((8, 8), dtype=bool)), "x"))
    body = client.calls[0].body
    assert body["seed"] == 42
    assert body["steps"] == 50


def test_scripted_generator_deterministic():
    gen = ScriptedGenerator(width=16, height=12)
    a = gen.generate("a red chair", seed=42)
    b = gen.generate("a red chair", seed=42)
    c = gen.generate("a blue chair", seed=42)
    assert (a == b).all()
    assert a.shape == (12, 16, 3)
    assert not (a == c).all()


def test_generator_pool_seeded_choice():
    pool = GeneratorPool([ScriptedGenerator(8, 8), ScriptedGenerator(8, 8), ScriptedGenerator(8, 8)])
    picks1 = [pool.generate("x", 42, random.Random(7))[1] for _ in range(6)]
    picks2 = [pool.generate("x", 42, random.Random(7))[1] for _ in range(6)]
    assert picks1 == picks2
    single = GeneratorPool([ScriptedGenerator(8, 8)])
    assert single.generate("x", 42, random.Random(0))[1] == 0
    with pytest.raises(BackendUnavailable):
        GeneratorPool([]).generate("x", 42, random.Random(0))


# --- HTTP client ---------------------------------------------------------------------

def _http_client(role: Role, handler, retries: int = 0) -> HttpModelClient:
    endpoint = BackendEndpoint(role, "http://models.test", retries=retries, timeout=5)
    return HttpModelClient(endpoint, transport=httpx.MockTransport(handler), backoff=0)


def test_http_segment_round_trip(rng, monkeypatch):
    monkeypatch.setenv("COEDIT_API_KEY", "sk-test-secret")
    img = rand_image(rng, 10, 6)
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen["auth"] = request.headers.get("authorization")
        seen["version"] = request.headers.get(protocol.VERSION_HEADER)
        body = json.loads(request.content)
        image = protocol.decode_image(body["image"])
        h, w = image.shape[:2]
        bits = np.zeros((h, w), dtype=bool)
        bits[:, : w // 2] = True
        return httpx.Response(
            200, json={"masks": [protocol.encode_mask(BinaryMask(bits))]}
        )

    client = _http_client(Role.SEGMENTATION, handler)
    masks = client.segment(img, granularity=1.5)
    assert len(masks) == 1 and (masks.width, masks.height) == (10, 6)
    assert seen["auth"] == "Bearer sk-test-secret"
    assert seen["version"] == protocol.PROTOCOL_VERSION


def test_http_wrong_dims_is_protocol_error(rng):
    img = rand_image(rng, 10, 6)

    def handler(request):
        bits = np.ones((3, 3), dtype=bool)
        return httpx.Response(200, json={"masks": [protocol.encode_mask(BinaryMask(bits))]})

    with pytest.raises(ProtocolError):
        _http_client(Role.SEGMENTATION, handler).segment(img)


def test_http_inpaint_dim_check(rng):
    img = rand_image(rng, 8, 8)
    other = rand_image(rng, 9, 9)

    def handler(request):
        return httpx.Response(200, json={"image": protocol.encode_image(other)})

    client = _http_client(Role.INPAINT, handler)
    with pytest.raises(ProtocolError):
        client.inpaint(InpaintJob(img, BinaryMask(np.ones((8, 8), dtype=bool)), "x"))


def test_http_retries_then_unavailable(rng):
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(503, text="busy")

    client = _http_client(Role.CHAT, handler, retries=2)
    with pytest.raises(BackendUnavailable):
        client.chat(ChatTurn(("hi",)))
    assert len(attempts) == 3  # retries + 1


def test_http_timeout_maps_to_timeout_error():
    def handler(request):
        raise httpx.ConnectTimeout("slow")

    client = _http_client(Role.CHAT, handler, retries=1)
    with pytest.raises(Timeout):
        client.chat(ChatTurn(("hi",)))


def test_http_4xx_no_retry():
    attempts = []

    def handler(request):
        attempts.append(1)
        return httpx.Response(400, json={"error": {"message": "bad image"}})

    client = _http_client(Role.CHAT, handler, retries=3)
    with pytest.raises(ProtocolError):
        client.chat(ChatTurn(("hi",)))
    assert len(attempts) == 1


def test_http_non_json_reply():
    def handler(request):
        return httpx.Response(200, text="<html>oops</html>")

    with pytest.raises(ProtocolError):
        _http_client(Role.CHAT, handler).chat(ChatTurn(("hi",)))


def test_http_refusal_surfaces():
    def handler(request):
        return httpx.Response(200, json={"refusal": "filtered by provider"})

    with pytest.raises(ProviderRefusal):
        _http_client(Role.CHAT, handler).chat(ChatTurn(("hi",)))


def test_http_role_mismatch(rng):
    def handler(request):
        return httpx.Response(200, json={})

    client = _http_client(Role.CHAT, handler)
    with pytest.raises(BackendUnavailable):
        client.segment(rand_image(rng, 8, 8))


def test_http_chat_disable_safety_flag_on_wire():
    bodies = []

    def handler(request):
        bodies.append(json.loads(request.content))
        return httpx.Response(200, json={"text": "ok"})

    client = _http_client(Role.CHAT, handler)
    client.chat(ChatTurn(("hi",)))
    assert bodies[0]["disable_safety"] is True
    assert bodies[0]["temperature"] == 0.0


# --- record / replay ----------------------------------------------------------------

def test_record_then_replay_byte_identical(rng, tmp_path):
    img = rand_image(rng, 24, 24)
    store = ReplayStore(tmp_path / "store")

    live = ScriptedInpainter(color=(0, 0, 255))
    recorder = RecordingClient(live, store)
    job = InpaintJob(img, BinaryMask(np.ones((24, 24), dtype=bool)), "make it blue")
    first = recorder.inpaint(job)
    assert len(store) == 1

    replayed = ReplayClient(store).inpaint(job)
    assert (replayed == first).all()


def test_replay_miss_is_typed(rng, tmp_path):
    store = ReplayStore(tmp_path / "empty")
    client = ReplayClient(store)
    with pytest.raises(ReplayMiss):
        client.chat(ChatTurn(("never recorded",)))


def test_replay_distinguishes_requests(rng, tmp_path):
    store = ReplayStore(tmp_path / "store")
    recorder = RecordingClient(ScriptedChat(responses=["one", "two"]), store)
    assert recorder.chat(ChatTurn(("question A",))) == "one"
    assert recorder.chat(ChatTurn(("question B",))) == "two"
    replay = ReplayClient(store)
    assert replay.chat(ChatTurn(("question B",))) == "two"
    assert replay.chat(ChatTurn(("question A",))) == "one"
