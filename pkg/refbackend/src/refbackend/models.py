"""Model adapters behind the two served roles.

Two stacks exist per role: a checkpoint-backed adapter (the deployment
target; needs the `models` extra plus downloaded weights) and a builtin
CPU adapter that needs nothing, so the server can always be stood up for
protocol work and smoke tests. The builtin stack is deterministic.
"""
from __future__ import annotations

import os
from typing import List, Protocol

import numpy as np

MAX_MASKS = 24


class Segmenter(Protocol):
    def segment(self, image: np.ndarray, granularity: float) -> List[np.ndarray]: ...


class Inpainter(Protocol):
    def inpaint(
        self, image: np.ndarray, mask: np.ndarray, prompt: str, seed: int, steps: int
    ) -> np.ndarray: ...


class FelzenszwalbSegmenter:
    """Deterministic graph-based segmentation; granularity maps to scale.

    Larger granularity merges more aggressively (fewer, larger regions),
    mirroring how the request field steers checkpoint-backed models.
    """

    def segment(self, image: np.ndarray, granularity: float) -> List[np.ndarray]:
        from skimage.segmentation import felzenszwalb

        scale = max(20.0, 300.0 * float(granularity))
        min_size = max(64, int(image.shape[0] * image.shape[1] / 512))
        labels = felzenszwalb(image, scale=scale, sigma=0.8, min_size=min_size)
        ids, counts = np.unique(labels, return_counts=True)
        if len(ids) > MAX_MASKS:  # keep the largest regions, label order preserved
            keep = set(ids[np.argsort(counts)[::-1][:MAX_MASKS]].tolist())
            ids = np.array([i for i in ids.tolist() if i in keep])
        return [labels == i for i in ids.tolist()]


class SemanticSegmenterCheckpoint:
    """Checkpoint-backed segmentation (Semantic-SAM style). Heavy: requires
    the `models` extra and a downloaded checkpoint; loads before serving."""

    def __init__(self, checkpoint: str):
        if not checkpoint or not os.path.exists(checkpoint):
            raise FileNotFoundError(f"segmentation checkpoint not found: {checkpoint}")
        try:
            import torch  # noqa: F401
        except ImportError as exc:
            raise RuntimeError(
                "checkpoint-backed segmentation needs the 'models' extra installed"
            ) from exc
        raise RuntimeError(
            "no Semantic-SAM runtime available in this build; use the builtin "
            "segmenter or vendor the model package alongside its checkpoint"
        )

    def segment(self, image, granularity):  # pragma: no cover - loader raises first
        raise NotImplementedError


class TeleaInpainter:
    """Classical diffusion-free inpainting (OpenCV Telea).

    Deterministic and prompt-free: the prompt and seed fields are accepted
    per protocol but cannot steer this algorithm, which is fine for the
    smoke/conformance role this adapter plays.
    """

    def inpaint(self, image, mask, prompt, seed, steps):
        import cv2

        mask_u8 = mask.astype(np.uint8) * 255
        return cv2.inpaint(image, mask_u8, 3, cv2.INPAINT_TELEA)


class DiffusionInpainterCheckpoint:
    """Latent-diffusion inpainting from a local checkpoint; honors `seed`
    through the sampler's generator and `steps` as inference steps."""

    def __init__(self, checkpoint: str, device: str = "cpu"):
        if not checkpoint or not os.path.exists(checkpoint):
            raise FileNotFoundError(f"inpainting checkpoint not found: {checkpoint}")
        try:
            import torch
            from diffusers import StableDiffusionInpaintPipeline
        except ImportError as exc:
            raise RuntimeError(
                "checkpoint-backed inpainting needs the 'models' extra installed"
            ) from exc
        self._torch = torch
        self.device = device
        self.pipe = StableDiffusionInpaintPipeline.from_pretrained(checkpoint).to(device)

    def inpaint(self, image, mask, prompt, seed, steps):
        from PIL import Image

        generator = self._torch.Generator(device=self.device).manual_seed(int(seed))
        h, w = image.shape[:2]
        result = self.pipe(
            prompt=prompt,
            image=Image.fromarray(image),
            mask_image=Image.fromarray(mask.astype(np.uint8) * 255),
            num_inference_steps=int(steps),
            generator=generator,
            width=w,
            height=h,
        ).images[0]
        return np.asarray(result.resize((w, h)), dtype=np.uint8)


def build_segmenter(cfg: dict) -> Segmenter:
    kind = cfg.get("kind", "felzenszwalb")
    if kind == "felzenszwalb":
        return FelzenszwalbSegmenter()
    if kind == "semantic_sam":
        return SemanticSegmenterCheckpoint(cfg.get("checkpoint", ""))
    raise ValueError(f"unknown segmenter kind {kind!r}")


def build_inpainter(cfg: dict) -> Inpainter:
    kind = cfg.get("kind", "telea")
    if kind == "telea":
        return TeleaInpainter()
    if kind == "sd_inpaint":
        return DiffusionInpainterCheckpoint(cfg.get("checkpoint", ""), cfg.get("device", "cpu"))
    raise ValueError(f"unknown inpainter kind {kind!r}")
