"""Inference engines behind the adapter.

An engine embeds an image once and decodes any number of prompts against
that embedding.  The checkpoint engine wraps a fine-tuned SAM-style model
(torch + segment-anything, loaded lazily); the stub engine is a tiny
deterministic intensity model used by the protocol test suite.
"""

from __future__ import annotations

from typing import Protocol, Sequence

import numpy as np

Point = tuple[float, float, int]  # (x, y, label); label -1 entries pass through
Box = tuple[int, int, int, int] | None


class SegmentEngine(Protocol):
    def embed(self, image: np.ndarray) -> object: ...

    def decode(
        self,
        embedding: object,
        points: Sequence[Point],
        box: Box,
        prior: np.ndarray | None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Returns (mask uint8, prob float in [0,1]); mask == prob >= 0.5."""
        ...


class StubEngine:
    """Deterministic stand-in used by tests: segments the intensity band
    around the foreground points, clipped to the box, unioned with a prior."""

    def __init__(self, tolerance: float = 0.25):
        self.tolerance = tolerance
        self.embed_calls = 0

    def embed(self, image: np.ndarray) -> np.ndarray:
        self.embed_calls += 1
        return np.array(image, dtype=np.float64, copy=True)

    def decode(self, embedding, points, box, prior):
        image = np.asarray(embedding, dtype=np.float64)
        h, w = image.shape
        fg = [(x, y) for x, y, lab in points if lab == 1]
        if fg:
            seeds = [
                image[min(h - 1, max(0, int(y))), min(w - 1, max(0, int(x)))] for x, y in fg
            ]
            center = float(np.mean(seeds))
        elif box is not None:
            center = float(image[(box[0] + box[2]) // 2, (box[1] + box[3]) // 2])
        else:
            center = 1.0  # nothing matches: empty mask
        closeness = 1.0 - np.abs(image - center) / max(self.tolerance, 1e-9)
        prob = 0.5 + 0.5 * np.clip(closeness, -1.0, 1.0)  # 0.5 exactly at tolerance
        if box is not None:
            outside = np.ones((h, w), dtype=bool)
            outside[box[0] : box[2] + 1, box[1] : box[3] + 1] = False
            prob[outside] = 0.0
        if prior is not None:
            prob = np.maximum(prob, np.where(prior > 0, 0.75, 0.0))
        mask = (prob >= 0.5).astype(np.uint8)
        return mask, prob


class CheckpointEngine:
    """Fine-tuned SAM-style checkpoint behind the engine interface.

    torch and segment-anything import lazily; construction fails with a
    clear message when they (or the checkpoint) are missing.  Label -1
    entries pass straight through to the prompt encoder as the model's
    non-point convention.
    """

    INPUT_SIDE = 1024

    def __init__(self, checkpoint_path: str, device: str = "cpu", model_type: str = "vit_b"):
        try:
            import torch
            from segment_anything import sam_model_registry
        except ImportError as exc:
            raise RuntimeError(
                "checkpoint inference needs the optional [sam] extras: "
                "pip install 'medsam-adapter[sam]'"
            ) from exc
        self._torch = torch
        self.device = device
        sam = sam_model_registry[model_type](checkpoint=checkpoint_path)
        sam.to(device)
        sam.eval()
        self.model = sam

    def _preprocess(self, image: np.ndarray):
        torch = self._torch
        h, w = image.shape
        scale = self.INPUT_SIDE / max(h, w)
        new_h, new_w = int(round(h * scale)), int(round(w * scale))
        tensor = torch.from_numpy(np.ascontiguousarray(image * 255.0)).float()
        tensor = tensor[None, None].repeat(1, 3, 1, 1)
        tensor = torch.nn.functional.interpolate(
            tensor, size=(new_h, new_w), mode="bilinear", align_corners=False
        )
        pixel_mean = torch.tensor([123.675, 116.28, 103.53]).view(1, 3, 1, 1)
        pixel_std = torch.tensor([58.395, 57.12, 57.375]).view(1, 3, 1, 1)
        tensor = (tensor - pixel_mean) / pixel_std
        padded = torch.zeros(1, 3, self.INPUT_SIDE, self.INPUT_SIDE)
        padded[:, :, :new_h, :new_w] = tensor
        return padded.to(self.device), scale, (new_h, new_w)

    def embed(self, image: np.ndarray) -> object:
        torch = self._torch
        batched, scale, resized = self._preprocess(image)
        with torch.no_grad():
            features = self.model.image_encoder(batched)
        return {"features": features, "scale": scale, "resized": resized, "shape": image.shape}

    def decode(self, embedding, points, box, prior):
        torch = self._torch
        scale = embedding["scale"]
        h, w = embedding["shape"]
        coords = torch.tensor(
            [[[x * scale, y * scale] for x, y, _ in points]], dtype=torch.float32
        ).to(self.device)
        labels = torch.tensor([[lab for _, _, lab in points]], dtype=torch.int64).to(self.device)
        box_t = None
        if box is not None:
            r0, c0, r1, c1 = box
            box_t = torch.tensor(
                [[c0 * scale, r0 * scale, (c1 + 1) * scale, (r1 + 1) * scale]],
                dtype=torch.float32,
            ).to(self.device)
        mask_input = None
        if prior is not None:
            low = torch.from_numpy(prior.astype(np.float32))[None, None]
            mask_input = torch.nn.functional.interpolate(
                low, size=(256, 256), mode="bilinear", align_corners=False
            ).to(self.device)
            mask_input = (mask_input * 20.0) - 10.0  # logits-style prior
        with torch.no_grad():
            sparse, dense = self.model.prompt_encoder(
                points=(coords, labels) if len(points) else None,
                boxes=box_t,
                masks=mask_input,
            )
            low_res, _ = self.model.mask_decoder(
                image_embeddings=embedding["features"],
                image_pe=self.model.prompt_encoder.get_dense_pe(),
                sparse_prompt_embeddings=sparse,
                dense_prompt_embeddings=dense,
                multimask_output=False,
            )
            upscaled = torch.nn.functional.interpolate(
                low_res, size=(self.INPUT_SIDE, self.INPUT_SIDE), mode="bilinear", align_corners=False
            )
            rh, rw = embedding["resized"]
            logits = torch.nn.functional.interpolate(
                upscaled[:, :, :rh, :rw], size=(h, w), mode="bilinear", align_corners=False
            )
            prob = torch.sigmoid(logits)[0, 0].cpu().numpy().astype(np.float64)
        mask = (prob >= 0.5).astype(np.uint8)
        return mask, prob
