from __future__ import annotations

import json
from collections import deque
from pathlib import Path

import numpy as np
import pytest

from gazeseg.backend import (
    ReferenceBackend,
    RemoteBackend,
    SegmentationRequest,
    SegmentationResponse,
    bbox_from_mask,
    deserialize_request,
    deserialize_response,
    reference_segment,
    serialize_request,
    serialize_response,
)
from gazeseg.core import ImageSlice, Mask, PointPrompt, encode_rle
from gazeseg.errors import EmptyMask, EmptyPrompt, ProtocolError, ShapeMismatch
from gazeseg.metrics import dice
from gazeseg.phantom import Blob, PhantomSpec, generate_phantom


def flood_fill_oracle(
    intensities: np.ndarray,
    seeds: list[tuple[int, int]],
    tau: float,
    box=None,
) -> np.ndarray:
    """Independent 4-connected flood fill with an explicit FIFO frontier."""
    h, w = intensities.shape
    values = []
    for r, c in seeds:
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w:
                    values.append(intensities[rr, cc])
    mu = sum(values) / len(values)

    def inside(r, c):
        if box is not None and not (box[0] <= r <= box[2] and box[1] <= c <= box[3]):
            return False
        return 0 <= r < h and 0 <= c < w

    def admissible(r, c):
        return abs(intensities[r, c] - mu) <= tau

    out = np.zeros((h, w), dtype=np.uint8)
    frontier = deque()
    for r, c in seeds:
        out[r, c] = 1
        if admissible(r, c):
            frontier.append((r, c))
    while frontier:
        r, c = frontier.popleft()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if inside(rr, cc) and not out[rr, cc] and admissible(rr, cc):
                out[rr, cc] = 1
                frontier.append((rr, cc))
    return out


def fg_prompt(points, capacity=20):
    return PointPrompt.build(points, [1] * len(points), capacity)


class TestReferenceSegment:
    def test_disk_from_single_interior_seed(self, disk_phantom):
        image, gt = disk_phantom
        mask, prob = reference_segment(image, fg_prompt([(32.5, 32.5)]), tau=0.1)
        assert np.array_equal(mask.bits, gt.bits)
        oracle = flood_fill_oracle(image.intensities, [(32, 32)], 0.1)
        assert np.array_equal(mask.bits, oracle)

    def test_background_seed_grows_disjoint_region(self, disk_phantom):
        image, gt = disk_phantom
        mask, _ = reference_segment(image, fg_prompt([(2.5, 2.5)]), tau=0.1)
        assert not (mask.bits & gt.bits).any()
        assert dice(mask, gt) == 0.0
        oracle = flood_fill_oracle(image.intensities, [(2, 2)], 0.1)
        assert np.array_equal(mask.bits, oracle)

    def test_box_without_points_covers_disk(self, disk_phantom):
        image, gt = disk_phantom
        box = bbox_from_mask(gt, margin=0)
        prompt = PointPrompt.build([], [], 20)
        mask, _ = reference_segment(image, prompt, box=box, tau=0.1)
        assert np.array_equal(mask.bits, gt.bits)

    def test_box_constrains_growth(self, disk_phantom):
        image, gt = disk_phantom
        box = (0, 0, 10, 10)  # background corner
        mask, _ = reference_segment(image, fg_prompt([(2.5, 2.5)]), box=box, tau=0.1)
        oracle = flood_fill_oracle(image.intensities, [(2, 2)], 0.1, box=box)
        assert np.array_equal(mask.bits, oracle)
        assert mask.bits[11:, :].sum() == 0 and mask.bits[:, 11:].sum() == 0

    def test_two_lobe_iterative_improvement(self, bridge_phantom):
        image, gt = bridge_phantom
        from scipy import ndimage

        labels, n = ndimage.label(gt.bits, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
        assert n == 2
        r, c = np.argwhere(labels == 1)[10]
        first, _ = reference_segment(image, fg_prompt([(c + 0.5, r + 0.5)]), tau=0.1)
        assert np.array_equal(first.bits, (labels == 1).astype(np.uint8))
        r2, c2 = np.argwhere(labels == 2)[10]
        both, _ = reference_segment(
            image, fg_prompt([(c + 0.5, r + 0.5), (c2 + 0.5, r2 + 0.5)]), tau=0.1
        )
        assert np.array_equal(both.bits, gt.bits)
        assert dice(both, gt) > dice(first, gt)

    def test_oracle_agreement_on_random_prompts(self, disk_phantom, rng):
        image, _ = disk_phantom
        for _ in range(10):
            pts = rng.uniform(1, 63, size=(4, 2))
            prompt = fg_prompt([tuple(p) for p in pts])
            mask, _ = reference_segment(image, prompt, tau=0.1)
            seeds = sorted({(int(y), int(x)) for x, y in pts})
            oracle = flood_fill_oracle(image.intensities, seeds, 0.1)
            assert np.array_equal(mask.bits, oracle)

    def test_idempotent(self, disk_phantom):
        image, _ = disk_phantom
        prompt = fg_prompt([(30.2, 33.8), (2.0, 60.0)])
        a, pa = reference_segment(image, prompt, tau=0.1)
        b, pb = reference_segment(image, prompt, tau=0.1)
        assert np.array_equal(a.bits, b.bits)
        assert np.array_equal(pa, pb)

    def test_interior_seed_is_absorbed(self, disk_phantom):
        image, gt = disk_phantom
        base, _ = reference_segment(image, fg_prompt([(32.5, 32.5)]), tau=0.1)
        grown, _ = reference_segment(
            image, fg_prompt([(32.5, 32.5), (28.0, 30.0)]), tau=0.1
        )
        assert gt.bits[30, 28] == 1
        assert np.array_equal(base.bits, grown.bits)

    def test_prob_mask_consistency_and_range(self, disk_phantom):
        image, _ = disk_phantom
        mask, prob = reference_segment(image, fg_prompt([(32.5, 32.5), (2.5, 2.5)]), tau=0.1)
        assert np.array_equal((prob >= 0.5).astype(np.uint8), mask.bits)
        assert prob.min() >= 0.0 and prob.max() <= 1.0
        assert (prob[mask.bits.astype(bool)] >= 0.5).all()
        assert (prob[~mask.bits.astype(bool)] == 0.0).all()

    def test_prior_mask_keeps_disconnected_region(self, bridge_phantom):
        image, gt = bridge_phantom
        from scipy import ndimage

        labels, _ = ndimage.label(gt.bits, structure=np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
        r, c = np.argwhere(labels == 1).mean(axis=0).astype(int)  # lobe centroid
        prior = Mask((labels == 2).astype(np.uint8))
        with_prior, _ = reference_segment(
            image, fg_prompt([(c + 0.5, r + 0.5)]), prior=prior, tau=0.1
        )
        assert np.array_equal(with_prior.bits, gt.bits)
        without, _ = reference_segment(image, fg_prompt([(c + 0.5, r + 0.5)]), tau=0.1)
        assert without.area() < with_prior.area()

    def test_background_point_subtracts_nearby_pixels(self):
        flat = ImageSlice(np.full((20, 20), 0.5))
        prompt = PointPrompt.build([(2.0, 10.0), (17.0, 10.0)], [1, 0], 4)
        mask, _ = reference_segment(flat, prompt, tau=0.1)
        assert mask.bits[10, 2] == 1  # foreground side kept
        assert mask.bits[10, 19] == 0  # background side removed
        assert mask.bits[10, 16] == 0

    def test_empty_prompt(self, disk_phantom):
        image, _ = disk_phantom
        with pytest.raises(EmptyPrompt):
            reference_segment(image, PointPrompt.build([], [], 20), tau=0.1)

    def test_out_of_image_seeds_are_dropped(self, disk_phantom):
        image, _ = disk_phantom
        with pytest.raises(EmptyPrompt):
            reference_segment(image, fg_prompt([(-5.0, 2.0), (200.0, 2.0)]), tau=0.1)


class TestBboxFromMask:
    def test_two_pixel_bounds(self):
        bits = np.zeros((10, 10), dtype=np.uint8)
        bits[2, 3] = 1
        bits[5, 7] = 1
        assert bbox_from_mask(Mask(bits), margin=0) == (2, 3, 5, 7)

    def test_full_mask(self):
        assert bbox_from_mask(Mask(np.ones((4, 6), dtype=np.uint8))) == (0, 0, 3, 5)

    def test_margin_clamps(self):
        bits = np.zeros((10, 10), dtype=np.uint8)
        bits[1, 1] = 1
        assert bbox_from_mask(Mask(bits), margin=5) == (0, 0, 6, 6)

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            bbox_from_mask(Mask(np.zeros((3, 3), dtype=np.uint8)))


class TestBackendObject:
    def test_deterministic_responses(self, disk_phantom):
        image, _ = disk_phantom
        backend = ReferenceBackend(tau=0.1)
        req = SegmentationRequest(prompt=fg_prompt([(32.0, 32.0)]), image=image, request_id="r1")
        a = backend.segment(req)
        b = backend.segment(req)
        assert np.array_equal(a.mask.bits, b.mask.bits)
        assert a.request_id == "r1"

    def test_all_padding_without_box_raises(self, disk_phantom):
        image, _ = disk_phantom
        backend = ReferenceBackend()
        req = SegmentationRequest(prompt=PointPrompt.build([], [], 20), image=image)
        with pytest.raises(EmptyPrompt):
            backend.segment(req)

    def test_response_invariant_enforced(self):
        mask = Mask(np.ones((2, 2), dtype=np.uint8))
        with pytest.raises(ProtocolError):
            SegmentationResponse(mask=mask, prob=np.zeros((2, 2)), latency_ms=0.0, request_id="x")
        with pytest.raises(ShapeMismatch):
            SegmentationResponse(mask=mask, prob=np.zeros((3, 3)), latency_ms=0.0, request_id="x")

    def test_box_must_be_ordered(self, disk_phantom):
        image, _ = disk_phantom
        with pytest.raises(ProtocolError):
            SegmentationRequest(prompt=fg_prompt([(1, 1)]), image=image, box=(5, 5, 2, 8))


GOLDEN_DIR = Path(__file__).resolve().parents[1] / "protocol" / "golden"


class TestWireSerialization:
    def test_request_round_trip(self, disk_phantom):
        image, gt = disk_phantom
        req = SegmentationRequest(
            prompt=fg_prompt([(3.25, 4.5)], capacity=4),
            image=image,
            case_id="c1",
            slice_index=0,
            box=(1, 2, 30, 40),
            prior_mask=gt,
            request_id="fixed-id",
        )
        body = serialize_request(req)
        back = deserialize_request(body)
        assert serialize_request(back) == body

    def test_response_round_trip(self, disk_phantom):
        image, _ = disk_phantom
        backend = ReferenceBackend()
        resp = backend.segment(
            SegmentationRequest(prompt=fg_prompt([(32.0, 32.0)]), image=image, request_id="rt")
        )
        body = serialize_response(resp)
        back = deserialize_response(body)
        assert serialize_response(back)["mask"] == body["mask"]
        assert back.request_id == "rt"

    def test_golden_request_fixtures_round_trip(self):
        for path in sorted(GOLDEN_DIR.glob("segment_request_*.json")):
            body = json.loads(path.read_text())
            assert serialize_request(deserialize_request(body)) == body

    def test_golden_response_fixtures_round_trip(self):
        for path in sorted(GOLDEN_DIR.glob("segment_response_*.json")):
            body = json.loads(path.read_text())
            assert serialize_response(deserialize_response(body)) == body

    def test_malformed_response_raises(self):
        with pytest.raises(ProtocolError):
            deserialize_response({"request_id": "x"})
        with pytest.raises(ProtocolError):
            deserialize_response({"request_id": "x", "mask": {"size": [2, 2], "rle": [9]}, "latency_ms": 1})


class TestRemoteBackend:
    def test_unreachable_host(self, disk_phantom):
        image, _ = disk_phantom
        from gazeseg.errors import BackendUnavailable

        remote = RemoteBackend("http://127.0.0.1:9", timeout_s=0.2)
        with pytest.raises(BackendUnavailable):
            remote.segment(SegmentationRequest(prompt=fg_prompt([(1, 1)]), image=image))
