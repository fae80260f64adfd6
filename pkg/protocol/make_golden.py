#!/usr/bin/env python3
"""Regenerate the golden wire-protocol transcripts.

The fixtures pin the /v1/segment JSON surface for every implementation of
the protocol (built-in service, remote clients, inference sidecars).  Run
from the repository root:

    python3 protocol/make_golden.py
"""

from __future__ import annotations

import json
from pathlib import Path

from gazeseg.backend import (
    ReferenceBackend,
    SegmentationRequest,
    serialize_request,
    serialize_response,
)
from gazeseg.core import PointPrompt
from gazeseg.phantom import Blob, PhantomSpec, generate_phantom

OUT = Path(__file__).resolve().parent / "golden"


def tiny_phantom():
    spec = PhantomSpec(
        height=24,
        width=24,
        blobs=(Blob(center=(12.0, 12.0), radii=(6.0, 5.0), intensity=0.8, name="disk"),),
        background_intensity=0.2,
        noise_std=0.0,
    )
    return generate_phantom(spec)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    image, (gt,) = tiny_phantom()
    backend = ReferenceBackend(tau=0.1)

    cases = {
        "points": SegmentationRequest(
            prompt=PointPrompt.build([(12.25, 11.5), (13.0, 13.75)], [1, 1], 5),
            image=image,
            case_id="golden",
            slice_index=0,
            request_id="golden-points-0001",
        ),
        "box": SegmentationRequest(
            prompt=PointPrompt.build([], [], 5),
            image=image,
            case_id="golden",
            slice_index=0,
            box=(6, 5, 18, 19),
            request_id="golden-box-0002",
        ),
        "prior": SegmentationRequest(
            prompt=PointPrompt.build([(12.5, 12.5)], [1], 5),
            image=image,
            case_id="golden",
            slice_index=0,
            prior_mask=gt,
            request_id="golden-prior-0003",
        ),
    }
    for name, req in cases.items():
        body = serialize_request(req)
        (OUT / f"segment_request_{name}.json").write_text(json.dumps(body, indent=2) + "\n")
        resp = backend.segment(req)
        (OUT / f"segment_response_{name}.json").write_text(
            json.dumps(serialize_response(resp), indent=2) + "\n"
        )
    print(f"wrote {len(cases) * 2} fixtures under {OUT}")


if __name__ == "__main__":
    main()
