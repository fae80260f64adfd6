from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gazeseg.core import ImageSlice, Mask  # noqa: F401
from gazeseg.phantom import Blob, PhantomSpec, generate_phantom

settings.register_profile(
    "ci",
    max_examples=40,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
    deadline=None,
)
settings.load_profile("ci")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def disk_phantom() -> tuple[ImageSlice, Mask]:
    """Noise-free uniform disk (0.8) on a 0.2 background."""
    spec = PhantomSpec(
        height=64,
        width=64,
        blobs=(Blob(center=(32.0, 32.0), radii=(14.0, 14.0), intensity=0.8, name="disk"),),
        background_intensity=0.2,
        noise_std=0.0,
    )
    image, masks = generate_phantom(spec)
    return image, masks[0]


@pytest.fixture
def bridge_phantom() -> tuple[ImageSlice, Mask]:
    """Two lobes separated by a thin background bridge; one structure."""
    spec = PhantomSpec(
        height=80,
        width=120,
        blobs=(
            Blob(
                center=(60.0, 40.0),
                radii=(12.0, 10.0),
                intensity=0.8,
                lobes=2,
                lobe_gap_px=3.0,
                name="pair",
            ),
        ),
        background_intensity=0.2,
        noise_std=0.0,
    )
    image, masks = generate_phantom(spec)
    return image, masks[0]
