from __future__ import annotations

import numpy as np

from gazeseg.core import Mask


def random_mask(rng: np.random.Generator, h: int, w: int, density: float = 0.3) -> Mask:
    return Mask((rng.random((h, w)) < density).astype(np.uint8))
