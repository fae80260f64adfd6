"""Synthetic gaze-point generation driven by region proportions.

Points are drawn without replacement from three disjoint pixel regions:
the prediction/reference difference, the reference mask outside that
difference, and everything else.  Integer quotas come from a largest
remainder split so the configured percentages are exact at small counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Mask, empty_mask_like, mask_difference
from .errors import EmptyGroundTruth, InvalidParam

# Fixed region priority for quota tie-breaks and reallocation.
REGIONS = ("gt", "diff", "out")


@dataclass(frozen=True)
class GazeGenConfig:
    """Proportion mix, point budget and seed for one generation call."""

    prop_gt: float = 0.8
    prop_diff: float = 0.0
    prop_out: float = 0.2
    n_points: int = 20
    seed: int = 0

    def __post_init__(self):
        props = (self.prop_gt, self.prop_diff, self.prop_out)
        if any(p < 0 or p > 1 for p in props):
            raise InvalidParam("proportions must lie in [0, 1]")
        if abs(sum(props) - 1.0) > 1e-9:
            raise InvalidParam(f"proportions sum to {sum(props)}, expected 1")
        if self.n_points < 1:
            raise InvalidParam("n_points must be >= 1")

    def props(self) -> tuple[float, float, float]:
        return (self.prop_gt, self.prop_diff, self.prop_out)


class TaggedPoint(NamedTuple):
    x: float
    y: float
    region: str


def quota_split(
    n: int,
    props: tuple[float, float, float],
    availability: tuple[int, int, int],
) -> tuple[int, int, int]:
    """Largest-remainder apportionment of n over (gt, diff, out), then
    reallocation of any unservable quota in priority order gt -> diff -> out.

    The returned counts sum to min(n, total availability).
    """
    if n < 1:
        raise InvalidParam("n must be >= 1")
    quotas = [n * p for p in props]
    counts = [int(np.floor(q)) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    seats = n - sum(counts)
    # Highest remainder first; ties resolved by region priority order.
    for idx in sorted(range(3), key=lambda i: (-remainders[i], i)):
        if seats <= 0:
            break
        counts[idx] += 1
        seats -= 1

    target = min(n, sum(availability))
    counts = [min(c, a) for c, a in zip(counts, availability)]
    shortfall = target - sum(counts)
    for idx in range(3):
        if shortfall <= 0:
            break
        take = min(shortfall, availability[idx] - counts[idx])
        counts[idx] += take
        shortfall -= take
    return (counts[0], counts[1], counts[2])


def generate_prompt_points(
    gt: Mask,
    predicted: Mask | None,
    cfg: GazeGenConfig,
    rng: np.random.Generator | None = None,
) -> list[TaggedPoint]:
    """Draw distinct pixels per region quota and jitter them sub-pixel.

    With no predicted mask the difference region is empty and its quota
    reallocates (gt first).  When the regions cannot cover n_points, every
    available pixel is returned and the caller pads the prompt.
    """
    if gt.is_empty():
        raise EmptyGroundTruth("reference mask has no pixels")
    if predicted is not None:
        diff = mask_difference(predicted, gt)
    else:
        diff = empty_mask_like(gt.height, gt.width)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)

    diff_bits = diff.bits.astype(bool)
    gt_bits = gt.bits.astype(bool) & ~diff_bits
    out_bits = ~(gt.bits.astype(bool) | diff_bits)
    region_idx = {
        "gt": np.flatnonzero(gt_bits.ravel()),
        "diff": np.flatnonzero(diff_bits.ravel()),
        "out": np.flatnonzero(out_bits.ravel()),
    }
    avail = tuple(int(region_idx[r].size) for r in REGIONS)
    counts = quota_split(cfg.n_points, cfg.props(), avail)  # type: ignore[arg-type]

    width = gt.width
    points: list[TaggedPoint] = []
    for region, count in zip(REGIONS, counts):
        if count == 0:
            continue
        chosen = rng.choice(region_idx[region], size=count, replace=False)
        offsets = rng.random(size=(count, 2))
        for flat, (ux, uy) in zip(chosen, offsets):
            row, col = divmod(int(flat), width)
            points.append(TaggedPoint(x=col + float(ux), y=row + float(uy), region=region))
    return points
