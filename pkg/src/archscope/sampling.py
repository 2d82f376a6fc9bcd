"""Uniform and placement-conditioned sampling.

Draw order is part of the contract (same seed, same architecture): resolution
first, then per unit in stack order a channel ratio (ratio spaces only), the
depth, and one block index per present layer. A placement condition pins the
named block at its (unit, layer) slot and resamples nothing else, so every
other slot keeps its unconditioned marginal; the pinned unit's depth is drawn
uniformly from {max(layer, depth_min) .. depth_max} so the slot exists.

Stream splitting: independent generators are derived as
``default_rng(SeedSequence([seed, *key]))`` where key is a tuple of small
non-negative ints naming the consumer (worker, placement, bootstrap...). The
rule is used everywhere results must not depend on scheduling.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .spaces import (
    Architecture,
    DesignSpace,
    Placement,
    consistent_blocks,
    validate_placement,
)

# stream namespace tags for spawn_rng keys
STREAM_BASELINE = 0
STREAM_PLACEMENT = 1
STREAM_BOOTSTRAP = 2
STREAM_SEARCH_INIT = 3
STREAM_SEARCH_MUTATE = 4


def spawn_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent generator from a master seed and an integer key."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in key]]))


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _sample(
    space: DesignSpace,
    rng: np.random.Generator,
    placement: Placement | None,
    resolution: int | None,
) -> Architecture:
    if resolution is None:
        resolution = _pick(rng, space.resolutions)
    elif resolution not in space.resolutions:
        raise ValidationError(f"resolution {resolution} not one of {space.resolutions}")

    pinned_block = (
        space.block(placement.unit, placement.block_code) if placement is not None else None
    )
    depths = []
    blocks = []
    ratios = []
    has_ratio = any(u.channel_ratios for u in space.units)
    for unit in space.units:
        pin = placement if placement is not None and placement.unit == unit.index else None
        if unit.channel_ratios:
            if pin is not None and pinned_block.channel_ratio is not None:
                ratio = pinned_block.channel_ratio
            else:
                ratio = _pick(rng, unit.channel_ratios)
        else:
            ratio = None
        lo = max(pin.layer, unit.depth_min) if pin is not None else unit.depth_min
        depth = int(rng.integers(lo, unit.depth_max + 1))
        choices = [b.code for b in consistent_blocks(unit, ratio)]
        codes = [_pick(rng, choices) for _ in range(depth)]
        if pin is not None:
            codes[pin.layer - 1] = pin.block_code
        depths.append(depth)
        blocks.append(tuple(codes))
        if has_ratio:
            ratios.append(ratio if ratio is not None else 1.0)
    return Architecture(
        space=space.name,
        resolution=int(resolution),
        depths=tuple(depths),
        blocks=tuple(blocks),
        channel_ratios=tuple(ratios) if has_ratio else (),
    )


def sample_uniform(
    space: DesignSpace, rng: np.random.Generator, *, resolution: int | None = None
) -> Architecture:
    """One architecture with every gene uniform over its choices."""
    return _sample(space, rng, None, resolution)


def sample_fixed(
    space: DesignSpace,
    placement: Placement,
    rng: np.random.Generator,
    *,
    resolution: int | None = None,
) -> Architecture:
    """One architecture conditioned on a pinned (unit, layer, block)."""
    validate_placement(space, placement)
    return _sample(space, rng, placement, resolution)
