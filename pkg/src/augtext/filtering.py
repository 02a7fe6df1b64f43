"""Loss-based selection of augmented sentences.

Augmented texts are scored by the vanilla model (trained on the same
un-augmented subset in the same run), and only the lowest-loss fraction of
the whole pool is kept. Low-loss examples are the ones the vanilla model
already finds consistent with their inherited label, so they are the least
likely to carry label noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .classifier import MLPParams, per_example_loss
from .corpus import AugmentedExample


@dataclass(frozen=True)
class FilterConfig:
    """keep_fraction of the pool survives; ties keep earlier items."""

    keep_fraction: float

    def __post_init__(self):
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")


def score_augmented(
    vanilla_params: MLPParams,
    encoder,
    items: Sequence[AugmentedExample],
) -> list[AugmentedExample]:
    """Fill in each item's loss under the vanilla model."""
    if not items:
        return []
    vectors = encoder.encode([item.text for item in items])
    losses = per_example_loss(
        vanilla_params, [(vec, item.label) for vec, item in zip(vectors, items)]
    )
    return [replace(item, loss=loss) for item, loss in zip(items, losses)]


def filter_lowest_loss(
    items: Sequence[AugmentedExample],
    cfg: FilterConfig | float,
) -> list[AugmentedExample]:
    """Keep the max(1, floor(keep_fraction * n)) smallest-loss items.

    Selection is global across the pool. Ties are broken by input order and
    the output preserves input order.
    """
    if isinstance(cfg, float):
        cfg = FilterConfig(keep_fraction=cfg)
    if not items:
        return []
    missing = [i for i, item in enumerate(items) if item.loss is None]
    if missing:
        raise ValueError(f"{len(missing)} items lack a loss (first at index {missing[0]})")
    m = max(1, math.floor(cfg.keep_fraction * len(items)))
    ranked = sorted(range(len(items)), key=lambda i: (items[i].loss, i))
    kept = sorted(ranked[:m])
    return [items[i] for i in kept]
