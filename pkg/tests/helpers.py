"""Shared fixtures-in-code: synthetic attack scenarios used by the
optimizer, metrics, CLI, and acceptance tests.

Each scenario is a white rectangle on a dark textured background with a
region-mean synthetic oracle whose decision rectangle coincides with the
bright patch, so a drop pattern flips the class exactly when its blur
drags enough background darkness into the rectangle.
"""

import numpy as np

from advrain.imagecore import ImageBuffer
from advrain.oracle import SyntheticOracle
from advrain.optimizer import SearchConfig


def textured_image(seed: int, rect, size: int = 64) -> ImageBuffer:
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.0, 0.25, (size, size, 1))
    x0, y0, x1, y1 = rect
    a[y0:y1, x0:x1] = 1.0
    return ImageBuffer(a)


# rectangle = 1/16 of a 64x64 image; drops at the rectangle half-diagonal
# cover it from the center, so in-mask candidates flip almost surely
ATTACK_RECT = (24, 24, 40, 40)
ATTACK_THRESHOLD = 0.65
ATTACK_RADIUS = float(np.hypot(8.0, 8.0))


def attack_scenario():
    images = [textured_image(101, ATTACK_RECT), textured_image(202, ATTACK_RECT)]
    labels = [1, 1]
    oracle = SyntheticOracle(rect=ATTACK_RECT, threshold=ATTACK_THRESHOLD)
    return images, labels, oracle


def attack_config(seed: int) -> SearchConfig:
    return SearchConfig(
        iterations=20,
        candidates_per_iter=25,
        drop_count=3,
        drop_radius=ATTACK_RADIUS,
        rng_seed=seed,
        target_class=1,
    )


# rectangle ~1% of the image with small drops: flipping needs several
# drops placed precisely, which uniform placement rarely manages within
# the budget while mask-restricted sampling finds reliably
GAP_RECT = (29, 29, 35, 36)
GAP_THRESHOLD = 0.58
GAP_RADIUS = 4.6


def gap_scenario():
    images = [textured_image(11, GAP_RECT), textured_image(22, GAP_RECT)]
    labels = [1, 1]
    oracle = SyntheticOracle(rect=GAP_RECT, threshold=GAP_THRESHOLD)
    return images, labels, oracle


def gap_config(seed: int) -> SearchConfig:
    return SearchConfig(
        iterations=10,
        candidates_per_iter=5,
        drop_count=3,
        drop_radius=GAP_RADIUS,
        rng_seed=seed,
        target_class=1,
    )


def trend_corpus():
    images = [textured_image(s, ATTACK_RECT) for s in (1, 2, 3, 4)]
    labels = [1, 1, 1, 1]
    oracle = SyntheticOracle(rect=ATTACK_RECT, threshold=ATTACK_THRESHOLD)
    return images, labels, oracle
