"""Saliency-guided random search for universal raindrop placement.

The search computes saliency heatmaps once on the clean attacker set,
restricts candidate drop centers to the highest-saliency pixels, and
then draws T x N complete candidate placements, keeping the best
pattern by misclassification rate (softmax tie-break). The random
baseline runs the identical loop with the whole image as the mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch, EmptyMask
from .imagecore import ImageBuffer
from .oracle import Heatmap, softmax
from .render import (
    DEFAULT_FISHEYE_STRENGTH,
    DEFAULT_SIGMA_RATIO,
    Raindrop,
    RaindropPattern,
    merge_collisions,
    pattern_to_dict,
    render,
)

__all__ = [
    "SearchConfig",
    "CriticalMask",
    "AttackResult",
    "critical_mask",
    "full_mask",
    "sample_candidate",
    "evaluate_pattern",
    "random_search",
    "random_baseline",
]


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 20
    candidates_per_iter: int = 25
    drop_count: int = 10
    drop_radius: float = 10.0
    sigma_ratio: float = DEFAULT_SIGMA_RATIO
    fisheye_strength: float = DEFAULT_FISHEYE_STRENGTH
    saliency_quantile: float = 0.3
    rng_seed: int = 0
    target_class: int = 0

    def __post_init__(self):
        if self.iterations < 1 or self.candidates_per_iter < 1:
            raise ConfigInvalid("iterations and candidates_per_iter must be >= 1")
        if self.drop_count < 1:
            raise ConfigInvalid("drop_count must be >= 1")
        if not self.drop_radius > 0:
            raise ConfigInvalid("drop_radius must be > 0")
        if not 0.0 < self.saliency_quantile <= 1.0:
            raise ConfigInvalid("saliency_quantile must lie in (0,1]")
        if not self.sigma_ratio > 0:
            raise ConfigInvalid("sigma_ratio must be > 0")
        if not self.fisheye_strength >= 1:
            raise ConfigInvalid("fisheye_strength must be >= 1")
        if self.target_class < 0:
            raise ConfigInvalid("target_class must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        if not isinstance(data, dict):
            raise ConfigInvalid("search config must be an object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown search config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigInvalid(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "candidates_per_iter": self.candidates_per_iter,
            "drop_count": self.drop_count,
            "drop_radius": self.drop_radius,
            "sigma_ratio": self.sigma_ratio,
            "fisheye_strength": self.fisheye_strength,
            "saliency_quantile": self.saliency_quantile,
            "rng_seed": self.rng_seed,
            "target_class": self.target_class,
        }


@dataclass(frozen=True)
class CriticalMask:
    allowed: np.ndarray = field(repr=False)  # (h, w) bool

    def __post_init__(self):
        arr = np.ascontiguousarray(np.asarray(self.allowed, dtype=bool))
        if arr.ndim != 2:
            raise ValueError("mask must be 2-D")
        if not arr.any():
            raise EmptyMask("critical mask has no allowed pixel")
        arr.flags.writeable = False
        object.__setattr__(self, "allowed", arr)

    @property
    def height(self) -> int:
        return self.allowed.shape[0]

    @property
    def width(self) -> int:
        return self.allowed.shape[1]


@dataclass(frozen=True)
class AttackResult:
    best_pattern: RaindropPattern
    objective_trace: tuple  # per-iteration best-so-far misclassification rate
    clean_accuracy: float
    adversarial_accuracy: float
    evaluations_used: int

    def to_dict(self, config: SearchConfig) -> dict:
        return {
            "config": config.to_dict(),
            "clean_accuracy": self.clean_accuracy,
            "adversarial_accuracy": self.adversarial_accuracy,
            "objective_trace": list(self.objective_trace),
            "best_pattern": pattern_to_dict(self.best_pattern),
        }


def critical_mask(heatmaps, q: float) -> CriticalMask:
    """Threshold the averaged heatmap so at most a q-fraction of pixels pass.

    The cutoff is the lowest heatmap value whose >=-count stays within
    q * pixel_count, i.e. whole value-classes are admitted from the top
    down while they fit the budget. Falls back to the single maximum
    pixel if even the top value-class exceeds the budget.
    """
    if not heatmaps:
        raise ValueError("heatmaps must be non-empty")
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0,1]")
    shape = (heatmaps[0].height, heatmaps[0].width)
    for hm in heatmaps:
        if (hm.height, hm.width) != shape:
            raise DimensionMismatch("heatmaps must share dimensions")
    avg = np.mean([hm.values for hm in heatmaps], axis=0)
    budget = q * avg.size
    values = np.sort(np.unique(avg))[::-1]
    allowed = None
    for v in values:
        mask = avg >= v
        if mask.sum() <= budget:
            allowed = mask
        else:
            break
    if allowed is None:
        # even the maximum's value-class is too large for the budget
        allowed = np.zeros(shape, dtype=bool)
        allowed[np.unravel_index(np.argmax(avg), shape)] = True
    return CriticalMask(allowed=allowed)


def full_mask(width: int, height: int) -> CriticalMask:
    return CriticalMask(allowed=np.ones((height, width), dtype=bool))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so sequences are reproducible and splittable."""
    return np.random.Generator(np.random.Philox(seed))


def sample_candidate(mask: CriticalMask, n: int, r: float, rng: np.random.Generator):
    """Draw n drop centers uniformly from allowed pixels with sub-pixel jitter.

    Consumes the stream per drop in order: pixel index, x jitter, y jitter.
    """
    allowed = np.argwhere(mask.allowed)  # (k, 2) rows of (y, x)
    if len(allowed) == 0:
        raise EmptyMask("cannot sample from an empty mask")
    drops = []
    for _ in range(n):
        idx = int(rng.integers(len(allowed)))
        jx = float(rng.random())
        jy = float(rng.random())
        y, x = allowed[idx]
        drops.append(Raindrop(cx=float(x) + jx, cy=float(y) + jy, radius=float(r)))
    return drops


def _scores_stats(scores, labels):
    """(misclassification rate, mean true-class softmax probability)."""
    wrong = 0
    true_prob = 0.0
    for s, label in zip(scores, labels):
        if s.top1 != label:
            wrong += 1
        true_prob += float(softmax(s.logits)[label])
    count = len(labels)
    return wrong / count, true_prob / count


def evaluate_pattern(images, labels, pattern: RaindropPattern, oracle) -> float:
    """Fraction of the attacker set whose prediction leaves the true class."""
    rate, _ = _evaluate_with_tiebreak(images, labels, pattern, oracle)
    return rate


def _evaluate_with_tiebreak(images, labels, pattern, oracle):
    if not images or len(images) != len(labels):
        raise ValueError("images and labels must be aligned and non-empty")
    rendered = [render(img, pattern) for img in images]
    scores = oracle.classify(rendered)
    return _scores_stats(scores, labels)


def _make_pattern(drops, config: SearchConfig, width: int, height: int) -> RaindropPattern:
    return RaindropPattern(
        image_width=width,
        image_height=height,
        drops=tuple(merge_collisions(drops)),
        sigma_ratio=config.sigma_ratio,
        fisheye_strength=config.fisheye_strength,
    )


def _search(images, labels, oracle, config: SearchConfig, mask: CriticalMask) -> AttackResult:
    if not images or len(images) != len(labels):
        raise ConfigInvalid("images and labels must be aligned and non-empty")
    first = images[0]
    for img in images:
        if not img.same_shape(first):
            raise DimensionMismatch("all attacker images must share dimensions")
    if (mask.height, mask.width) != (first.height, first.width):
        raise DimensionMismatch("mask dimensions must match the images")

    clean_scores = oracle.classify(list(images))
    clean_rate, _ = _scores_stats(clean_scores, labels)
    clean_accuracy = 1.0 - clean_rate

    rng = make_rng(config.rng_seed)
    best = None  # (rate, true_prob, order, pattern)
    trace = []
    order = 0
    for _t in range(config.iterations):
        for _c in range(config.candidates_per_iter):
            drops = sample_candidate(mask, config.drop_count, config.drop_radius, rng)
            pattern = _make_pattern(drops, config, first.width, first.height)
            rate, true_prob = _evaluate_with_tiebreak(images, labels, pattern, oracle)
            if best is None or (rate, -true_prob) > (best[0], -best[1]):
                best = (rate, true_prob, order, pattern)
            order += 1
        trace.append(best[0])

    return AttackResult(
        best_pattern=best[3],
        objective_trace=tuple(trace),
        clean_accuracy=clean_accuracy,
        adversarial_accuracy=1.0 - best[0],
        evaluations_used=config.iterations * config.candidates_per_iter,
    )


def random_search(images, labels, oracle, config: SearchConfig) -> AttackResult:
    """Saliency-guided search: candidates restricted to the critical mask."""
    heatmaps = [oracle.gradcam(img, config.target_class) for img in images]
    mask = critical_mask(heatmaps, config.saliency_quantile)
    return _search(images, labels, oracle, config, mask)


def random_baseline(images, labels, oracle, config: SearchConfig) -> AttackResult:
    """Same budget and loop, candidates uniform over the whole image."""
    if not images:
        raise ConfigInvalid("images must be non-empty")
    mask = full_mask(images[0].width, images[0].height)
    return _search(images, labels, oracle, config, mask)
