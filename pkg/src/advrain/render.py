"""Raindrop generator: footprint geometry, Gaussian blur, fish-eye warp,
collision merging, and compositing onto an image.

A drop footprint is the union of a circle (radius r at the drop center)
and an axis-aligned oval (semi-axes 0.8r x 1.1r, offset 0.4r below the
center), feathered linearly over a 1-pixel band at the boundary. Each
drop magnifies the covered content with a radial fish-eye map and then
blurs it with a Gaussian kernel whose sigma scales with the radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidStrength,
    NonPositiveSigma,
    PatternFormatError,
)
from .imagecore import ImageBuffer, sample_bilinear_grid

__all__ = [
    "Raindrop",
    "RaindropPattern",
    "GaussianKernel",
    "DropMask",
    "gaussian_kernel",
    "drop_footprint",
    "fisheye_warp",
    "blur_region",
    "merge_collisions",
    "render",
    "pattern_to_dict",
    "pattern_from_dict",
    "save_pattern",
    "load_pattern",
]

# oval geometry relative to the drop radius
OVAL_SEMI_X = 0.8
OVAL_SEMI_Y = 1.1
OVAL_OFFSET_Y = 0.4
# circumscribing-circle factor for the fish-eye region (covers the union)
FISHEYE_REACH = 1.1 * 1.4

DEFAULT_SIGMA_RATIO = 0.5
DEFAULT_FISHEYE_STRENGTH = 1.5


@dataclass(frozen=True)
class Raindrop:
    cx: float
    cy: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be > 0, got {self.radius}")


@dataclass(frozen=True)
class RaindropPattern:
    """Serializable perturbation: drop set plus rendering knobs."""

    image_width: int
    image_height: int
    drops: tuple
    sigma_ratio: float = DEFAULT_SIGMA_RATIO
    fisheye_strength: float = DEFAULT_FISHEYE_STRENGTH

    def __post_init__(self):
        object.__setattr__(self, "drops", tuple(self.drops))
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("pattern image dimensions must be >= 1")
        if not self.sigma_ratio > 0:
            raise ValueError("sigma_ratio must be > 0")
        if not self.fisheye_strength >= 1:
            raise InvalidStrength("fisheye_strength must be >= 1")


@dataclass(frozen=True)
class GaussianKernel:
    sigma: float
    half_width: int
    weights: np.ndarray = field(repr=False)  # (2h+1, 2h+1), sums to 1
    taps: np.ndarray = field(repr=False)  # 1-D factor; weights = outer(taps, taps)


@dataclass(frozen=True)
class DropMask:
    alpha: np.ndarray = field(repr=False)  # (h, w) in [0,1]

    @property
    def height(self) -> int:
        return self.alpha.shape[0]

    @property
    def width(self) -> int:
        return self.alpha.shape[1]


def gaussian_kernel(sigma: float) -> GaussianKernel:
    """Normalized Gaussian kernel with half-width ceil(2*sigma)."""
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be > 0, got {sigma}")
    hw = int(math.ceil(2.0 * sigma))
    offs = np.arange(-hw, hw + 1, dtype=np.float64)
    taps = np.exp(-(offs ** 2) / (2.0 * sigma ** 2))
    taps /= taps.sum()
    weights = np.outer(taps, taps)
    weights = weights / weights.sum()
    return GaussianKernel(sigma=float(sigma), half_width=hw, weights=weights, taps=taps)


def _footprint_alpha(drop: Raindrop, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Feathered alpha of the circle+oval union on a coordinate grid.

    alpha is exactly 1 inside the union and falls linearly to 0 over a
    1-pixel band outside the boundary (outside-distance approximation
    for the oval uses the radial distance along the ray from its center).
    """
    r = drop.radius
    dx = xs - drop.cx
    dy = ys - drop.cy
    dist = np.hypot(dx, dy)
    a_circle = np.clip(r + 1.0 - dist, 0.0, 1.0)

    ax, ay = OVAL_SEMI_X * r, OVAL_SEMI_Y * r
    dy_o = ys - (drop.cy + OVAL_OFFSET_Y * r)
    d_o = np.hypot(dx, dy_o)
    rho = np.hypot(dx / ax, dy_o / ay)
    with np.errstate(divide="ignore", invalid="ignore"):
        outside = np.where(rho > 1.0, d_o * (1.0 - 1.0 / rho), 0.0)
    outside = np.nan_to_num(outside, nan=0.0)
    a_oval = np.clip(1.0 - outside, 0.0, 1.0)

    return np.maximum(a_circle, a_oval)


def drop_footprint(drop: Raindrop, w: int, h: int) -> DropMask:
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    return DropMask(alpha=_footprint_alpha(drop, xs, ys))


def _conv1d_valid(arr: np.ndarray, taps: np.ndarray, axis: int) -> np.ndarray:
    """'valid' 1-D convolution along an axis (kernel is symmetric)."""
    win = np.lib.stride_tricks.sliding_window_view(arr, len(taps), axis=axis)
    return np.tensordot(win, taps, axes=([-1], [0]))


def _blur_full(pixels: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Separable Gaussian blur of an (h, w, c) block with clamp-to-edge."""
    hw = kernel.half_width
    padded = np.pad(pixels, ((hw, hw), (hw, hw), (0, 0)), mode="edge")
    out = _conv1d_valid(padded, kernel.taps, axis=0)
    return _conv1d_valid(out, kernel.taps, axis=1)


def blur_region(img: ImageBuffer, mask: DropMask, kernel: GaussianKernel) -> ImageBuffer:
    """Gaussian-blur the image and composite it back through the mask."""
    if (mask.height, mask.width) != (img.height, img.width):
        raise DimensionMismatch(
            f"mask {mask.height}x{mask.width} vs image {img.height}x{img.width}"
        )
    out = img.pixels.copy()
    _blend_blur_inplace(out, mask.alpha, kernel)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def _blend_blur_inplace(pixels: np.ndarray, alpha: np.ndarray, kernel: GaussianKernel) -> None:
    """out = alpha*blur(img) + (1-alpha)*img, computed on the alpha bounding box."""
    rows = np.any(alpha > 0, axis=1)
    cols = np.any(alpha > 0, axis=0)
    if not rows.any():
        return
    y0, y1 = np.argmax(rows), len(rows) - np.argmax(rows[::-1])
    x0, x1 = np.argmax(cols), len(cols) - np.argmax(cols[::-1])
    hw = kernel.half_width
    crop = _padded_crop(pixels, y0 - hw, y1 + hw, x0 - hw, x1 + hw)
    blurred = _conv1d_valid(crop, kernel.taps, axis=0)
    blurred = _conv1d_valid(blurred, kernel.taps, axis=1)
    a = alpha[y0:y1, x0:x1, None]
    pixels[y0:y1, x0:x1] = a * blurred + (1.0 - a) * pixels[y0:y1, x0:x1]


def _padded_crop(pixels: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> np.ndarray:
    """Crop [y0:y1, x0:x1] with clamp-to-edge beyond the image bounds."""
    h, w = pixels.shape[:2]
    cy0, cy1 = max(y0, 0), min(y1, h)
    cx0, cx1 = max(x0, 0), min(x1, w)
    crop = pixels[cy0:cy1, cx0:cx1]
    pad = ((cy0 - y0, y1 - cy1), (cx0 - x0, x1 - cx1), (0, 0))
    if any(p != (0, 0) for p in pad[:2]):
        crop = np.pad(crop, pad, mode="edge")
    return crop


def fisheye_warp(img: ImageBuffer, drop: Raindrop, k: float) -> ImageBuffer:
    if not k >= 1:
        raise InvalidStrength(f"fisheye strength must be >= 1, got {k}")
    out = img.pixels.copy()
    _fisheye_inplace(out, drop, k)
    return ImageBuffer(out)


def _fisheye_inplace(pixels: np.ndarray, drop: Raindrop, k: float) -> None:
    if k == 1.0:
        return
    h, w = pixels.shape[:2]
    R = FISHEYE_REACH * drop.radius
    x0 = max(int(math.floor(drop.cx - R)), 0)
    x1 = min(int(math.ceil(drop.cx + R)) + 1, w)
    y0 = max(int(math.floor(drop.cy - R)), 0)
    y1 = min(int(math.ceil(drop.cy + R)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    xs, ys = np.meshgrid(
        np.arange(x0, x1, dtype=np.float64), np.arange(y0, y1, dtype=np.float64)
    )
    dx = xs - drop.cx
    dy = ys - drop.cy
    d = np.hypot(dx, dy) / R
    inside = d < 1.0
    if not inside.any():
        return
    scale = np.where(inside, d ** (k - 1.0), 1.0)
    src_x = drop.cx + dx * scale
    src_y = drop.cy + dy * scale
    warped = sample_bilinear_grid(pixels, src_x, src_y)
    block = pixels[y0:y1, x0:x1]
    pixels[y0:y1, x0:x1] = np.where(inside[:, :, None], warped, block)


def merge_collisions(drops) -> list:
    """Merge drop pairs whose centers fall inside each other's circle.

    Colliding pairs are replaced by a single drop at the area-weighted
    centroid with radius sqrt(r1^2 + r2^2), iterated to a fixed point.
    Output is ordered by (cy, cx).
    """
    items = sorted(drops, key=lambda d: (d.cy, d.cx))
    merged = True
    while merged:
        merged = False
        for i in range(len(items)):
            for j in range(i + 1, len(items)):
                a, b = items[i], items[j]
                dist = math.hypot(a.cx - b.cx, a.cy - b.cy)
                if dist <= max(a.radius, b.radius):
                    wa, wb = a.radius ** 2, b.radius ** 2
                    total = wa + wb
                    combined = Raindrop(
                        cx=(wa * a.cx + wb * b.cx) / total,
                        cy=(wa * a.cy + wb * b.cy) / total,
                        radius=math.sqrt(total),
                    )
                    items = [d for idx, d in enumerate(items) if idx not in (i, j)]
                    items.append(combined)
                    items.sort(key=lambda d: (d.cy, d.cx))
                    merged = True
                    break
            if merged:
                break
    return items


def render(img: ImageBuffer, pattern: RaindropPattern) -> ImageBuffer:
    """Apply the raindrop generator: merge, then warp+blur each drop."""
    if (pattern.image_height, pattern.image_width) != (img.height, img.width):
        raise DimensionMismatch(
            f"pattern {pattern.image_height}x{pattern.image_width} vs "
            f"image {img.height}x{img.width}"
        )
    out = img.pixels.copy()
    for drop in merge_collisions(pattern.drops):
        _fisheye_inplace(out, drop, pattern.fisheye_strength)
        kernel = gaussian_kernel(pattern.sigma_ratio * drop.radius)
        xs, ys = _bbox_grid(drop, img.width, img.height)
        if xs is None:
            continue
        alpha = np.zeros((img.height, img.width), dtype=np.float64)
        alpha[ys[0]:ys[1], xs[0]:xs[1]] = _footprint_alpha(
            drop,
            *np.meshgrid(
                np.arange(xs[0], xs[1], dtype=np.float64),
                np.arange(ys[0], ys[1], dtype=np.float64),
            ),
        )
        _blend_blur_inplace(out, alpha, kernel)
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def _bbox_grid(drop: Raindrop, w: int, h: int):
    """Bounding box of the feathered footprint, clipped to the image."""
    reach = max(drop.radius, OVAL_OFFSET_Y * drop.radius + OVAL_SEMI_Y * drop.radius) + 1.0
    x0 = max(int(math.floor(drop.cx - reach)), 0)
    x1 = min(int(math.ceil(drop.cx + reach)) + 1, w)
    y0 = max(int(math.floor(drop.cy - reach)), 0)
    y1 = min(int(math.ceil(drop.cy + reach)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return None, None
    return (x0, x1), (y0, y1)


# ---------------------------------------------------------------------------
# pattern (de)serialization

_PATTERN_FIELDS = {"image_width", "image_height", "sigma_ratio", "fisheye_strength", "drops"}
_DROP_FIELDS = {"cx", "cy", "radius"}


def pattern_to_dict(pattern: RaindropPattern) -> dict:
    return {
        "image_width": pattern.image_width,
        "image_height": pattern.image_height,
        "sigma_ratio": pattern.sigma_ratio,
        "fisheye_strength": pattern.fisheye_strength,
        "drops": [{"cx": d.cx, "cy": d.cy, "radius": d.radius} for d in pattern.drops],
    }


def pattern_from_dict(data: dict) -> RaindropPattern:
    if not isinstance(data, dict):
        raise PatternFormatError("pattern JSON must be an object")
    unknown = set(data) - _PATTERN_FIELDS
    if unknown:
        raise PatternFormatError(f"unknown pattern fields: {sorted(unknown)}")
    missing = _PATTERN_FIELDS - set(data)
    if missing:
        raise PatternFormatError(f"missing pattern fields: {sorted(missing)}")
    drops = []
    for entry in data["drops"]:
        if not isinstance(entry, dict) or set(entry) != _DROP_FIELDS:
            raise PatternFormatError(f"malformed drop entry: {entry!r}")
        drops.append(Raindrop(cx=float(entry["cx"]), cy=float(entry["cy"]),
                              radius=float(entry["radius"])))
    try:
        return RaindropPattern(
            image_width=int(data["image_width"]),
            image_height=int(data["image_height"]),
            drops=tuple(drops),
            sigma_ratio=float(data["sigma_ratio"]),
            fisheye_strength=float(data["fisheye_strength"]),
        )
    except (TypeError, ValueError) as exc:
        raise PatternFormatError(str(exc)) from exc


def save_pattern(pattern: RaindropPattern, path) -> None:
    with open(path, "w") as fh:
        json.dump(pattern_to_dict(pattern), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_pattern(path) -> RaindropPattern:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PatternFormatError(f"invalid JSON: {exc}") from exc
    return pattern_from_dict(data)
