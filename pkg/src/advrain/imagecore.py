"""Image buffers, PNG I/O, and bilinear resampling.

Images live in float [0,1] everywhere inside the toolkit; 8-bit only at
file boundaries. All operations are pure and use clamp-to-edge sampling.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ChannelOutOfRange, DimensionMismatch, UnsupportedFormat

__all__ = [
    "ImageBuffer",
    "load_image",
    "save_image",
    "decode_png",
    "encode_png",
    "resize_bilinear",
    "sample_bilinear",
]


@dataclass(frozen=True)
class ImageBuffer:
    """H x W x C float image with intensities in [0,1].

    The pixel array is made read-only on construction; operations return
    new buffers instead of mutating.
    """

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, 1|3) array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities must be finite and lie in [0,1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def same_shape(self, other: "ImageBuffer") -> bool:
        return self.pixels.shape == other.pixels.shape


def _from_pil(im: Image.Image) -> ImageBuffer:
    mode = im.mode
    if mode in ("P", "PA"):
        raise UnsupportedFormat("palette PNGs are not supported")
    if mode in ("I", "I;16", "I;16B", "I;16L", "F", "1"):
        raise UnsupportedFormat(f"unsupported bit depth/mode {mode!r} (8-bit only)")
    if mode not in ("L", "LA", "RGB", "RGBA"):
        raise UnsupportedFormat(f"unsupported mode {mode!r}")
    arr = np.asarray(im, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if mode in ("LA", "RGBA"):
        # composite over black: scale color channels by alpha, drop alpha
        alpha = arr[:, :, -1:]
        arr = arr[:, :, :-1] * alpha
    return ImageBuffer(arr)


def decode_png(data: bytes) -> ImageBuffer:
    try:
        im = Image.open(io.BytesIO(data))
        im.load()
    except Exception as exc:
        raise UnsupportedFormat(f"cannot decode PNG: {exc}") from exc
    return _from_pil(im)


def load_image(path) -> ImageBuffer:
    """Load an 8-bit grayscale or RGB PNG as a float buffer (byte/255)."""
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_png(data)


def _to_bytes_array(img: ImageBuffer) -> np.ndarray:
    # round-half-up, clamped
    return np.clip(np.floor(img.pixels * 255.0 + 0.5), 0, 255).astype(np.uint8)


def _to_pil(img: ImageBuffer) -> Image.Image:
    arr = _to_bytes_array(img)
    if img.channels == 1:
        return Image.fromarray(arr[:, :, 0], mode="L")
    return Image.fromarray(arr, mode="RGB")


def encode_png(img: ImageBuffer) -> bytes:
    buf = io.BytesIO()
    _to_pil(img).save(buf, format="PNG")
    return buf.getvalue()


def save_image(img: ImageBuffer, path) -> None:
    """Write an 8-bit PNG; byte = round(intensity*255), half rounds up."""
    _to_pil(img).save(path, format="PNG")


def sample_bilinear(img: ImageBuffer, x: float, y: float, c: int) -> float:
    """Bilinear sample at sub-pixel (x, y) in channel c, clamp-to-edge.

    x is the column coordinate, y the row coordinate; integer coordinates
    hit pixel centers exactly.
    """
    if c < 0 or c >= img.channels:
        raise ChannelOutOfRange(f"channel {c} out of range for {img.channels}-channel image")
    h, w = img.height, img.width
    x = min(max(float(x), 0.0), w - 1.0)
    y = min(max(float(y), 0.0), h - 1.0)
    x0, y0 = int(np.floor(x)), int(np.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    p = img.pixels[:, :, c]
    top = p[y0, x0] * (1.0 - fx) + p[y0, x1] * fx
    bot = p[y1, x0] * (1.0 - fx) + p[y1, x1] * fx
    return float(top * (1.0 - fy) + bot * fy)


def sample_bilinear_grid(pixels: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized clamp-to-edge bilinear gather.

    pixels: (h, w, c); xs/ys: equally-shaped float coordinate arrays.
    Returns an array of shape xs.shape + (c,).
    """
    h, w = pixels.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = pixels[y0, x0] * (1.0 - fx) + pixels[y0, x1] * fx
    bot = pixels[y1, x0] * (1.0 - fx) + pixels[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(img: ImageBuffer, out_w: int, out_h: int) -> ImageBuffer:
    """Resize with bilinear interpolation at output pixel centers."""
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    sx = img.width / out_w
    sy = img.height / out_h
    xs = (np.arange(out_w) + 0.5) * sx - 0.5
    ys = (np.arange(out_h) + 0.5) * sy - 0.5
    gx, gy = np.meshgrid(xs, ys)
    out = sample_bilinear_grid(img.pixels, gx, gy)
    # convex combinations can drift past the bounds by float epsilon only
    return ImageBuffer(np.clip(out, 0.0, 1.0))


def require_same_shape(a: ImageBuffer, b: ImageBuffer) -> None:
    if not a.same_shape(b):
        raise DimensionMismatch(
            f"shape {a.pixels.shape} vs {b.pixels.shape}"
        )
