"""Classifier-and-saliency oracles.

Two implementations of the same interface: a closed-form synthetic
oracle for standalone testing (class 1 iff the mean intensity of a fixed
rectangle exceeds a threshold) and an HTTP client for a model-serving
sidecar speaking the /v1/classify and /v1/gradcam JSON protocol.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field

import numpy as np
import requests

from .errors import (
    ClassOutOfRange,
    ConfigInvalid,
    DimensionMismatch,
    OracleUnreachable,
    ProtocolError,
    ShapeMismatch,
)
from .imagecore import ImageBuffer, encode_png

__all__ = [
    "ClassScores",
    "Heatmap",
    "OracleConfig",
    "SyntheticOracle",
    "HttpOracle",
    "softmax",
]

# logit scale for the synthetic oracle's region-mean margin
_SYNTHETIC_LOGIT_SCALE = 10.0


@dataclass(frozen=True)
class ClassScores:
    logits: tuple
    top1: int

    @classmethod
    def from_logits(cls, logits) -> "ClassScores":
        arr = np.asarray(logits, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("logits must be a non-empty vector")
        # ties break toward the lowest index (np.argmax does exactly this)
        return cls(logits=tuple(float(v) for v in arr), top1=int(np.argmax(arr)))


@dataclass(frozen=True)
class Heatmap:
    values: np.ndarray = field(repr=False)  # (h, w) in [0,1], max in {0,1}

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("heatmap must be 2-D")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("heatmap values must lie in [0,1]")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def normalize_heatmap(raw: np.ndarray) -> Heatmap:
    """Clip negatives and scale so the maximum is 1 (or all zeros)."""
    arr = np.maximum(np.asarray(raw, dtype=np.float64), 0.0)
    peak = arr.max() if arr.size else 0.0
    if peak > 0:
        arr = arr / peak
    return Heatmap(values=np.clip(arr, 0.0, 1.0))


def softmax(logits) -> np.ndarray:
    arr = np.asarray(logits, dtype=np.float64)
    arr = arr - arr.max()
    e = np.exp(arr)
    return e / e.sum()


class SyntheticOracle:
    """Two-class rule: class 1 iff mean intensity of a rectangle > threshold.

    The Grad-CAM heatmap is the indicator of the decision rectangle,
    which gives the optimizer a known ground-truth critical region.
    """

    def __init__(self, rect=(8, 8, 16, 16), threshold: float = 0.5):
        x0, y0, x1, y1 = rect
        if x1 <= x0 or y1 <= y0:
            raise ConfigInvalid(f"degenerate rectangle {rect}")
        self.rect = (int(x0), int(y0), int(x1), int(y1))
        self.threshold = float(threshold)
        self.class_count = 2

    def _region_mean(self, img: ImageBuffer) -> float:
        x0, y0, x1, y1 = self.rect
        region = img.pixels[y0:y1, x0:x1]
        if region.size == 0:
            raise DimensionMismatch(
                f"rectangle {self.rect} lies outside {img.height}x{img.width} image"
            )
        return float(region.mean())

    def classify(self, images) -> list:
        if not images:
            raise ValueError("images must be non-empty")
        results = []
        for img in images:
            margin = self._region_mean(img) - self.threshold
            s = _SYNTHETIC_LOGIT_SCALE
            results.append(ClassScores.from_logits([-margin * s, margin * s]))
        return results

    def gradcam(self, image: ImageBuffer, target_class: int) -> Heatmap:
        if not 0 <= target_class < self.class_count:
            raise ClassOutOfRange(f"class {target_class} not in [0,{self.class_count})")
        x0, y0, x1, y1 = self.rect
        raw = np.zeros((image.height, image.width), dtype=np.float64)
        raw[y0:y1, x0:x1] = 1.0
        return normalize_heatmap(raw)


class HttpOracle:
    """Client for the sidecar wire protocol (base64 PNG in, JSON out)."""

    def __init__(self, endpoint: str, class_count: int, timeout_ms: int = 30000):
        self.endpoint = endpoint.rstrip("/")
        self.class_count = int(class_count)
        self.timeout = timeout_ms / 1000.0
        self._session = requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._session.post(
                self.endpoint + path, json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise OracleUnreachable(f"POST {path}: {exc}") from exc
        if resp.status_code == 422:
            raise ClassOutOfRange(_error_message(resp))
        if resp.status_code != 200:
            raise ProtocolError(f"POST {path}: HTTP {resp.status_code}: {_error_message(resp)}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"POST {path}: non-JSON response") from exc

    def classify(self, images) -> list:
        if not images:
            raise ValueError("images must be non-empty")
        payload = {
            "images": [base64.b64encode(encode_png(img)).decode("ascii") for img in images]
        }
        body = self._post("/v1/classify", payload)
        try:
            results = body["results"]
            scores = [
                ClassScores(logits=tuple(float(v) for v in entry["logits"]),
                            top1=int(entry["top1"]))
                for entry in results
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed classify response: {exc}") from exc
        if len(scores) != len(images):
            raise ProtocolError(
                f"expected {len(images)} results, got {len(scores)}"
            )
        for s in scores:
            if len(s.logits) != self.class_count:
                raise ShapeMismatch(
                    f"expected {self.class_count} logits, got {len(s.logits)}"
                )
        return scores

    def gradcam(self, image: ImageBuffer, target_class: int) -> Heatmap:
        if not 0 <= target_class < self.class_count:
            raise ClassOutOfRange(f"class {target_class} not in [0,{self.class_count})")
        payload = {
            "image": base64.b64encode(encode_png(image)).decode("ascii"),
            "target_class": int(target_class),
        }
        body = self._post("/v1/gradcam", payload)
        try:
            w, h = int(body["width"]), int(body["height"])
            values = np.asarray(body["values"], dtype=np.float64).reshape(h, w)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed gradcam response: {exc}") from exc
        if (h, w) != (image.height, image.width):
            raise ProtocolError(
                f"heatmap {h}x{w} does not match image {image.height}x{image.width}"
            )
        try:
            return Heatmap(values=values)
        except ValueError as exc:
            raise ProtocolError(str(exc)) from exc


def _error_message(resp) -> str:
    try:
        return str(resp.json().get("error", resp.text))
    except ValueError:
        return resp.text


@dataclass(frozen=True)
class OracleConfig:
    """Either a synthetic rule or a remote endpoint, never both."""

    mode: str  # "synthetic" | "http"
    rect: tuple = (8, 8, 16, 16)
    threshold: float = 0.5
    endpoint: str = ""
    class_count: int = 2
    timeout_ms: int = 30000

    @classmethod
    def from_dict(cls, data: dict) -> "OracleConfig":
        if not isinstance(data, dict) or "mode" not in data:
            raise ConfigInvalid("oracle config must be an object with a 'mode'")
        mode = data["mode"]
        if mode == "synthetic":
            allowed = {"mode", "rect", "threshold"}
        elif mode == "http":
            allowed = {"mode", "endpoint", "class_count", "timeout_ms"}
            if not data.get("endpoint"):
                raise ConfigInvalid("http oracle config requires an 'endpoint'")
        else:
            raise ConfigInvalid(f"unknown oracle mode {mode!r}")
        unknown = set(data) - allowed
        if unknown:
            raise ConfigInvalid(f"unknown oracle config fields: {sorted(unknown)}")
        try:
            if mode == "synthetic":
                return cls(mode="synthetic",
                           rect=tuple(data.get("rect", (8, 8, 16, 16))),
                           threshold=float(data.get("threshold", 0.5)))
            return cls(mode="http",
                       endpoint=str(data["endpoint"]),
                       class_count=int(data.get("class_count", 2)),
                       timeout_ms=int(data.get("timeout_ms", 30000)))
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc

    def build(self):
        if self.mode == "synthetic":
            return SyntheticOracle(rect=self.rect, threshold=self.threshold)
        return HttpOracle(endpoint=self.endpoint, class_count=self.class_count,
                          timeout_ms=self.timeout_ms)
