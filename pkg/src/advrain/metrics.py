"""Quantitative evaluation: SSIM, accuracy, attack success rate, and the
per-class / sweep reports.

SSIM follows the original single-scale definition: 11x11 Gaussian window
(sigma 1.5), C1 = (0.01 L)^2 and C2 = (0.03 L)^2 with L = 1 for the
normalized intensity range, local statistics on valid windows only.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .imagecore import ImageBuffer
from .render import RaindropPattern, render

__all__ = ["ssim", "EvalReport", "evaluate", "sweep_csv", "SWEEP_HEADER"]

_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_SSIM_C1 = (0.01 * 1.0) ** 2
_SSIM_C2 = (0.03 * 1.0) ** 2


def _ssim_window(size: int = _SSIM_WINDOW, sigma: float = _SSIM_SIGMA) -> np.ndarray:
    offs = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    taps = np.exp(-(offs ** 2) / (2.0 * sigma ** 2))
    taps /= taps.sum()
    return taps


def _filter_valid(plane: np.ndarray, taps: np.ndarray) -> np.ndarray:
    win = np.lib.stride_tricks.sliding_window_view(plane, len(taps), axis=0)
    out = np.tensordot(win, taps, axes=([-1], [0]))
    win = np.lib.stride_tricks.sliding_window_view(out, len(taps), axis=1)
    return np.tensordot(win, taps, axes=([-1], [0]))


def ssim(a: ImageBuffer, b: ImageBuffer,
         c1: float = _SSIM_C1, c2: float = _SSIM_C2) -> float:
    """Mean single-scale SSIM over valid windows, averaged over channels."""
    if not a.same_shape(b):
        raise DimensionMismatch(f"shape {a.pixels.shape} vs {b.pixels.shape}")
    if a.height < _SSIM_WINDOW or a.width < _SSIM_WINDOW:
        raise DimensionMismatch(
            f"images must be at least {_SSIM_WINDOW}x{_SSIM_WINDOW} for SSIM"
        )
    taps = _ssim_window()
    scores = []
    for c in range(a.channels):
        x = a.pixels[:, :, c]
        y = b.pixels[:, :, c]
        mu_x = _filter_valid(x, taps)
        mu_y = _filter_valid(y, taps)
        xx = _filter_valid(x * x, taps) - mu_x * mu_x
        yy = _filter_valid(y * y, taps) - mu_y * mu_y
        xy = _filter_valid(x * y, taps) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (xx + yy + c2)
        scores.append(np.mean(num / den))
    return float(np.mean(scores))


@dataclass(frozen=True)
class EvalReport:
    overall_accuracy: float  # adversarial accuracy over the whole set
    clean_accuracy: float
    attack_success_rate: float  # fraction of initially-correct images that flip
    per_class: dict  # class index -> {"count", "clean_acc", "adv_acc"}
    mean_ssim: float

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "clean_accuracy": self.clean_accuracy,
            "attack_success_rate": self.attack_success_rate,
            "per_class": {
                str(k): dict(v) for k, v in sorted(self.per_class.items())
            },
            "mean_ssim": self.mean_ssim,
        }


def evaluate(images, labels, pattern: RaindropPattern, oracle) -> EvalReport:
    """Render the pattern on every image and report accuracy/ASR/SSIM."""
    if not images or len(images) != len(labels):
        raise ValueError("images and labels must be aligned and non-empty")
    clean_scores = oracle.classify(list(images))
    rendered = [render(img, pattern) for img in images]
    adv_scores = oracle.classify(rendered)

    clean_ok = [s.top1 == y for s, y in zip(clean_scores, labels)]
    adv_ok = [s.top1 == y for s, y in zip(adv_scores, labels)]

    n = len(labels)
    clean_acc = sum(clean_ok) / n
    adv_acc = sum(adv_ok) / n
    initially_correct = sum(clean_ok)
    flipped = sum(1 for c, a in zip(clean_ok, adv_ok) if c and not a)
    asr = flipped / initially_correct if initially_correct else 0.0

    per_class = {}
    for label in sorted(set(labels)):
        idx = [i for i, y in enumerate(labels) if y == label]
        per_class[int(label)] = {
            "count": len(idx),
            "clean_acc": sum(clean_ok[i] for i in idx) / len(idx),
            "adv_acc": sum(adv_ok[i] for i in idx) / len(idx),
        }

    mean_ssim = float(np.mean([ssim(img, adv) for img, adv in zip(images, rendered)]))
    return EvalReport(
        overall_accuracy=adv_acc,
        clean_accuracy=clean_acc,
        attack_success_rate=asr,
        per_class=per_class,
        mean_ssim=mean_ssim,
    )


SWEEP_HEADER = ["n_drops", "radius", "clean_acc", "adv_acc", "asr", "mean_ssim"]


def sweep_csv(rows) -> str:
    """Serialize sweep cells; each row is (n, r, EvalReport)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for n, r, report in rows:
        writer.writerow([
            n, r,
            f"{report.clean_accuracy:.6f}",
            f"{report.overall_accuracy:.6f}",
            f"{report.attack_success_rate:.6f}",
            f"{report.mean_ssim:.6f}",
        ])
    return buf.getvalue()
