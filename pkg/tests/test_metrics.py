import numpy as np
import pytest

from advrain.errors import DimensionMismatch
from advrain.imagecore import ImageBuffer
from advrain.metrics import SWEEP_HEADER, EvalReport, evaluate, ssim, sweep_csv
from advrain.optimizer import full_mask, make_rng, sample_candidate
from advrain.render import RaindropPattern, render

from helpers import attack_scenario, textured_image, ATTACK_RECT, ATTACK_RADIUS


def naive_ssim(a, b, c1=0.01 ** 2, c2=0.03 ** 2, size=11, sigma=1.5):
    """Per-window double-loop SSIM oracle (no separable shortcuts)."""
    offs = np.arange(size) - (size - 1) / 2.0
    taps = np.exp(-(offs ** 2) / (2.0 * sigma ** 2))
    taps /= taps.sum()
    window = np.outer(taps, taps)
    h, w, c = a.pixels.shape
    scores = []
    for ch in range(c):
        x = a.pixels[:, :, ch]
        y = b.pixels[:, :, ch]
        vals = []
        for i in range(h - size + 1):
            for j in range(w - size + 1):
                px = x[i:i + size, j:j + size]
                py = y[i:i + size, j:j + size]
                mx = float((window * px).sum())
                my = float((window * py).sum())
                vx = float((window * px * px).sum()) - mx * mx
                vy = float((window * py * py).sum()) - my * my
                vxy = float((window * px * py).sum()) - mx * my
                num = (2 * mx * my + c1) * (2 * vxy + c2)
                den = (mx * mx + my * my + c1) * (vx + vy + c2)
                vals.append(num / den)
        scores.append(np.mean(vals))
    return float(np.mean(scores))


def half_and_half(n=22):
    a = np.zeros((n, n, 1))
    a[:, n // 2:] = 1.0
    return ImageBuffer(a)


class TestSsim:
    def test_identity_is_exactly_one(self):
        img = textured_image(0, ATTACK_RECT)
        assert ssim(img, img) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a = ImageBuffer(rng.random((16, 16, 1)))
        b = ImageBuffer(rng.random((16, 16, 1)))
        assert abs(ssim(a, b) - ssim(b, a)) <= 1e-9

    def test_one_pixel_shift_detected(self):
        rng = np.random.default_rng(2)
        base = rng.random((17, 17, 1))
        a = ImageBuffer(base[:, :-1])
        b = ImageBuffer(base[:, 1:])
        assert ssim(a, b) < 1.0

    def test_matches_naive_oracle_on_random_pair(self):
        rng = np.random.default_rng(3)
        a = ImageBuffer(rng.random((15, 14, 3)))
        b = ImageBuffer(rng.random((15, 14, 3)))
        assert abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-9

    def test_inverted_binary_halves_score_negative(self):
        x = half_and_half()
        inv = ImageBuffer(1.0 - x.pixels)
        score = ssim(x, inv)
        assert score < 0.0
        assert abs(score - naive_ssim(x, inv)) <= 1e-9

    def test_shape_mismatch_rejected(self):
        a = ImageBuffer(np.zeros((12, 12, 1)))
        b = ImageBuffer(np.zeros((12, 13, 1)))
        with pytest.raises(DimensionMismatch):
            ssim(a, b)

    def test_too_small_rejected(self):
        a = ImageBuffer(np.zeros((8, 8, 1)))
        with pytest.raises(DimensionMismatch):
            ssim(a, a)

    def test_more_drops_never_increase_ssim(self):
        # nested drop prefixes on a fixed corpus: perturbation only grows
        img = textured_image(6, ATTACK_RECT)
        rng = make_rng(99)
        drops = sample_candidate(full_mask(64, 64), 20, 4.0, rng)
        scores = []
        for count in (0, 5, 10, 15, 20):
            pattern = RaindropPattern(image_width=64, image_height=64,
                                      drops=tuple(drops[:count]))
            scores.append(ssim(img, render(img, pattern)))
        assert all(a >= b for a, b in zip(scores, scores[1:]))
        assert scores[0] == 1.0


class AlwaysFlipOracle:
    """Classifies an image as its label only when it is pixel-identical to
    a registered clean image; any rendered change flips the prediction."""

    class_count = 2

    def __init__(self, clean_images, labels):
        self._known = {img.pixels.tobytes(): y for img, y in zip(clean_images, labels)}

    def classify(self, images):
        from advrain.oracle import ClassScores
        out = []
        for img in images:
            label = self._known.get(img.pixels.tobytes())
            if label is None:
                out.append(ClassScores(logits=(1.0, 0.0), top1=0))
            else:
                logits = [0.0, 0.0]
                logits[label] = 1.0
                out.append(ClassScores(logits=tuple(logits), top1=label))
        return out


class TestEvaluate:
    def test_empty_pattern_no_op(self):
        images, labels, oracle = attack_scenario()
        empty = RaindropPattern(image_width=64, image_height=64, drops=())
        report = evaluate(images, labels, empty, oracle)
        assert report.overall_accuracy == report.clean_accuracy
        assert report.attack_success_rate == 0.0
        assert report.mean_ssim == 1.0

    def test_always_flipping_oracle_gives_full_asr(self):
        images, labels, _ = attack_scenario()
        oracle = AlwaysFlipOracle(images, [1, 1])
        from advrain.render import Raindrop
        pattern = RaindropPattern(
            image_width=64, image_height=64,
            drops=(Raindrop(cx=32, cy=32, radius=6.0),))
        report = evaluate(images, [1, 1], pattern, oracle)
        assert report.clean_accuracy == 1.0
        assert report.attack_success_rate == 1.0
        assert report.overall_accuracy == 0.0

    def test_per_class_weighted_mean_identity(self):
        images, labels, oracle = attack_scenario()
        # mislabel one image so the classes differ
        labels = [1, 0]
        from advrain.render import Raindrop
        pattern = RaindropPattern(
            image_width=64, image_height=64,
            drops=(Raindrop(cx=32, cy=32, radius=ATTACK_RADIUS),))
        report = evaluate(images, labels, pattern, oracle)
        total = sum(v["count"] for v in report.per_class.values())
        weighted = sum(v["count"] * v["adv_acc"] for v in report.per_class.values())
        assert total == len(images)
        assert abs(weighted / total - report.overall_accuracy) <= 1e-9

    def test_bookkeeping_bound(self):
        images, labels, oracle = attack_scenario()
        from advrain.render import Raindrop
        pattern = RaindropPattern(
            image_width=64, image_height=64,
            drops=(Raindrop(cx=30, cy=30, radius=9.0),))
        r = evaluate(images, labels, pattern, oracle)
        lower = r.clean_accuracy - r.attack_success_rate * r.clean_accuracy \
            - (1.0 - r.clean_accuracy)
        assert r.overall_accuracy >= lower - 1e-12

    def test_misaligned_inputs_rejected(self):
        images, labels, oracle = attack_scenario()
        empty = RaindropPattern(image_width=64, image_height=64, drops=())
        with pytest.raises(ValueError):
            evaluate(images, labels[:1], empty, oracle)


class TestSweepCsv:
    def report(self, acc):
        return EvalReport(overall_accuracy=acc, clean_accuracy=1.0,
                          attack_success_rate=1.0 - acc, per_class={},
                          mean_ssim=0.75)

    def test_header_and_row_count(self):
        text = sweep_csv([(10, 4.0, self.report(0.5)),
                          (20, 4.0, self.report(0.25))])
        lines = text.strip().split("\n")
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert len(lines) == 3

    def test_row_formatting(self):
        text = sweep_csv([(10, 4.5, self.report(0.5))])
        assert text.strip().split("\n")[1] == \
            "10,4.5,1.000000,0.500000,0.500000,0.750000"

    def test_empty_rows(self):
        assert sweep_csv([]).strip() == ",".join(SWEEP_HEADER)
