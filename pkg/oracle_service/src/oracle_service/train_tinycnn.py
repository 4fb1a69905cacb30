"""Train the bundled tinycnn checkpoint on the bright-square task.

The task: 64x64 noisy images where class 1 means the mean intensity of
the fixed square [24,40)^2 exceeds 0.6. This mirrors the kind of
region-sensitive decision rule raindrop perturbations degrade, so the
model makes a useful desk-scale victim with a meaningful Grad-CAM.

Run: python -m oracle_service.train_tinycnn --out <path>
"""

from __future__ import annotations

import argparse

import numpy as np
import torch
from scipy.ndimage import gaussian_filter
from torch import nn

from .models import TinyCnn

RECT = (24, 24, 40, 40)
THRESHOLD = 0.6


def make_batch(rng: np.random.Generator, count: int):
    """Noisy backgrounds with a variably bright square; half the samples
    are additionally smeared by a random Gaussian blur so the label keeps
    tracking the square's *current* mean even far off the crisp manifold
    (raindrop perturbations live there)."""
    x0, y0, x1, y1 = RECT
    images = rng.uniform(0.0, 0.25, (count, 64, 64)).astype(np.float32)
    fill = rng.uniform(0.0, 1.0, count).astype(np.float32)
    noise = rng.uniform(-0.1, 0.1, (count, y1 - y0, x1 - x0)).astype(np.float32)
    for i in range(count):
        images[i, y0:y1, x0:x1] = np.clip(fill[i] + noise[i], 0.0, 1.0)
        if rng.random() < 0.5:
            sigma = float(np.exp(rng.uniform(np.log(1.0), np.log(25.0))))
            images[i] = gaussian_filter(images[i], sigma, mode="nearest")
    labels = (images[:, y0:y1, x0:x1].mean(axis=(1, 2)) > THRESHOLD).astype(np.int64)
    batch = torch.from_numpy(images)[:, None].repeat(1, 3, 1, 1)
    return batch, torch.from_numpy(labels)


def train(seed: int = 0, steps: int = 400, batch_size: int = 64) -> TinyCnn:
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    model = TinyCnn()
    optimizer = torch.optim.Adam(model.parameters(), lr=1e-3)
    loss_fn = nn.CrossEntropyLoss()
    model.train()
    for step in range(steps):
        x, y = make_batch(rng, batch_size)
        optimizer.zero_grad()
        loss = loss_fn(model(x), y)
        loss.backward()
        optimizer.step()
        if (step + 1) % 100 == 0:
            print(f"step {step + 1}: loss {loss.item():.4f}")
    model.eval()
    x, y = make_batch(rng, 512)
    with torch.no_grad():
        acc = (model(x).argmax(dim=1) == y).float().mean().item()
    print(f"holdout accuracy: {acc:.3f}")
    if acc < 0.97:
        raise SystemExit(f"training failed to converge (accuracy {acc:.3f})")
    return model


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="checkpoint output path")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--steps", type=int, default=400)
    args = parser.parse_args(argv)
    model = train(seed=args.seed, steps=args.steps)
    torch.save(model.state_dict(), args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
