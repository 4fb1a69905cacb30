"""Victim-model zoo: architectures, preprocessing, and Grad-CAM layers.

Every entry maps PNG bytes to a normalized tensor of the model's input
size; the service owns all resizing/normalization so clients can send
images at native resolution.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from importlib import resources

import numpy as np
import torch
from PIL import Image
from torch import nn


@dataclass(frozen=True)
class ModelSpec:
    name: str
    model: nn.Module
    class_count: int
    input_size: int
    mean: tuple
    std: tuple
    gradcam_layer: str  # dotted module path of the conv block to hook


class TinyCnn(nn.Module):
    """Small CNN trained on the bright-square task (see train_tinycnn.py)."""

    def __init__(self, class_count: int = 2):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(3, 16, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(16, 32, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(2),
            nn.Conv2d(32, 32, 3, padding=1),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(32, class_count)

    def forward(self, x):
        x = self.features(x)
        x = self.pool(x).flatten(1)
        return self.head(x)


def default_tinycnn_weights():
    return resources.files("oracle_service") / "weights" / "tinycnn.pt"


def build_model(name: str, weights_path=None) -> ModelSpec:
    if name == "tinycnn":
        model = TinyCnn()
        path = weights_path or default_tinycnn_weights()
        state = torch.load(str(path), map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        spec = ModelSpec(name=name, model=model, class_count=2, input_size=64,
                         mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0),
                         gradcam_layer="features.6")
    elif name in ("resnet34", "vgg19"):
        from torchvision import models as tv
        arch = {"resnet34": tv.resnet34, "vgg19": tv.vgg19}[name]
        model = arch(weights=None, num_classes=1000)
        if weights_path is None:
            raise ValueError(f"{name} requires --weights (no bundled checkpoint)")
        state = torch.load(str(weights_path), map_location="cpu", weights_only=True)
        model.load_state_dict(state)
        layer = "layer4" if name == "resnet34" else "features.34"
        spec = ModelSpec(name=name, model=model, class_count=1000, input_size=224,
                         mean=(0.485, 0.456, 0.406), std=(0.229, 0.224, 0.225),
                         gradcam_layer=layer)
    else:
        raise ValueError(f"unknown model {name!r}")
    spec.model.eval()
    return spec


def decode_image(png: bytes) -> np.ndarray:
    """PNG bytes to an (h, w, 3) float array in [0,1]."""
    im = Image.open(io.BytesIO(png))
    im.load()
    if im.mode not in ("L", "LA", "RGB", "RGBA"):
        im = im.convert("RGB")
    arr = np.asarray(im, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[2] in (2, 4):  # composite alpha over black
        arr = arr[:, :, :-1] * arr[:, :, -1:]
    if arr.shape[2] == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr


def preprocess(spec: ModelSpec, arr: np.ndarray) -> torch.Tensor:
    """(h, w, 3) array to a normalized 1x3xSxS input batch."""
    x = torch.from_numpy(np.ascontiguousarray(arr)).permute(2, 0, 1)[None]
    size = spec.input_size
    x = torch.nn.functional.interpolate(
        x, size=(size, size), mode="bilinear", align_corners=False)
    mean = torch.tensor(spec.mean).view(1, 3, 1, 1)
    std = torch.tensor(spec.std).view(1, 3, 1, 1)
    return (x - mean) / std


def resolve_layer(model: nn.Module, dotted: str) -> nn.Module:
    module = model
    for part in dotted.split("."):
        module = getattr(module, part) if not part.isdigit() else module[int(part)]
    return module
