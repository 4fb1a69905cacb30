"""Grad-CAM over a hooked convolutional layer."""

from __future__ import annotations

import numpy as np
import torch

from .models import ModelSpec, preprocess, resolve_layer


def gradcam_compute(spec: ModelSpec, image: np.ndarray, target_class: int,
                    layer_name: str | None = None) -> np.ndarray:
    """Heatmap of the target-class score at the request image's size.

    Channel weights are the spatial mean of the gradients at the hooked
    layer; the weighted activation sum is clipped at zero, upsampled
    bilinearly, and normalized to max 1 (or all zeros).
    """
    if not 0 <= target_class < spec.class_count:
        raise IndexError(f"class {target_class} not in [0,{spec.class_count})")
    layer = resolve_layer(spec.model, layer_name or spec.gradcam_layer)

    captured = {}

    def fwd_hook(_module, _inputs, output):
        captured["activations"] = output
        output.retain_grad()

    handle = layer.register_forward_hook(fwd_hook)
    try:
        spec.model.zero_grad(set_to_none=True)
        x = preprocess(spec, image).requires_grad_(True)
        logits = spec.model(x)
        logits[0, target_class].backward()
    finally:
        handle.remove()

    activations = captured["activations"]
    grads = activations.grad
    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam = torch.relu((weights * activations).sum(dim=1, keepdim=True))
    h, w = image.shape[:2]
    cam = torch.nn.functional.interpolate(
        cam, size=(h, w), mode="bilinear", align_corners=False)
    cam = cam[0, 0].detach().numpy().astype(np.float64)
    peak = cam.max()
    if peak > 0:
        cam = cam / peak
    return np.clip(cam, 0.0, 1.0)
