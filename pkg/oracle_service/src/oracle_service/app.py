"""HTTP surface of the sidecar.

Wire protocol (JSON both ways):
  POST /v1/classify  {"images": ["<base64 PNG>", ...]}
      -> {"results": [{"logits": [...], "top1": int}, ...]}
  POST /v1/gradcam   {"image": "<base64 PNG>", "target_class": int}
      -> {"width": int, "height": int, "values": [row-major floats]}
Malformed requests get 400 {"error": str}; class out of range gets 422.
"""

from __future__ import annotations

import base64
import binascii
import threading

import numpy as np
import torch
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .gradcam import gradcam_compute
from .models import ModelSpec, decode_image, preprocess


class ClassifyRequest(BaseModel):
    images: list[str]


class GradcamRequest(BaseModel):
    image: str
    target_class: int


class BadRequest(Exception):
    pass


def _decode(b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise BadRequest(f"invalid base64 image: {exc}")
    try:
        return decode_image(raw)
    except Exception as exc:
        raise BadRequest(f"cannot decode PNG: {exc}")


def create_app(spec: ModelSpec, gradcam_layer: str | None = None) -> FastAPI:
    app = FastAPI(title="oracle-service")
    # torch autograd state is per-process; serialize inference
    lock = threading.Lock()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(_request: Request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(BadRequest)
    async def on_bad_request(_request: Request, exc):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/v1/classify")
    def classify(req: ClassifyRequest):
        if not req.images:
            raise BadRequest("images must be non-empty")
        arrays = [_decode(b64) for b64 in req.images]
        results = []
        with lock, torch.no_grad():
            for arr in arrays:
                logits = spec.model(preprocess(spec, arr))[0].numpy().astype(float)
                results.append({
                    "logits": [float(v) for v in logits],
                    "top1": int(np.argmax(logits)),  # ties to lowest index
                })
        return {"results": results}

    @app.post("/v1/gradcam")
    def gradcam(req: GradcamRequest):
        if not 0 <= req.target_class < spec.class_count:
            return JSONResponse(
                status_code=422,
                content={"error": f"class {req.target_class} not in "
                                  f"[0,{spec.class_count})"})
        arr = _decode(req.image)
        with lock:
            values = gradcam_compute(spec, arr, req.target_class, gradcam_layer)
        h, w = values.shape
        return {"width": w, "height": h,
                "values": [float(v) for v in values.reshape(-1)]}

    return app
