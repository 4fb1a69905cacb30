"""Model-serving sidecar: CNN classification and Grad-CAM over HTTP."""

from .app import create_app
from .models import ModelSpec, TinyCnn, build_model

__version__ = "0.1.0"
