"""Run a pretrained cyto-family segmentation model on one image and write the
result in the exchange format.

The adapter is strictly file-based: image path in, ``<prefix>.pgm`` +
``<prefix>.mask.json`` out. The model runner is injectable so the packaging,
file handling, and canonicalization can be exercised without model weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .maskio import load_input_image, write_exchange_mask

AUTO = "auto"

MODEL_VARIANTS = ("cyto1", "cyto2", "cyto3")

# published model-registry names for each variant
_MODEL_TYPE = {"cyto1": "cyto", "cyto2": "cyto2", "cyto3": "cyto3"}

_INSTALL_HINT = (
    "cellpose is not installed; run `pip install cellpose` (first use downloads "
    "the pretrained weights automatically)"
)


class SetupError(RuntimeError):
    """Model or weights unavailable; message carries the remedy."""


class InferenceError(RuntimeError):
    """The model ran but failed to produce a mask."""


@dataclass(frozen=True)
class BridgeConfig:
    model_variant: str
    input_path: str
    output_prefix: str
    expected_cell_diameter: float | str = AUTO

    def __post_init__(self):
        if self.model_variant not in MODEL_VARIANTS:
            raise ValueError(f"model_variant must be one of {MODEL_VARIANTS}")
        if self.expected_cell_diameter != AUTO:
            d = float(self.expected_cell_diameter)
            if d <= 0:
                raise ValueError("expected_cell_diameter must be positive or 'auto'")


def run_cellpose(image: np.ndarray, variant: str, diameter: float | None) -> np.ndarray:
    """Default model runner; imports cellpose lazily."""
    try:
        from cellpose import models
    except ImportError as exc:
        raise SetupError(_INSTALL_HINT) from exc
    try:
        if hasattr(models, "Cellpose"):
            model = models.Cellpose(model_type=_MODEL_TYPE[variant])
        else:
            model = models.CellposeModel(model_type=_MODEL_TYPE[variant])
    except Exception as exc:
        raise SetupError(
            f"could not initialize model '{variant}' (weights missing?): {exc}"
        ) from exc
    try:
        out = model.eval(image, diameter=diameter, channels=[0, 0])
    except Exception as exc:
        raise InferenceError(f"model '{variant}' inference failed: {exc}") from exc
    masks = out[0] if isinstance(out, (tuple, list)) else out
    return np.asarray(masks)


def bridge_segment(config: BridgeConfig, run_model=None) -> tuple[Path, Path]:
    """Segment one image and emit exchange files; returns (mask, sidecar) paths."""
    image = load_input_image(config.input_path)
    diameter = (
        None if config.expected_cell_diameter == AUTO
        else float(config.expected_cell_diameter)
    )
    runner = run_model if run_model is not None else run_cellpose
    labels = runner(image, config.model_variant, diameter)
    labels = np.asarray(labels)
    if labels.shape != image.shape:
        raise InferenceError(
            f"model returned a {labels.shape} mask for a {image.shape} image"
        )
    return write_exchange_mask(
        labels,
        config.output_prefix,
        backend_name=config.model_variant,
        source_image=str(config.input_path),
    )
