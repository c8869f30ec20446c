"""File-based adapter around pretrained cyto-family segmentation models.

Input: a grayscale foil image (PNG or PGM). Output: a label mask in the
exchange format the measurement pipeline ingests (16-bit PGM + JSON sidecar).
No state is shared with the consumer beyond those files.
"""

from .bridge import (
    AUTO,
    MODEL_VARIANTS,
    BridgeConfig,
    InferenceError,
    SetupError,
    bridge_segment,
    run_cellpose,
)
from .maskio import (
    ExchangeError,
    canonicalize,
    read_exchange_mask,
    write_exchange_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AUTO",
    "BridgeConfig",
    "ExchangeError",
    "InferenceError",
    "MODEL_VARIANTS",
    "SetupError",
    "bridge_segment",
    "canonicalize",
    "read_exchange_mask",
    "run_cellpose",
    "write_exchange_mask",
]
