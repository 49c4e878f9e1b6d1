"""Joint twin-branch networks for one-shot recognition and detection."""

from ._jnn import (  # noqa: F401
    Model,
    assign_targets,
    average_precision,
    bce_pair_loss,
    concat_channels,
    conv2d,
    decode_anchor,
    detector,
    encode_anchor,
    generate_synthetic,
    iou,
    leaky_relu,
    linear,
    maxpool2d,
    nms,
    recognizer,
    roc_sweep,
    run_eval,
    run_training,
    set_num_threads,
    sigmoid,
    total_detection_loss,
)

__all__ = [
    "Model",
    "assign_targets",
    "average_precision",
    "bce_pair_loss",
    "concat_channels",
    "conv2d",
    "decode_anchor",
    "detector",
    "encode_anchor",
    "generate_synthetic",
    "iou",
    "leaky_relu",
    "linear",
    "maxpool2d",
    "nms",
    "recognizer",
    "roc_sweep",
    "run_eval",
    "run_training",
    "set_num_threads",
    "sigmoid",
    "total_detection_loss",
]
