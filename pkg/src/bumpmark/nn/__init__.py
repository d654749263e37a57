from .ops import conv2d_forward, conv2d_backward, maxpool2_forward, maxpool2_backward, relu_forward, relu_backward, mse_loss
from .adam import AdamState, adam_step
from .model import ConfidenceNet, save_weights, load_weights

__all__ = [
    "conv2d_forward",
    "conv2d_backward",
    "maxpool2_forward",
    "maxpool2_backward",
    "relu_forward",
    "relu_backward",
    "mse_loss",
    "AdamState",
    "adam_step",
    "ConfidenceNet",
    "save_weights",
    "load_weights",
]
