"""Dense network core with mode-aware normalization."""

from bnlab.nn.bn import (
    BatchNormState,
    BnMode,
    LayerNormState,
    bn_backward,
    bn_forward,
    ln_backward,
    ln_forward,
    steps_to_converge,
)
from bnlab.nn.net import DenseLayer, DenseNet, mlp, net_backward, net_forward
from bnlab.nn.optim import AdamOptimizer, SgdOptimizer, make_optimizer

__all__ = [
    "AdamOptimizer",
    "BatchNormState",
    "BnMode",
    "DenseLayer",
    "DenseNet",
    "LayerNormState",
    "SgdOptimizer",
    "bn_backward",
    "bn_forward",
    "ln_backward",
    "ln_forward",
    "make_optimizer",
    "mlp",
    "net_backward",
    "net_forward",
    "steps_to_converge",
]
