from .adam import AdamState, adam_init, adam_step
from .checkpoint import load_weights, save_weights
from .layers import (
    SIGMA_MAX,
    SIGMA_MIN,
    ConvLayer,
    DenseHead,
    dense_head_forward,
    depthwise_separable_forward,
    dropout_forward,
    elu_backward,
    elu_forward,
    gaussian_nll,
    sigma_from_raw,
)
from .network import (
    ARCH_PRESETS,
    GaussianParams,
    NetworkWeights,
    forward,
    init_weights,
    loss_and_grads,
    run_combiner,
    run_convolver,
)

__all__ = [
    "ARCH_PRESETS",
    "AdamState",
    "ConvLayer",
    "DenseHead",
    "GaussianParams",
    "NetworkWeights",
    "SIGMA_MAX",
    "SIGMA_MIN",
    "adam_init",
    "adam_step",
    "dense_head_forward",
    "depthwise_separable_forward",
    "dropout_forward",
    "elu_backward",
    "elu_forward",
    "forward",
    "gaussian_nll",
    "init_weights",
    "load_weights",
    "loss_and_grads",
    "run_combiner",
    "run_convolver",
    "save_weights",
    "sigma_from_raw",
]
