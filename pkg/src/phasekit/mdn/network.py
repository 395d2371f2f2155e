"""Network assembly: weight container, presets, forward pass, and full backprop.

The architecture is fixed in form -- an input dropout, a chain of
depthwise-separable 5x5 conv + ELU stages, and a per-pixel dense head
producing (mu_r, mu_i, s_r, s_i) -- with configurable channel counts.
The patch size a network consumes equals its receptive field,
1 + n_convs * (kernel - 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import layers
from .layers import ConvLayer, DenseHead

ARCH_PRESETS = {
    "desk": (16, 16, 8, 8, 8),
    "paper": (512, 256, 128, 64, 32),
}

HEAD_OUTPUTS = 4  # mu_r, mu_i, s_r, s_i


@dataclass(frozen=True)
class GaussianParams:
    """Predicted center-pixel distribution; scalars or aligned arrays."""

    mu_r: np.ndarray
    mu_i: np.ndarray
    sigma_r: np.ndarray
    sigma_i: np.ndarray


@dataclass
class NetworkWeights:
    convs: list[ConvLayer]
    head: DenseHead
    kernel: int = 5
    elu_alpha: float = 1.0
    dropout_rate: float = 0.5

    @property
    def patch_size(self) -> int:
        return 1 + len(self.convs) * (self.kernel - 1)

    @property
    def in_channels(self) -> int:
        return self.convs[0].depthwise.shape[2]

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(layer.pointwise.shape[1] for layer in self.convs)

    @property
    def dtype(self):
        return self.convs[0].depthwise.dtype

    def tensors(self) -> list[np.ndarray]:
        """All learnable arrays in declaration order; aliases, not copies."""
        out = []
        for layer in self.convs:
            out.extend([layer.depthwise, layer.pointwise, layer.bias])
        out.extend([self.head.weight, self.head.bias])
        return out

    def astype(self, dtype) -> "NetworkWeights":
        convs = [
            ConvLayer(l.depthwise.astype(dtype), l.pointwise.astype(dtype), l.bias.astype(dtype))
            for l in self.convs
        ]
        head = DenseHead(self.head.weight.astype(dtype), self.head.bias.astype(dtype))
        return NetworkWeights(convs, head, self.kernel, self.elu_alpha, self.dropout_rate)

    def copy(self) -> "NetworkWeights":
        return self.astype(self.dtype)


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def init_weights(channels=ARCH_PRESETS["desk"], in_channels: int = 2, kernel: int = 5,
                 seed: int = 0, dtype=np.float32, elu_alpha: float = 1.0,
                 dropout_rate: float = 0.5) -> NetworkWeights:
    """Glorot-uniform kernels, zero biases; deterministic per seed."""
    rng = np.random.Generator(np.random.PCG64(seed))
    convs = []
    c_in = in_channels
    for c_out in channels:
        k2 = kernel * kernel
        convs.append(ConvLayer(
            depthwise=_glorot(rng, (kernel, kernel, c_in), k2, k2, dtype),
            pointwise=_glorot(rng, (c_in, c_out), c_in, c_out, dtype),
            bias=np.zeros(c_out, dtype=dtype),
        ))
        c_in = c_out
    head = DenseHead(
        weight=_glorot(rng, (c_in, HEAD_OUTPUTS), c_in, HEAD_OUTPUTS, dtype),
        bias=np.zeros(HEAD_OUTPUTS, dtype=dtype),
    )
    return NetworkWeights(convs, head, kernel, elu_alpha, dropout_rate)


def run_convolver(weights: NetworkWeights, x: np.ndarray, cache: list | None = None) -> np.ndarray:
    """All conv + ELU stages. x is NHWC; spatial dims shrink by kernel-1 per stage."""
    if x.ndim != 4 or x.shape[3] != weights.in_channels:
        raise ShapeError(f"expected NHWC input with {weights.in_channels} channels, got {x.shape}")
    out = x
    for layer in weights.convs:
        dw_out = layers.depthwise_forward(out, layer.depthwise)
        pw_out = layers.pointwise_forward(dw_out, layer.pointwise, layer.bias)
        if cache is not None:
            cache.append((out, dw_out, pw_out))
        out = layers.elu_forward(pw_out, weights.elu_alpha)
    return out


def run_combiner(weights: NetworkWeights, features: np.ndarray) -> GaussianParams:
    """Dense head + sigma transform applied to (..., c_last) feature vectors."""
    raw = layers.dense_head_forward(features, weights.head)
    return GaussianParams(
        mu_r=raw[..., 0],
        mu_i=raw[..., 1],
        sigma_r=layers.sigma_from_raw(raw[..., 2]),
        sigma_i=layers.sigma_from_raw(raw[..., 3]),
    )


def forward(weights: NetworkWeights, x: np.ndarray, *, train: bool = False,
            dropout_seed: int = 0) -> GaussianParams:
    """Patch-batch forward; x is (N, p, p, 2) with p = weights.patch_size.

    Returns per-sample GaussianParams (arrays of length N). Dropout fires
    only when train=True.
    """
    if x.shape[1] != weights.patch_size or x.shape[2] != weights.patch_size:
        raise ShapeError(f"expected {weights.patch_size}x{weights.patch_size} patches, got {x.shape}")
    h, _ = layers.dropout_forward(x, weights.dropout_rate, train, dropout_seed)
    feats = run_convolver(weights, h)
    params = run_combiner(weights, feats)
    return GaussianParams(
        mu_r=params.mu_r[:, 0, 0], mu_i=params.mu_i[:, 0, 0],
        sigma_r=params.sigma_r[:, 0, 0], sigma_i=params.sigma_i[:, 0, 0],
    )


def loss_and_grads(weights: NetworkWeights, x: np.ndarray, targets: np.ndarray, *,
                   train: bool = True, dropout_seed: int = 0):
    """Batch-mean NLL and its exact gradients for every tensor.

    targets is (N, 2) -- the unit phasor of each patch's held-out center.
    Returns (loss, grads) with grads ordered like weights.tensors().
    """
    n = x.shape[0]
    if targets.shape != (n, 2):
        raise ShapeError(f"targets must be ({n}, 2), got {targets.shape}")

    dropped, _ = layers.dropout_forward(x, weights.dropout_rate, train, dropout_seed)
    cache = []
    feats = run_convolver(weights, dropped, cache)
    if feats.shape[1] != 1 or feats.shape[2] != 1:
        raise ShapeError(f"patch does not reduce to 1x1 features, got {feats.shape}")
    raw = layers.dense_head_forward(feats, weights.head)  # (N,1,1,4)

    r = raw.reshape(n, HEAD_OUTPUTS)
    mu_r, mu_i = r[:, 0], r[:, 1]
    s_r, s_i = r[:, 2], r[:, 3]
    sigma_r = layers.sigma_from_raw(s_r)
    sigma_i = layers.sigma_from_raw(s_i)
    t_r, t_i = targets[:, 0], targets[:, 1]

    per_sample = layers.gaussian_nll(mu_r, mu_i, sigma_r, sigma_i, t_r, t_i)
    loss = float(np.mean(per_sample, dtype=np.float64))

    dmu_r, dmu_i, dsig_r, dsig_i = layers.gaussian_nll_grads(mu_r, mu_i, sigma_r, sigma_i, t_r, t_i)
    inv_n = 1.0 / n
    draw = np.empty_like(r)
    draw[:, 0] = dmu_r * inv_n
    draw[:, 1] = dmu_i * inv_n
    draw[:, 2] = dsig_r * sigma_r * layers.sigma_grad_mask(s_r) * inv_n
    draw[:, 3] = dsig_i * sigma_i * layers.sigma_grad_mask(s_i) * inv_n
    draw = draw.reshape(raw.shape)

    dw_head, db_head, dfeats = layers.dense_head_backward(feats, weights.head, draw)

    grads: list[np.ndarray] = [dw_head, db_head]
    dout = dfeats
    for layer, (x_in, dw_out, pw_out) in zip(reversed(weights.convs), reversed(cache)):
        dout = layers.elu_backward(pw_out, dout, weights.elu_alpha)
        dpw, dbias, dout = layers.pointwise_backward(dw_out, layer.pointwise, dout)
        ddw, dout = layers.depthwise_backward(x_in, layer.depthwise, dout)
        grads = [ddw, dpw, dbias] + grads
    return loss, grads
