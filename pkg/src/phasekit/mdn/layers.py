"""Primitive layers with hand-derived backward passes.

Feature maps are NHWC float arrays. Convolutions are valid (no padding),
so each 5x5 stage shrinks the spatial dims by 4. Every backward here is
checked against central finite differences in the test suite; change the
math only together with those tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError

SIGMA_MIN = 1e-3
SIGMA_MAX = 1.0
LOG_SIGMA_MIN = float(np.log(SIGMA_MIN))
LOG_SIGMA_MAX = float(np.log(SIGMA_MAX))
LOG_TWO_PI = float(np.log(2.0 * np.pi))


def depthwise_forward(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """One k x k kernel per channel: out[n,h,w,c] = sum_ij K[i,j,c] x[n,h+i,w+j,c].

    einsum over a strided window view: no materialized copies, and the
    per-element reduction order is fixed, so identical values give
    identical sums regardless of how the input was sliced.
    """
    k = kernel.shape[0]
    if x.ndim != 4 or x.shape[3] != kernel.shape[2]:
        raise ShapeError(f"depthwise input {x.shape} incompatible with kernel {kernel.shape}")
    if x.shape[1] < k or x.shape[2] < k:
        raise ShapeError(f"spatial dims {x.shape[1]}x{x.shape[2]} smaller than kernel {k}")
    windows = sliding_window_view(x, (k, k), axis=(1, 2))
    return np.einsum("nhwcij,ijc->nhwc", windows, kernel)


def depthwise_backward(x: np.ndarray, kernel: np.ndarray, dout: np.ndarray):
    """Returns (dkernel, dx); dkernel accumulated in float64.

    dx is the full correlation of the upstream gradient with the flipped
    kernel, realised by zero-padding dout by k-1 on each side.
    """
    k = kernel.shape[0]
    windows = sliding_window_view(x, (k, k), axis=(1, 2))
    dkernel = np.einsum("nhwcij,nhwc->ijc", windows, dout, dtype=np.float64)
    pad = k - 1
    dpad = np.pad(dout, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    dwindows = sliding_window_view(dpad, (k, k), axis=(1, 2))
    dx = np.einsum("nhwcij,ijc->nhwc", dwindows, kernel[::-1, ::-1, :])
    return dkernel.astype(kernel.dtype), dx


def pointwise_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """1x1 convolution mixing channels: out = x @ weight + bias."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"pointwise input {x.shape} incompatible with weight {weight.shape}")
    return x @ weight + bias


def pointwise_backward(x: np.ndarray, weight: np.ndarray, dout: np.ndarray):
    """Returns (dweight, dbias, dx); reductions over batch/pixels in float64."""
    dx = dout @ weight.T
    flat_x = x.reshape(-1, x.shape[-1]).astype(np.float64)
    flat_d = dout.reshape(-1, dout.shape[-1]).astype(np.float64)
    dweight = flat_x.T @ flat_d
    dbias = flat_d.sum(axis=0)
    return dweight.astype(weight.dtype), dbias.astype(weight.dtype), dx


@dataclass(frozen=True)
class ConvLayer:
    """Depthwise-separable stage: per-channel k x k kernels, then 1x1 mix + bias."""

    depthwise: np.ndarray   # (k, k, c_in)
    pointwise: np.ndarray   # (c_in, c_out)
    bias: np.ndarray        # (c_out,)


def depthwise_separable_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    return pointwise_forward(depthwise_forward(x, layer.depthwise), layer.pointwise, layer.bias)


def elu_forward(x: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    """y = x for x >= 0, alpha*(e^x - 1) otherwise; outputs bounded below by -alpha."""
    # clipping the exp argument at 0 keeps the dead branch overflow-free
    neg = alpha * np.expm1(np.minimum(x, 0.0))
    return np.where(x >= 0, x, neg.astype(x.dtype))


def elu_backward(x: np.ndarray, dout: np.ndarray, alpha: float = 1.0) -> np.ndarray:
    neg = alpha * np.exp(np.minimum(x, 0.0))
    return dout * np.where(x >= 0, np.ones((), dtype=x.dtype), neg.astype(x.dtype))


def dropout_mask(shape, rate: float, seed: int) -> np.ndarray:
    """Boolean keep-mask; each activation survives independently with prob 1-rate."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.random(shape) >= rate


def dropout_forward(x: np.ndarray, rate: float, training: bool, seed: int = 0):
    """Inverted dropout: scale survivors by 1/(1-rate) so expectations match.

    Returns (y, mask); mask is None when the layer is a no-op.
    """
    if not (0.0 <= rate < 1.0):
        raise ShapeError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x, None
    mask = dropout_mask(x.shape, rate, seed)
    scale = np.asarray(1.0 / (1.0 - rate), dtype=x.dtype)
    return np.where(mask, x * scale, np.zeros((), dtype=x.dtype)), mask


def dropout_backward(dout: np.ndarray, mask, rate: float) -> np.ndarray:
    if mask is None:
        return dout
    scale = np.asarray(1.0 / (1.0 - rate), dtype=dout.dtype)
    return np.where(mask, dout * scale, np.zeros((), dtype=dout.dtype))


@dataclass(frozen=True)
class DenseHead:
    """Per-pixel linear map from the last conv channels to (mu_r, mu_i, s_r, s_i)."""

    weight: np.ndarray  # (c_in, 4)
    bias: np.ndarray    # (4,)


def dense_head_forward(features: np.ndarray, head: DenseHead) -> np.ndarray:
    """Raw head output (..., 4); sigma transform is applied separately."""
    if features.shape[-1] != head.weight.shape[0]:
        raise ShapeError(f"head expects {head.weight.shape[0]} channels, got {features.shape[-1]}")
    return features @ head.weight + head.bias


def dense_head_backward(features: np.ndarray, head: DenseHead, dout: np.ndarray):
    dx = dout @ head.weight.T
    flat_f = features.reshape(-1, features.shape[-1])
    flat_d = dout.reshape(-1, 4)
    dweight = np.einsum("nc,no->co", flat_f, flat_d, dtype=np.float64)
    dbias = np.einsum("no->o", flat_d, dtype=np.float64)
    return dweight.astype(head.weight.dtype), dbias.astype(head.weight.dtype), dx


def sigma_from_raw(s: np.ndarray) -> np.ndarray:
    """sigma = clamp(exp(s), 1e-3, 1), computed as exp of the clipped log."""
    return np.exp(np.clip(s, LOG_SIGMA_MIN, LOG_SIGMA_MAX))


def sigma_grad_mask(s: np.ndarray) -> np.ndarray:
    """1 where the clamp is inactive (d sigma / d s = sigma there), else 0."""
    return ((s > LOG_SIGMA_MIN) & (s < LOG_SIGMA_MAX)).astype(s.dtype)


def gaussian_nll(mu_r, mu_i, sigma_r, sigma_i, t_r, t_i):
    """Per-sample negative log likelihood of an independent bivariate Gaussian.

    E = ln(2 pi) + ln s_R + ln s_I + (t_R - mu_R)^2 / (2 s_R^2)
                                   + (t_I - mu_I)^2 / (2 s_I^2)
    """
    zr = (t_r - mu_r) / sigma_r
    zi = (t_i - mu_i) / sigma_i
    return LOG_TWO_PI + np.log(sigma_r) + np.log(sigma_i) + 0.5 * zr**2 + 0.5 * zi**2


def gaussian_nll_grads(mu_r, mu_i, sigma_r, sigma_i, t_r, t_i):
    """Gradients of the per-sample NLL w.r.t. (mu_r, mu_i, sigma_r, sigma_i)."""
    dmu_r = (mu_r - t_r) / sigma_r**2
    dmu_i = (mu_i - t_i) / sigma_i**2
    dsig_r = (1.0 - ((t_r - mu_r) / sigma_r) ** 2) / sigma_r
    dsig_i = (1.0 - ((t_i - mu_i) / sigma_i) ** 2) / sigma_i
    return dmu_r, dmu_i, dsig_r, dsig_i
