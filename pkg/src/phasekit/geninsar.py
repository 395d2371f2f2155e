"""Unsupervised patch training and whole-image inference for the generative filter.

Training draws random 21x21 neighborhoods from noisy phasor fields, zeroes
the center, and fits the center pixel's bivariate Gaussian by NLL descent.
Inference splits the net into a Convolver (all conv stages, run once over
the reflect-padded image) and a Combiner (the dense head, run per pixel in
chunks), so output size matches input size.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ImageTooSmall, InvalidValue, ShapeError, TrainingDiverged
from .grid import CoherenceMap, ComplexField, Patch, PhaseImage, arg_with_fallback, pad_reflect
from .mdn import layers as L
from .mdn.adam import AdamState, adam_init, adam_step
from .mdn.network import ARCH_PRESETS, GaussianParams, NetworkWeights, init_weights, loss_and_grads
from .simulate import counter_normals

# fixed row granularity for conv-stage work items; must not depend on the
# worker count or outputs would vary with --threads
_CONV_ROW_CHUNK = 128


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    patches_per_epoch: int
    patch_size: int = 21
    batch: int = 64
    lr: float = 1e-3
    seed: int = 0
    arch: str = "desk"

    def __post_init__(self):
        if self.patch_size < 5 or self.patch_size % 2 == 0:
            raise InvalidValue(f"patch_size must be odd and >= 5, got {self.patch_size}")
        if self.batch < 1:
            raise InvalidValue(f"batch must be >= 1, got {self.batch}")
        if self.epochs < 0 or self.patches_per_epoch < 0:
            raise InvalidValue("epochs and patches_per_epoch must be >= 0")
        if self.arch not in ARCH_PRESETS:
            raise InvalidValue(f"unknown arch preset {self.arch!r}; options: {sorted(ARCH_PRESETS)}")

    @property
    def channels(self) -> tuple[int, ...]:
        return ARCH_PRESETS[self.arch]

    @property
    def steps_per_epoch(self) -> int:
        return self.patches_per_epoch // self.batch


@dataclass(frozen=True)
class GaussianField:
    """Per-pixel predicted Gaussian over an H x W grid."""

    mu_r: np.ndarray
    mu_i: np.ndarray
    sigma_r: np.ndarray
    sigma_i: np.ndarray

    @property
    def height(self):
        return self.mu_r.shape[0]

    @property
    def width(self):
        return self.mu_r.shape[1]


@dataclass(frozen=True)
class TrainingSample:
    input: Patch
    target: tuple[float, float]

    def __post_init__(self):
        if not self.input.center_zeroed:
            raise InvalidValue("training input patch must be center-zeroed")
        norm = float(np.hypot(self.target[0], self.target[1]))
        if abs(norm - 1.0) > 1e-6:
            raise InvalidValue(f"target must be a unit phasor, |t| = {norm}")


def _stack_fields(images: list[ComplexField], patch_size: int) -> list[np.ndarray]:
    if not images:
        raise InvalidValue("training set is empty")
    stacked = []
    for i, img in enumerate(images):
        if img.height < patch_size or img.width < patch_size:
            raise ImageTooSmall(
                f"image {i} is {img.height}x{img.width}, smaller than patch {patch_size}"
            )
        stacked.append(np.stack([img.real, img.imag], axis=-1))
    return stacked


def _draw_positions(rng, stacked, patch_size, count):
    """(image, row, col) center triples; image uniform, position uniform within."""
    half = patch_size // 2
    idx = rng.integers(0, len(stacked), size=count)
    u_row = rng.random(count)
    u_col = rng.random(count)
    rows = np.empty(count, dtype=np.int64)
    cols = np.empty(count, dtype=np.int64)
    for j, i in enumerate(idx):
        h, w = stacked[i].shape[:2]
        rows[j] = half + int(u_row[j] * (h - 2 * half))
        cols[j] = half + int(u_col[j] * (w - 2 * half))
    return idx, rows, cols


def _gather_batch(stacked, patch_size, idx, rows, cols):
    half = patch_size // 2
    n = len(idx)
    x = np.empty((n, patch_size, patch_size, 2), dtype=np.float32)
    t = np.empty((n, 2), dtype=np.float32)
    for j in range(n):
        img = stacked[idx[j]]
        r, c = rows[j], cols[j]
        x[j] = img[r - half:r + half + 1, c - half:c + half + 1]
        t[j] = x[j, half, half]
        x[j, half, half] = 0.0
    return x, t


def sample_training_patches(images: list[ComplexField], patch_size: int = 21,
                            seed: int = 0, count: int | None = None):
    """Yield center-zeroed TrainingSamples at uniform positions; deterministic per seed."""
    stacked = _stack_fields(images, patch_size)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0))))
    emitted = 0
    while count is None or emitted < count:
        idx, rows, cols = _draw_positions(rng, stacked, patch_size, 1)
        x, t = _gather_batch(stacked, patch_size, idx, rows, cols)
        patch = Patch(x[0, :, :, 0], x[0, :, :, 1], center_zeroed=True)
        yield TrainingSample(input=patch, target=(float(t[0, 0]), float(t[0, 1])))
        emitted += 1


@dataclass
class TrainState:
    """Everything needed to resume a run at an epoch boundary."""

    adam: AdamState
    epoch: int
    global_step: int
    rng_state: dict
    ema: float | None = None


def _copy_adam(state: AdamState) -> AdamState:
    return AdamState(m=[a.copy() for a in state.m], v=[a.copy() for a in state.v],
                     step=state.step, lr=state.lr, beta1=state.beta1,
                     beta2=state.beta2, eps=state.eps)


@dataclass
class TrainResult:
    weights: NetworkWeights
    history: list[tuple[int, float, float]] = field(default_factory=list)  # (step, raw, ema)
    state: TrainState | None = None


def train(images: list[ComplexField], cfg: TrainConfig, *, epoch_hook=None,
          resume: tuple[NetworkWeights, TrainState] | None = None) -> TrainResult:
    """Run the unsupervised NLL training loop.

    epoch_hook(epoch, weights, state) fires after every completed epoch.
    Raises TrainingDiverged (carrying the last good weights) if the loss
    goes non-finite.
    """
    stacked = _stack_fields(images, cfg.patch_size)
    if resume is not None:
        weights, state = resume
        weights = weights.copy()
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = state.rng_state
        start_epoch, global_step, ema = state.epoch, state.global_step, state.ema
        adam = _copy_adam(state.adam)
    else:
        weights = init_weights(cfg.channels, in_channels=2, kernel=5, seed=cfg.seed)
        if weights.patch_size != cfg.patch_size:
            raise ShapeError(
                f"arch receptive field {weights.patch_size} != patch_size {cfg.patch_size}"
            )
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, 0))))
        adam = adam_init(weights.tensors(), lr=cfg.lr)
        start_epoch, global_step, ema = 0, 0, None

    tensors = weights.tensors()
    history: list[tuple[int, float, float]] = []
    last_good = weights.copy()
    total_steps = cfg.epochs * cfg.steps_per_epoch

    for epoch in range(start_epoch, cfg.epochs):
        for _ in range(cfg.steps_per_epoch):
            global_step += 1
            idx, rows, cols = _draw_positions(rng, stacked, cfg.patch_size, cfg.batch)
            x, t = _gather_batch(stacked, cfg.patch_size, idx, rows, cols)
            dropout_seed = np.random.SeedSequence((cfg.seed, 1, global_step))
            loss, grads = loss_and_grads(weights, x, t, train=True, dropout_seed=dropout_seed)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at step {global_step}", last_good=last_good
                )
            ema = loss if ema is None else 0.99 * ema + 0.01 * loss
            adam_step(tensors, grads, adam)
            if global_step % 100 == 0 or global_step == total_steps:
                history.append((global_step, loss, ema))
                last_good = weights.copy()
        if epoch_hook is not None:
            # hand the hook detached copies; training keeps mutating the originals
            state = TrainState(adam=_copy_adam(adam), epoch=epoch + 1, global_step=global_step,
                               rng_state=rng.bit_generator.state, ema=ema)
            epoch_hook(epoch + 1, weights.copy(), state)

    final_state = TrainState(adam=adam, epoch=cfg.epochs, global_step=global_step,
                             rng_state=rng.bit_generator.state, ema=ema)
    return TrainResult(weights=weights, history=history, state=final_state)


def save_train_state(path, state: TrainState) -> None:
    arrays = {f"m{i}": a for i, a in enumerate(state.adam.m)}
    arrays.update({f"v{i}": a for i, a in enumerate(state.adam.v)})
    meta = {
        "step": state.adam.step, "lr": state.adam.lr, "beta1": state.adam.beta1,
        "beta2": state.adam.beta2, "eps": state.adam.eps, "epoch": state.epoch,
        "global_step": state.global_step, "ema": state.ema, "n": len(state.adam.m),
        "rng_state": state.rng_state,
    }
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_train_state(path) -> TrainState:
    with np.load(path) as blob:
        meta = json.loads(bytes(blob["meta"]).decode())
        m = [blob[f"m{i}"] for i in range(meta["n"])]
        v = [blob[f"v{i}"] for i in range(meta["n"])]
    adam = AdamState(m=m, v=v, step=meta["step"], lr=meta["lr"], beta1=meta["beta1"],
                     beta2=meta["beta2"], eps=meta["eps"])
    return TrainState(adam=adam, epoch=meta["epoch"], global_step=meta["global_step"],
                      rng_state=meta["rng_state"], ema=meta["ema"])


def _patch_to_batch(patch: Patch) -> np.ndarray:
    return np.stack([patch.real, patch.imag], axis=-1)[None]


def predict_patchwise(weights: NetworkWeights, patch: Patch) -> GaussianParams:
    """Center-pixel distribution for one patch; dropout disabled."""
    if patch.size != weights.patch_size:
        raise ShapeError(f"patch size {patch.size} != network patch size {weights.patch_size}")
    conv, comb = split_model(weights)
    params = comb(conv(_patch_to_batch(patch)))
    return GaussianParams(
        mu_r=float(params.mu_r[0, 0, 0]), mu_i=float(params.mu_i[0, 0, 0]),
        sigma_r=float(params.sigma_r[0, 0, 0]), sigma_i=float(params.sigma_i[0, 0, 0]),
    )


class Convolver:
    """All conv + ELU stages applied to a whole image (or patch batch)."""

    def __init__(self, weights: NetworkWeights):
        self.weights = weights

    def __call__(self, x: np.ndarray, threads: int = 1) -> np.ndarray:
        """x: (H, W, 2) image or (N, H, W, 2) batch; valid convs shrink dims."""
        squeeze = x.ndim == 3
        if squeeze:
            x = x[None]
        out = x
        for layer in self.weights.convs:
            out = self._stage(out, layer, threads)
        return out[0] if squeeze else out

    def _stage(self, x: np.ndarray, layer, threads: int) -> np.ndarray:
        k = self.weights.kernel
        n, h, w, _ = x.shape
        oh, ow = h - k + 1, w - k + 1
        c_out = layer.pointwise.shape[1]
        out = np.empty((n, oh, ow, c_out), dtype=x.dtype)
        spans = [(r, min(r + _CONV_ROW_CHUNK, oh)) for r in range(0, oh, _CONV_ROW_CHUNK)]

        def work(span):
            r0, r1 = span
            dw = L.depthwise_forward(x[:, r0:r1 + k - 1], layer.depthwise)
            pw = L.pointwise_forward(dw, layer.pointwise, layer.bias)
            out[:, r0:r1] = L.elu_forward(pw, self.weights.elu_alpha)

        if threads > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, spans))
        else:
            for span in spans:
                work(span)
        return out


class Combiner:
    """Dense head + sigma transform, applied per pixel in chunks."""

    def __init__(self, weights: NetworkWeights):
        self.weights = weights

    def __call__(self, features: np.ndarray, chunk: int = 4096, threads: int = 1) -> GaussianParams:
        head = self.weights.head
        if features.shape[-1] != head.weight.shape[0]:
            raise ShapeError(
                f"combiner expects {head.weight.shape[0]} channels, got {features.shape[-1]}"
            )
        lead = features.shape[:-1]
        flat = features.reshape(-1, features.shape[-1])
        total = flat.shape[0]
        raw = np.empty((total, 4), dtype=features.dtype)
        spans = [(i, min(i + chunk, total)) for i in range(0, total, chunk)]

        def work(span):
            i0, i1 = span
            # einsum keeps per-element accumulation order independent of the
            # chunk extents, so any chunk size gives bit-identical results
            raw[i0:i1] = np.einsum("nc,co->no", flat[i0:i1], head.weight) + head.bias

        if threads > 1 and len(spans) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                list(pool.map(work, spans))
        else:
            for span in spans:
                work(span)

        return GaussianParams(
            mu_r=raw[:, 0].reshape(lead),
            mu_i=raw[:, 1].reshape(lead),
            sigma_r=L.sigma_from_raw(raw[:, 2]).reshape(lead),
            sigma_i=L.sigma_from_raw(raw[:, 3]).reshape(lead),
        )


def split_model(weights: NetworkWeights) -> tuple[Convolver, Combiner]:
    return Convolver(weights), Combiner(weights)


def predict_full(weights: NetworkWeights, image: ComplexField, *, chunk: int = 4096,
                 threads: int = 1) -> GaussianField:
    """Distribution field for a whole image; output dims equal input dims.

    The image is reflect-padded by the patch margin and the Convolver runs
    once; no center zeroing is applied in this mode (the strict patchwise
    path is predict_patchwise_grid).
    """
    p = weights.patch_size
    if image.height < p or image.width < p:
        raise ImageTooSmall(f"image {image.height}x{image.width} smaller than patch {p}")
    margin = p // 2
    padded = pad_reflect(image, margin)
    x = np.stack([padded.real, padded.imag], axis=-1)
    conv, comb = split_model(weights)
    feats = conv(x, threads=threads)
    params = comb(feats, chunk=chunk, threads=threads)
    return GaussianField(params.mu_r, params.mu_i, params.sigma_r, params.sigma_i)


def predict_patchwise_grid(weights: NetworkWeights, image: ComplexField, *,
                           zero_center: bool = True, batch: int = 512) -> GaussianField:
    """Strict per-pixel prediction: one center-zeroed patch per output pixel.

    Exact but ~patch_area times more work than predict_full; used to
    measure the cost of skipping center zeroing in full-image mode.
    """
    p = weights.patch_size
    if image.height < p or image.width < p:
        raise ImageTooSmall(f"image {image.height}x{image.width} smaller than patch {p}")
    margin = p // 2
    padded = pad_reflect(image, margin)
    stacked = np.stack([padded.real, padded.imag], axis=-1)
    h, w = image.height, image.width
    conv, comb = split_model(weights)

    out = [np.empty((h, w), dtype=np.float32) for _ in range(4)]
    coords = [(r, c) for r in range(h) for c in range(w)]
    for start in range(0, len(coords), batch):
        part = coords[start:start + batch]
        xb = np.empty((len(part), p, p, 2), dtype=np.float32)
        for j, (r, c) in enumerate(part):
            xb[j] = stacked[r:r + p, c:c + p]
            if zero_center:
                xb[j, margin, margin] = 0.0
        params = comb(conv(xb))
        for j, (r, c) in enumerate(part):
            out[0][r, c] = params.mu_r[j, 0, 0]
            out[1][r, c] = params.mu_i[j, 0, 0]
            out[2][r, c] = params.sigma_r[j, 0, 0]
            out[3][r, c] = params.sigma_i[j, 0, 0]
    return GaussianField(*out)


def coherence_from_sigma(field: GaussianField) -> CoherenceMap:
    """gamma = sqrt(1 - clip(sigma_r^2 + sigma_i^2, 0, 1))."""
    s = field.sigma_r.astype(np.float64) ** 2 + field.sigma_i.astype(np.float64) ** 2
    gamma = np.sqrt(1.0 - np.clip(s, 0.0, 1.0))
    return CoherenceMap(gamma.astype(np.float32))


def filtered_phase(field: GaussianField, return_degenerate: bool = False):
    """arg(mu); zero-mean pixels fall back to phase 0."""
    phase, degenerate = arg_with_fallback(field.mu_r, field.mu_i)
    image = PhaseImage(phase)
    if return_degenerate:
        return image, degenerate
    return image


def sample_interferogram(field: GaussianField, alpha: float, seed: int = 0) -> PhaseImage:
    """One draw per pixel from N(mu, (alpha*sigma)^2) per channel; phase of the draw."""
    if alpha < 0:
        raise InvalidValue(f"alpha must be >= 0, got {alpha}")
    if alpha == 0.0:
        return filtered_phase(field)
    draws = counter_normals(seed, (field.height, field.width, 2))
    p_r = field.mu_r + alpha * field.sigma_r * draws[:, :, 0]
    p_i = field.mu_i + alpha * field.sigma_i * draws[:, :, 1]
    phase, _ = arg_with_fallback(p_r, p_i)
    return PhaseImage(phase)
