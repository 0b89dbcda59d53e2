"""Convolutional autoencoder with Monte Carlo dropout, trained from scratch.

All arithmetic is float64. Dropout is the inverted variant (surviving
activations scaled by 1/(1-p)) and sits after each encoder conv's ReLU and
after the flatten, never on the bottleneck output itself; an optional
``dropout_latent`` switch adds that site for sensitivity experiments.
Training is single threaded and deterministic; Monte Carlo encoding draws
the masks for entry (i, j) from a stream derived from (seed, i, j), so the
embedding tensor is independent of batching and scheduling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError, DimensionError, TrainingDivergedError
from .metrics import EmbeddingTensor
from .rng import RngStream

STREAM_INIT = 0x696E6974
STREAM_TRAIN = 0x7472616E
STREAM_SHUFFLE = 0x73687566
STREAM_MC = 0x6D636472

CHECKPOINT_MAGIC = b"FAEDCKP1"
CHECKPOINT_VERSION = 1

MODES = ("train", "eval_deterministic", "eval_mc")


@dataclass(frozen=True)
class ArchitectureConfig:
    """Shape of the autoencoder; defaults give the full-scale model."""

    input_side: int = 128
    input_channels: int = 3
    encoder_channels: tuple[int, ...] = (128, 256, 512)
    kernel: int = 4
    stride: int = 2
    latent_dim: int = 256
    dropout_rate: float = 0.10
    dropout_latent: bool = False

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(self.encoder_channels))
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if not self.encoder_channels:
            raise ConfigError("encoder_channels must not be empty")
        if self.kernel < self.stride or (self.kernel - self.stride) % 2:
            raise ConfigError(
                f"kernel {self.kernel} and stride {self.stride} must satisfy "
                "kernel >= stride with an even difference"
            )
        if self.input_side % (self.stride ** len(self.encoder_channels)):
            raise ConfigError(
                f"input side {self.input_side} not divisible by "
                f"stride^{len(self.encoder_channels)} = {self.stride ** len(self.encoder_channels)}"
            )

    @property
    def padding(self) -> int:
        return (self.kernel - self.stride) // 2

    @property
    def encoder_sides(self) -> tuple[int, ...]:
        """Spatial side after each encoder conv."""
        sides = []
        s = self.input_side
        for _ in self.encoder_channels:
            s //= self.stride
            sides.append(s)
        return tuple(sides)

    @property
    def flat_dim(self) -> int:
        """Flattened encoder output length; also the decoder linear output."""
        return self.encoder_channels[-1] * self.encoder_sides[-1] ** 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    batch_size: int = 16
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class Autoencoder:
    """Parameter set plus (lazily created) Adam state."""

    arch: ArchitectureConfig
    params: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray] = field(default_factory=dict)
    adam_v: dict[str, np.ndarray] = field(default_factory=dict)
    adam_t: int = 0

    def copy_params(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}


def _param_plan(arch: ArchitectureConfig) -> list[tuple[str, tuple[int, ...], int]]:
    """(name, shape, fan_in) for every parameter, in build order."""
    k = arch.kernel
    plan = []
    c_in = arch.input_channels
    for i, c_out in enumerate(arch.encoder_channels):
        plan.append((f"enc_conv{i}_w", (c_out, c_in, k, k), c_in * k * k))
        plan.append((f"enc_conv{i}_b", (c_out,), 0))
        c_in = c_out
    flat = arch.flat_dim
    plan.append(("enc_lin_w", (arch.latent_dim, flat), flat))
    plan.append(("enc_lin_b", (arch.latent_dim,), 0))
    plan.append(("dec_lin_w", (flat, arch.latent_dim), arch.latent_dim))
    plan.append(("dec_lin_b", (flat,), 0))
    dec_out = arch.encoder_channels[-2::-1] + (arch.input_channels,)
    c_in = arch.encoder_channels[-1]
    for i, c_out in enumerate(dec_out):
        plan.append((f"dec_conv{i}_w", (c_in, c_out, k, k), c_in * k * k))
        plan.append((f"dec_conv{i}_b", (c_out,), 0))
        c_in = c_out
    return plan


def build(arch: ArchitectureConfig, seed: int) -> Autoencoder:
    """Fresh model; weights uniform in +-sqrt(6/fan_in), biases zero."""
    init = RngStream(seed, STREAM_INIT)
    params: dict[str, np.ndarray] = {}
    for idx, (name, shape, fan_in) in enumerate(_param_plan(arch)):
        if fan_in:
            bound = np.sqrt(6.0 / fan_in)
            u = init.derive(idx).uniforms(int(np.prod(shape)))
            params[name] = ((2.0 * u - 1.0) * bound).reshape(shape)
        else:
            params[name] = np.zeros(shape)
    return Autoencoder(arch=arch, params=params)


# ---------------------------------------------------------------------------
# Layer primitives (im2col / col2im)


def _im2col(xp: np.ndarray, k: int, s: int) -> np.ndarray:
    """(B, C, Hp, Wp) padded input -> (B, C*k*k, Ho*Wo) column matrix."""
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    b, c, ho, wo = win.shape[:4]
    return win.transpose(0, 1, 4, 5, 2, 3).reshape(b, c * k * k, ho * wo)


def _col2im(cols: np.ndarray, c: int, k: int, s: int, ho: int, wo: int, hp: int, wp: int) -> np.ndarray:
    """Scatter-add inverse of :func:`_im2col`."""
    b = cols.shape[0]
    g = cols.reshape(b, c, k, k, ho, wo)
    out = np.zeros((b, c, hp, wp))
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki : ki + s * ho : s, kj : kj + s * wo : s] += g[:, :, ki, kj]
    return out


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int):
    """Strided convolution; returns (y, cache) with cache for backward."""
    c_out, c_in, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    cols = _im2col(xp, k, stride)
    ho = (x.shape[2] + 2 * pad - k) // stride + 1
    y = np.matmul(w.reshape(c_out, -1), cols) + b[:, None]
    return y.reshape(x.shape[0], c_out, ho, -1), (cols, x.shape, w)


def conv2d_backward(dy: np.ndarray, cache, stride: int, pad: int):
    cols, x_shape, w = cache
    c_out, c_in, k, _ = w.shape
    b_sz, _, ho, wo = dy.shape
    dyf = dy.reshape(b_sz, c_out, ho * wo)
    dw = np.matmul(dyf, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3))
    dcols = np.matmul(w.reshape(c_out, -1).T, dyf)
    hp, wp = x_shape[2] + 2 * pad, x_shape[3] + 2 * pad
    dxp = _col2im(dcols, c_in, k, stride, ho, wo, hp, wp)
    dx = dxp[:, :, pad : hp - pad, pad : wp - pad] if pad else dxp
    return dx, dw, db


def convT2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int, pad: int):
    """Transposed convolution with weight (C_in, C_out, k, k)."""
    c_in, c_out, k, _ = w.shape
    b_sz, _, hi, wi = x.shape
    cols = np.matmul(w.reshape(c_in, -1).T, x.reshape(b_sz, c_in, hi * wi))
    hp = (hi - 1) * stride + k
    yp = _col2im(cols, c_out, k, stride, hi, wi, hp, hp)
    y = yp[:, :, pad : hp - pad, pad : hp - pad] if pad else yp
    return y + b[None, :, None, None]


def convT2d_backward(dy: np.ndarray, x: np.ndarray, w: np.ndarray, stride: int, pad: int):
    c_in, c_out, k, _ = w.shape
    b_sz, _, hi, wi = x.shape
    dyp = np.pad(dy, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = _im2col(dyp, k, stride)  # (B, C_out*k*k, Hi*Wi)
    dx = np.matmul(w.reshape(c_in, -1), win).reshape(x.shape)
    xf = x.reshape(b_sz, c_in, hi * wi)
    dw = np.matmul(xf, win.transpose(0, 2, 1)).sum(axis=0).reshape(w.shape)
    db = dy.sum(axis=(0, 2, 3))
    return dx, dw, db


def _dropout_mask(stream: RngStream, n: int, rate: float) -> np.ndarray:
    u = stream.uniforms(n)
    return np.where(u < 1.0 - rate, 1.0 / (1.0 - rate), 0.0)


def loss_mse_sum(reconstruction: np.ndarray, target: np.ndarray) -> float:
    """Per-sample sum of squared pixel errors, averaged over the batch."""
    if reconstruction.shape != target.shape:
        raise DimensionError(
            f"loss_mse_sum: shape mismatch {reconstruction.shape} vs {target.shape}"
        )
    diff = reconstruction - target
    per_sample = (diff * diff).reshape(diff.shape[0], -1).sum(axis=1)
    return float(per_sample.mean())


# ---------------------------------------------------------------------------
# Full model forward / backward

_ENC_SITE_CONV = 0  # dropout site index base: one per encoder conv
_SITE_FLAT_OFFSET = 100  # site index of the post-flatten mask
_SITE_LATENT_OFFSET = 101


def _check_batch(arch: ArchitectureConfig, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 4 or batch.shape[1:] != (
        arch.input_channels,
        arch.input_side,
        arch.input_side,
    ):
        raise DimensionError(
            f"batch shape {batch.shape} does not match architecture "
            f"(N, {arch.input_channels}, {arch.input_side}, {arch.input_side})"
        )
    return batch


def _encoder_masks(arch: ArchitectureConfig, stream: RngStream, n: int):
    """Dropout masks for one forward pass over ``n`` samples.

    Site masks are drawn from sub-streams of ``stream`` in a fixed order, so
    a pass is replayable from the same stream.
    """
    rate = arch.dropout_rate
    masks = []
    for i, (c, side) in enumerate(zip(arch.encoder_channels, arch.encoder_sides)):
        m = _dropout_mask(stream.derive(_ENC_SITE_CONV + i), n * c * side * side, rate)
        masks.append(m.reshape(n, c, side, side))
    flat = _dropout_mask(stream.derive(_SITE_FLAT_OFFSET), n * arch.flat_dim, rate)
    masks.append(flat.reshape(n, arch.flat_dim))
    if arch.dropout_latent:
        lat = _dropout_mask(stream.derive(_SITE_LATENT_OFFSET), n * arch.latent_dim, rate)
        masks.append(lat.reshape(n, arch.latent_dim))
    return masks


def _forward(model: Autoencoder, batch: np.ndarray, masks, want_cache: bool):
    """Run the full autoencoder; masks is None for deterministic eval."""
    arch = model.arch
    p = model.params
    stride, pad = arch.stride, arch.padding
    cache = {"acts": [], "masks": masks} if want_cache else None

    a = batch
    conv_caches = []
    relu_inputs = []
    for i in range(len(arch.encoder_channels)):
        z, cc = conv2d_forward(a, p[f"enc_conv{i}_w"], p[f"enc_conv{i}_b"], stride, pad)
        conv_caches.append(cc)
        relu_inputs.append(z)
        a = np.maximum(z, 0.0)
        if masks is not None:
            a = a * masks[i]
    flat = a.reshape(a.shape[0], -1)
    if masks is not None:
        flat = flat * masks[len(arch.encoder_channels)]
    latent = flat @ p["enc_lin_w"].T + p["enc_lin_b"]
    if masks is not None and arch.dropout_latent:
        latent = latent * masks[len(arch.encoder_channels) + 1]

    h = latent @ p["dec_lin_w"].T + p["dec_lin_b"]
    side = arch.encoder_sides[-1]
    d = h.reshape(h.shape[0], arch.encoder_channels[-1], side, side)
    dec_inputs = []
    dec_relu_inputs = []
    n_dec = len(arch.encoder_channels)
    for i in range(n_dec):
        dec_inputs.append(d)
        z = convT2d_forward(d, p[f"dec_conv{i}_w"], p[f"dec_conv{i}_b"], stride, pad)
        dec_relu_inputs.append(z)
        # hidden decoder layers are rectified; the output layer stays linear
        # so the reconstruction loss is smooth in every parameter
        d = np.maximum(z, 0.0) if i < n_dec - 1 else z
    recon = d

    if want_cache:
        cache.update(
            batch=batch,
            conv_caches=conv_caches,
            relu_inputs=relu_inputs,
            flat=flat,
            latent=latent,
            dec_lin_in=latent,
            dec_inputs=dec_inputs,
            dec_relu_inputs=dec_relu_inputs,
            pre_flat_shape=a.shape,
        )
    return recon, latent, cache


def forward(
    model: Autoencoder,
    batch: np.ndarray,
    mode: str = "eval_deterministic",
    rng_stream: RngStream | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruction and latent codes for a batch.

    ``train`` and ``eval_mc`` apply inverted dropout using ``rng_stream``;
    ``eval_deterministic`` applies none. With a zero dropout rate no stream
    is consumed and all modes coincide bitwise.
    """
    if mode not in MODES:
        raise ConfigError(f"forward: unknown mode {mode!r}")
    batch = _check_batch(model.arch, batch)
    masks = None
    if mode in ("train", "eval_mc") and model.arch.dropout_rate > 0.0:
        if rng_stream is None:
            raise ConfigError(f"forward: mode {mode!r} needs an rng stream when dropout is active")
        masks = _encoder_masks(model.arch, rng_stream, batch.shape[0])
    recon, latent, _ = _forward(model, batch, masks, want_cache=False)
    return recon, latent


def backward(
    model: Autoencoder, batch: np.ndarray, rng_stream: RngStream | None
) -> tuple[float, dict[str, np.ndarray]]:
    """Training loss and gradients for one batch (forward pass included).

    The forward pass runs in train mode with dropout masks drawn from
    ``rng_stream``; fusing forward and backward in one call guarantees the
    masks used for the two passes can never disagree.
    """
    arch = model.arch
    batch = _check_batch(arch, batch)
    masks = None
    if arch.dropout_rate > 0.0:
        if rng_stream is None:
            raise ConfigError("backward: dropout is active, an rng stream is required")
        masks = _encoder_masks(arch, rng_stream, batch.shape[0])
    recon, _, cache = _forward(model, batch, masks, want_cache=True)
    loss = loss_mse_sum(recon, batch)

    p = model.params
    stride, pad = arch.stride, arch.padding
    n = batch.shape[0]
    grads: dict[str, np.ndarray] = {}

    # d loss / d recon for the batch-mean of per-sample pixel sums
    g = 2.0 * (recon - batch) / n
    n_dec = len(arch.encoder_channels)
    for i in range(n_dec - 1, -1, -1):
        if i < n_dec - 1:
            g = g * (cache["dec_relu_inputs"][i] > 0.0)
        g, dw, db = convT2d_backward(g, cache["dec_inputs"][i], p[f"dec_conv{i}_w"], stride, pad)
        grads[f"dec_conv{i}_w"] = dw
        grads[f"dec_conv{i}_b"] = db
    g = g.reshape(n, -1)
    grads["dec_lin_w"] = g.T @ cache["dec_lin_in"]
    grads["dec_lin_b"] = g.sum(axis=0)
    g = g @ p["dec_lin_w"]

    if masks is not None and arch.dropout_latent:
        g = g * cache["masks"][n_dec + 1]
    grads["enc_lin_w"] = g.T @ cache["flat"]
    grads["enc_lin_b"] = g.sum(axis=0)
    g = g @ p["enc_lin_w"]
    if masks is not None:
        g = g * cache["masks"][n_dec].reshape(g.shape)
    g = g.reshape(cache["pre_flat_shape"])
    for i in range(len(arch.encoder_channels) - 1, -1, -1):
        if masks is not None:
            g = g * cache["masks"][i]
        g = g * (cache["relu_inputs"][i] > 0.0)
        g, dw, db = conv2d_backward(g, cache["conv_caches"][i], stride, pad)
        grads[f"enc_conv{i}_w"] = dw
        grads[f"enc_conv{i}_b"] = db

    return loss, grads


def adam_step(model: Autoencoder, grads: dict[str, np.ndarray], tc: TrainConfig) -> Autoencoder:
    """One Adam update in place; returns the model for chaining."""
    if not model.adam_m:
        model.adam_m = {k: np.zeros_like(v) for k, v in model.params.items()}
        model.adam_v = {k: np.zeros_like(v) for k, v in model.params.items()}
    for name in model.params:
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise TrainingDivergedError(f"non-finite gradient for parameter {name!r}")
    model.adam_t += 1
    t = model.adam_t
    b1, b2 = tc.beta1, tc.beta2
    for name, g in grads.items():
        m = model.adam_m[name]
        v = model.adam_v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        model.params[name] -= tc.learning_rate * m_hat / (np.sqrt(v_hat) + tc.eps_adam)
    return model


def _dataset_loss(model: Autoencoder, images: np.ndarray, chunk: int = 64) -> float:
    """Mean per-sample sum loss in deterministic mode, fixed chunking."""
    total = 0.0
    for lo in range(0, images.shape[0], chunk):
        x = images[lo : lo + chunk]
        recon, _, _ = _forward(model, x, None, want_cache=False)
        diff = recon - x
        total += float((diff * diff).reshape(x.shape[0], -1).sum())
    return total / images.shape[0]


def fit(
    model: Autoencoder,
    train_images: np.ndarray,
    val_images: np.ndarray,
    tc: TrainConfig,
    verbose: bool = False,
) -> tuple[Autoencoder, list[tuple[int, float, float]]]:
    """Train for ``tc.epochs`` epochs, returning the best-validation snapshot.

    Shuffling is a deterministic permutation per (seed, epoch). Validation
    runs in deterministic mode after every epoch; the returned model carries
    the parameters of the epoch with the smallest validation loss (earliest
    epoch wins ties) and a fresh optimizer state. History rows are
    (epoch, train_loss, val_loss).
    """
    train_images = _check_batch(model.arch, train_images)
    val_images = _check_batch(model.arch, val_images)
    if train_images.shape[0] < 1 or val_images.shape[0] < 1:
        raise DataError("fit: train and validation sets must be non-empty")

    step_root = RngStream(tc.seed, STREAM_TRAIN)
    shuffle_root = RngStream(tc.seed, STREAM_SHUFFLE)
    n = train_images.shape[0]
    best_val = np.inf
    best_params = model.copy_params()
    history: list[tuple[int, float, float]] = []

    for epoch in range(1, tc.epochs + 1):
        order = shuffle_root.derive(epoch).permutation(n)
        epoch_stream = step_root.derive(epoch)
        batch_losses = []
        for b, lo in enumerate(range(0, n, tc.batch_size)):
            xb = train_images[order[lo : lo + tc.batch_size]]
            loss, grads = backward(model, xb, epoch_stream.derive(b))
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite training loss at epoch {epoch}")
            adam_step(model, grads, tc)
            batch_losses.append(loss)
        train_loss = float(np.mean(batch_losses))
        val_loss = _dataset_loss(model, val_images)
        if not np.isfinite(val_loss):
            raise TrainingDivergedError(f"non-finite validation loss at epoch {epoch}")
        history.append((epoch, train_loss, val_loss))
        if verbose:
            print(f"epoch {epoch}/{tc.epochs} train {train_loss:.6g} val {val_loss:.6g}")
        if val_loss < best_val:
            best_val = val_loss
            best_params = model.copy_params()

    best = Autoencoder(arch=model.arch, params=best_params)
    return best, history


# ---------------------------------------------------------------------------
# Monte Carlo encoding


def _single_image_encoder_plan(arch: ArchitectureConfig):
    """Precomputed im2col gather indices per encoder conv for one image."""
    plan = []
    side = arch.input_side
    c_in = arch.input_channels
    k, s, pad = arch.kernel, arch.stride, arch.padding
    for c_out, out_side in zip(arch.encoder_channels, arch.encoder_sides):
        padded = side + 2 * pad
        base = np.arange(c_in)[:, None, None] * padded * padded
        ky = np.arange(k)[:, None] * padded + np.arange(k)[None, :]
        window = (base + ky[None]).reshape(c_in * k * k)
        oy, ox = np.meshgrid(np.arange(out_side) * s, np.arange(out_side) * s, indexing="ij")
        origin = (oy * padded + ox).reshape(-1)
        idx = window[:, None] + origin[None, :]
        plan.append((idx, (c_in, side, padded), c_out, out_side))
        c_in, side = c_out, out_side
    return plan


def _encode_one(model: Autoencoder, image: np.ndarray, masks, plan) -> np.ndarray:
    """Encoder-only pass for one image; per-image GEMM shapes are fixed, so
    results never depend on how callers group images."""
    p = model.params
    arch = model.arch
    pad = arch.padding
    a = image
    for i, (idx, (c_in, side, _), c_out, out_side) in enumerate(plan):
        ap = np.pad(a, ((0, 0), (pad, pad), (pad, pad)))
        cols = ap.reshape(-1)[idx]
        z = p[f"enc_conv{i}_w"].reshape(c_out, -1) @ cols + p[f"enc_conv{i}_b"][:, None]
        a = np.maximum(z, 0.0).reshape(c_out, out_side, out_side)
        if masks is not None:
            a = a * masks[i][0]
    flat = a.reshape(-1)
    if masks is not None:
        flat = flat * masks[len(plan)][0]
    latent = p["enc_lin_w"] @ flat + p["enc_lin_b"]
    if masks is not None and arch.dropout_latent:
        latent = latent * masks[len(plan) + 1][0]
    return latent


def encode_mc(
    model: Autoencoder, images: np.ndarray, j_samples: int, seed: int
) -> EmbeddingTensor:
    """Monte Carlo dropout embeddings, shape (n_images, j_samples, latent).

    Entry (i, j) uses the stream derived from (seed, i, j), so the tensor is
    a pure function of those indices. With a zero dropout rate all j slices
    are identical.
    """
    if j_samples < 1:
        raise ConfigError(f"encode_mc: j_samples must be >= 1, got {j_samples}")
    images = _check_batch(model.arch, images)
    arch = model.arch
    root = RngStream(seed, STREAM_MC)
    plan = _single_image_encoder_plan(arch)
    n = images.shape[0]
    out = np.empty((n, j_samples, arch.latent_dim))
    for i in range(n):
        if arch.dropout_rate == 0.0:
            code = _encode_one(model, images[i], None, plan)
            out[i, :, :] = code[None, :]
            continue
        stream_i = root.derive(i)
        for j in range(j_samples):
            masks = _encoder_masks(arch, stream_i.derive(j), 1)
            out[i, j, :] = _encode_one(model, images[i], masks, plan)
    return EmbeddingTensor(out, seed=seed)


# ---------------------------------------------------------------------------
# Checkpoints


def save_checkpoint(path: str, model: Autoencoder) -> None:
    """Write architecture and parameters; optimizer state is not saved."""
    arch = model.arch
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(
            struct.pack(
                "<III",
                arch.input_side,
                arch.input_channels,
                len(arch.encoder_channels),
            )
        )
        f.write(struct.pack(f"<{len(arch.encoder_channels)}I", *arch.encoder_channels))
        f.write(struct.pack("<IIIdI", arch.kernel, arch.stride, arch.latent_dim,
                            arch.dropout_rate, int(arch.dropout_latent)))
        f.write(struct.pack("<I", len(model.params)))
        for name, tensor in model.params.items():
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(tensor.astype("<f8").tobytes())


def _read_exact(f, n: int) -> bytes:
    b = f.read(n)
    if len(b) != n:
        raise DataError("checkpoint: truncated file")
    return b


def load_checkpoint(path: str) -> Autoencoder:
    with open(path, "rb") as f:
        if _read_exact(f, 8) != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: not a checkpoint file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        side, in_ch, n_layers = struct.unpack("<III", _read_exact(f, 12))
        channels = struct.unpack(f"<{n_layers}I", _read_exact(f, 4 * n_layers))
        kernel, stride, latent, rate, drop_lat = struct.unpack("<IIIdI", _read_exact(f, 24))
        arch = ArchitectureConfig(
            input_side=side,
            input_channels=in_ch,
            encoder_channels=channels,
            kernel=kernel,
            stride=stride,
            latent_dim=latent,
            dropout_rate=rate,
            dropout_latent=bool(drop_lat),
        )
        (n_tensors,) = struct.unpack("<I", _read_exact(f, 4))
        params: dict[str, np.ndarray] = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<I", _read_exact(f, 4))
            name = _read_exact(f, name_len).decode("utf-8")
            (rank,) = struct.unpack("<I", _read_exact(f, 4))
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank))
            count = int(np.prod(dims)) if rank else 1
            buf = _read_exact(f, 8 * count)
            params[name] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(dims)

    expected = {name: shape for name, shape, _ in _param_plan(arch)}
    if set(params) != set(expected):
        raise DataError(f"{path}: parameter names do not match the stored architecture")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise DataError(
                f"{path}: tensor {name!r} has shape {params[name].shape}, expected {shape}"
            )
    return Autoencoder(arch=arch, params=params)
