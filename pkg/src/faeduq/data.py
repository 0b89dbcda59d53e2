"""Image ingestion, augmentation and synthetic dataset generation.

Images are square RGB rasters with float64 values in [0, 1], stored
channel-major. All randomized operations take an :class:`~faeduq.rng.RngStream`
and are pure functions of it; per-patch and per-image randomness lives in
derived sub-streams so pipelines stay reproducible under any scheduling.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionError, PpmParseError
from .rng import RngStream

STREAM_NOISE = 0x6E6F6973
STREAM_OVERLAY = 0x6F766572
STREAM_SYNTH = 0x73796E74


@dataclass(frozen=True)
class Image:
    """One normalized RGB raster, shape (3, side, side), values in [0, 1]."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float64)
        if p.ndim != 3 or p.shape[0] != 3 or p.shape[1] != p.shape[2]:
            raise DimensionError(f"Image: expected (3, side, side), got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DataError("Image: non-finite pixel values")
        if p.size and (p.min() < 0.0 or p.max() > 1.0):
            raise DataError(f"Image: pixel values outside [0, 1] (range {p.min()}..{p.max()})")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def side(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[0]


@dataclass
class Dataset:
    """An ordered collection of same-shape images."""

    images: list[Image]
    name: str = ""
    labels: list[str] | None = None

    def __post_init__(self):
        sides = {img.side for img in self.images}
        if len(sides) > 1:
            raise DataError(f"Dataset {self.name!r}: mixed image sides {sorted(sides)}")

    def __len__(self) -> int:
        return len(self.images)

    def to_batch(self) -> np.ndarray:
        """Stack into an (N, 3, side, side) float64 array."""
        return np.stack([img.pixels for img in self.images])


# ---------------------------------------------------------------------------
# PPM (P6) reader / writer


def _ppm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos]
        if c == ord(b"#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
        elif c in b" \t\r\n\x0b\x0c":
            pos += 1
        else:
            break
    if pos >= n:
        raise PpmParseError("unexpected end of header", pos)
    start = pos
    while pos < n and data[pos] not in b" \t\r\n\x0b\x0c":
        pos += 1
    return data[start:pos], pos


def _ppm_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    tok, end = _ppm_token(data, pos)
    if not tok.isdigit():
        raise PpmParseError(f"bad {what} token {tok!r}", pos)
    return int(tok), end


def load_image_ppm(data: bytes) -> Image:
    """Decode a binary (P6) 8-bit RGB PPM into a normalized square Image."""
    magic, pos = _ppm_token(data, 0)
    if magic != b"P6":
        raise PpmParseError(f"not a binary PPM (magic {magic!r})", 0)
    width, pos = _ppm_int(data, pos, "width")
    height, pos = _ppm_int(data, pos, "height")
    maxval_at = pos
    maxval, pos = _ppm_int(data, pos, "maxval")
    if maxval != 255:
        raise PpmParseError(f"unsupported maxval {maxval} (need 255)", maxval_at)
    if pos >= len(data) or data[pos] not in b" \t\r\n\x0b\x0c":
        raise PpmParseError("missing whitespace after maxval", pos)
    pos += 1
    if width != height:
        raise DataError(f"only square images are supported, got {width}x{height}")
    need = 3 * width * height
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PpmParseError(
            f"truncated payload: need {need} bytes, have {len(payload)}", len(data)
        )
    raw = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    return Image(raw.reshape(height, width, 3).transpose(2, 0, 1))


def write_image_ppm(img: Image) -> bytes:
    """Encode an Image as binary PPM; quantizes to 8 bits."""
    side = img.side
    header = f"P6\n{side} {side}\n255\n".encode("ascii")
    q = np.floor(img.pixels * 255.0 + 0.5).clip(0, 255).astype(np.uint8)
    return header + q.transpose(1, 2, 0).tobytes()


def load_dataset_dir(path: str) -> Dataset:
    """Load every ``*.ppm`` in a directory, lexicographic filename order."""
    if not os.path.isdir(path):
        raise DataError(f"not a directory: {path}")
    names = sorted(n for n in os.listdir(path) if n.endswith(".ppm"))
    if not names:
        raise DataError(f"no .ppm files in {path}")
    images = []
    for name in names:
        with open(os.path.join(path, name), "rb") as f:
            try:
                images.append(load_image_ppm(f.read()))
            except DataError as exc:
                raise DataError(f"{name}: {exc}") from exc
    return Dataset(images, name=os.path.basename(os.path.normpath(path)))


def save_dataset_dir(ds: Dataset, path: str) -> None:
    os.makedirs(path, exist_ok=True)
    for i, img in enumerate(ds.images):
        with open(os.path.join(path, f"img_{i:05d}.ppm"), "wb") as f:
            f.write(write_image_ppm(img))


# ---------------------------------------------------------------------------
# Geometry


def resize_bilinear(img: Image, target_side: int) -> Image:
    """Bilinear resample with half-pixel-center alignment."""
    if target_side < 1:
        raise ConfigError(f"resize_bilinear: target side must be >= 1, got {target_side}")
    src = img.side
    if target_side == src:
        return Image(img.pixels)
    coords = (np.arange(target_side) + 0.5) * (src / target_side) - 0.5
    coords = np.clip(coords, 0.0, src - 1.0)
    i0 = np.floor(coords).astype(int)
    i1 = np.minimum(i0 + 1, src - 1)
    w = coords - i0
    p = img.pixels
    rows = p[:, i0, :] * (1.0 - w)[None, :, None] + p[:, i1, :] * w[None, :, None]
    out = rows[:, :, i0] * (1.0 - w)[None, None, :] + rows[:, :, i1] * w[None, None, :]
    return Image(np.clip(out, 0.0, 1.0))


def _rotate_nearest(patch: np.ndarray, angle_rad: float) -> tuple[np.ndarray, np.ndarray]:
    """Rotate a (3, P, P) patch about its center, nearest-neighbor.

    Returns (rotated, footprint) where footprint marks output pixels whose
    source landed inside the patch square; everything else is untouched by
    the caller (no fill corners).
    """
    p = patch.shape[1]
    c = 0.5 * (p - 1)
    ys, xs = np.meshgrid(np.arange(p) - c, np.arange(p) - c, indexing="ij")
    cos_a, sin_a = np.cos(angle_rad), np.sin(angle_rad)
    # inverse map: source offset = R(-angle) @ destination offset
    sy = c + cos_a * ys + sin_a * xs
    sx = c - sin_a * ys + cos_a * xs
    ry = np.rint(sy).astype(int)
    rx = np.rint(sx).astype(int)
    footprint = (ry >= 0) & (ry < p) & (rx >= 0) & (rx < p)
    out = np.zeros_like(patch)
    out[:, footprint] = patch[:, ry[footprint], rx[footprint]]
    return out, footprint


# ---------------------------------------------------------------------------
# Augmentations


def augment_noise(img: Image, rng: RngStream, clamp: bool = True) -> Image:
    """Add Gaussian noise with sigma = 2% of the image's max pixel value.

    An all-zero image is returned unchanged (sigma is 0). ``clamp`` keeps the
    result inside [0, 1]; disabling it is only for measuring the raw noise.
    """
    sigma = 0.02 * float(img.pixels.max()) if img.pixels.size else 0.0
    if sigma == 0.0:
        return Image(img.pixels)
    z = rng.normals(img.pixels.size).reshape(img.pixels.shape)
    noisy = img.pixels + sigma * z
    if clamp:
        noisy = np.clip(noisy, 0.0, 1.0)
        return Image(noisy)
    out = object.__new__(Image)  # bypass range check when measuring raw noise
    object.__setattr__(out, "pixels", noisy)
    return out


def augment_overlay(
    img: Image,
    sources: list[Image],
    count: int,
    patch_side: int,
    rng: RngStream,
) -> Image:
    """Paste ``count`` randomly rotated thumbnails at random positions.

    Patch k draws everything from sub-stream ``rng.derive(k)``: source index,
    rotation angle, then the top-left position (kept fully in bounds). For a
    self-overlay pass ``sources=[img]``. Later patches overdraw earlier ones;
    pixels outside a patch's rotation footprint are left untouched.
    """
    if count < 0:
        raise ConfigError(f"augment_overlay: count must be >= 0, got {count}")
    if patch_side >= img.side:
        raise ConfigError(
            f"augment_overlay: patch side {patch_side} must be smaller than image side {img.side}"
        )
    if count == 0:
        return Image(img.pixels)
    if not sources:
        raise ConfigError("augment_overlay: empty source list with count > 0")

    canvas = img.pixels.copy()
    span = img.side - patch_side + 1
    for k in range(count):
        s = rng.derive(k)
        src = sources[s.randint(len(sources), start=0)]
        angle = float(s.uniforms(1, start=1)[0]) * 2.0 * np.pi
        y0 = min(int(s.uniforms(1, start=2)[0] * span), span - 1)
        x0 = min(int(s.uniforms(1, start=3)[0] * span), span - 1)
        thumb = resize_bilinear(src, patch_side).pixels
        rotated, footprint = _rotate_nearest(thumb, angle)
        region = canvas[:, y0 : y0 + patch_side, x0 : x0 + patch_side]
        region[:, footprint] = rotated[:, footprint]
    return Image(canvas)


def split_halves(ds: Dataset) -> tuple[Dataset, Dataset]:
    """Deterministic floor(N/2) split in stored order."""
    n = len(ds)
    if n < 2:
        raise DataError(f"split_halves: need at least 2 images, got {n}")
    cut = n // 2
    labels = ds.labels
    first = Dataset(ds.images[:cut], name=f"{ds.name}/first", labels=labels[:cut] if labels else None)
    second = Dataset(ds.images[cut:], name=f"{ds.name}/second", labels=labels[cut:] if labels else None)
    return first, second


# ---------------------------------------------------------------------------
# Synthetic desk-scale datasets

_FAMILY_CODES = {"blobs": 1, "stripes": 2}


def _blob_image(side: int, s: RngStream) -> Image:
    u = s.uniforms(4)
    bg = 0.02 + 0.18 * u[:3]
    n_blobs = 3 + min(int(u[3] * 4), 3)
    ys, xs = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    canvas = np.broadcast_to(bg[:, None, None], (3, side, side)).copy()
    for b in range(n_blobs):
        v = s.derive(b).uniforms(6)
        cy, cx = v[0] * side, v[1] * side
        r = side * (0.08 + 0.10 * v[2])
        amp = 0.25 + 0.50 * v[3:6]
        bump = np.exp(-((ys - cy) ** 2 + (xs - cx) ** 2) / (2.0 * r * r))
        canvas += amp[:, None, None] * bump[None, :, :]
    return Image(np.clip(canvas, 0.0, 1.0))


def _stripe_image(side: int, s: RngStream) -> Image:
    u = s.uniforms(9)
    angle = np.pi * u[0]
    freq = 2.0 + 6.0 * u[1]
    phase = 2.0 * np.pi * u[2]
    color_a = u[3:6]
    color_b = u[6:9]
    ys, xs = np.meshgrid(np.arange(side) / side, np.arange(side) / side, indexing="ij")
    wave = 0.5 + 0.5 * np.sin(2.0 * np.pi * freq * (np.cos(angle) * xs + np.sin(angle) * ys) + phase)
    px = color_a[:, None, None] + (color_b - color_a)[:, None, None] * wave[None, :, :]
    return Image(px)


def synth_dataset(family: str, n: int, side: int, seed: int) -> Dataset:
    """Procedural RGB textures: soft ``blobs`` or oriented ``stripes``.

    The two families are visually and statistically distinct, so one can act
    as in-distribution data and the other as a disjoint dataset.
    """
    if family not in _FAMILY_CODES:
        raise ConfigError(f"synth_dataset: unknown family {family!r}")
    if n < 1:
        raise ConfigError(f"synth_dataset: n must be >= 1, got {n}")
    if side < 4:
        raise ConfigError(f"synth_dataset: side must be >= 4, got {side}")
    root = RngStream(seed, STREAM_SYNTH + _FAMILY_CODES[family])
    make = _blob_image if family == "blobs" else _stripe_image
    images = [make(side, root.derive(i)) for i in range(n)]
    return Dataset(images, name=f"{family}-{n}x{side}", labels=[family] * n)
