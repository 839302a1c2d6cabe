"""Image datasets: IDX files, domain construction and the desk-scale benchmark."""

from dataclasses import dataclass, field
import gzip
import hashlib
import os
import struct

import numpy as np

from .errors import (
    BadMagicError,
    CountMismatchError,
    DimensionError,
    InvalidArgumentError,
    TruncatedFileError,
)
from .rng import derive_seed, stream

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class ImageDataset:
    """``n`` grayscale images as rows of ``pixels`` (n x width*height) plus labels."""

    pixels: np.ndarray
    labels: np.ndarray
    width: int
    height: int
    n_classes: int = 10

    def __post_init__(self):
        d = self.width * self.height
        pixels = np.array(self.pixels, dtype=np.float64).reshape(-1, d)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if self.width < 1 or self.height < 1:
            raise InvalidArgumentError("width and height must be positive")
        if labels.size != pixels.shape[0]:
            raise DimensionError(f"{pixels.shape[0]} images but {labels.size} labels")
        if pixels.size and not (np.all(pixels >= 0.0) and np.all(pixels <= 1.0)):
            raise InvalidArgumentError("pixel values must lie in [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise InvalidArgumentError(f"labels must lie in [0, {self.n_classes})")
        pixels.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.pixels.shape[0]

    @property
    def n_pixels(self):
        return self.width * self.height

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, ImageDataset):
            return NotImplemented
        return (
            (self.width, self.height, self.n_classes)
            == (other.width, other.height, other.n_classes)
            and np.array_equal(self.pixels, other.pixels)
            and np.array_equal(self.labels, other.labels)
        )

    def with_pixels(self, pixels):
        return ImageDataset(pixels, self.labels, self.width, self.height, self.n_classes)

    def subset(self, index):
        return ImageDataset(
            self.pixels[index], self.labels[index], self.width, self.height, self.n_classes
        )

    def images(self):
        return self.pixels.reshape(self.n, self.height, self.width)

    def manifest(self):
        digest = hashlib.sha256(self.pixels.astype("<f8").tobytes()).hexdigest()
        return {
            "n": self.n,
            "width": self.width,
            "height": self.height,
            "n_classes": self.n_classes,
            "sha256": digest,
        }


# ---------------------------------------------------------------- IDX files


def _open(path, mode="rb"):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"{what}: expected {n} bytes, got {len(buf)}")
    return buf


def read_idx_images(path):
    with _open(path) as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, path))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagicError(f"{path}: image magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        n, rows, cols = struct.unpack(">III", _read_exact(f, 12, path))
        raw = _read_exact(f, n * rows * cols, path)
    return np.frombuffer(raw, dtype=np.uint8).reshape(n, rows, cols)


def read_idx_labels(path):
    with _open(path) as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, path))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagicError(f"{path}: label magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        (n,) = struct.unpack(">I", _read_exact(f, 4, path))
        raw = _read_exact(f, n, path)
    return np.frombuffer(raw, dtype=np.uint8)


def load_idx(images_path, labels_path, n_classes=10):
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images_path} holds {images.shape[0]} images but {labels_path} holds {labels.shape[0]} labels"
        )
    n, rows, cols = images.shape
    n_classes = max(n_classes, int(labels.max()) + 1) if n else n_classes
    return ImageDataset(
        images.reshape(n, rows * cols) / 255.0, labels, width=cols, height=rows, n_classes=n_classes
    )


def to_u8(pixels):
    return np.rint(np.asarray(pixels) * 255.0).astype(np.uint8)


def save_idx(ds, images_path, labels_path):
    """Write ``ds`` as an IDX pair; pixels are quantised to bytes (round(255 p))."""
    if ds.n_classes > 256:
        raise InvalidArgumentError("IDX labels are single bytes")
    with _open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, ds.n, ds.height, ds.width))
        f.write(to_u8(ds.pixels).tobytes())
    with _open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, ds.n))
        f.write(ds.labels.astype(np.uint8).tobytes())


# ---------------------------------------------------------- transformations


def invert(ds):
    return ds.with_pixels(1.0 - ds.pixels)


def concat(a, b):
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionError(
            f"cannot concatenate {a.width}x{a.height} images with {b.width}x{b.height}"
        )
    return ImageDataset(
        np.concatenate([a.pixels, b.pixels]),
        np.concatenate([a.labels, b.labels]),
        a.width,
        a.height,
        max(a.n_classes, b.n_classes),
    )


def downscale(ds, factor):
    """Block-mean pooling by an integer ``factor`` in both directions."""
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError(f"factor must be a positive integer, got {factor}")
    factor = int(factor)
    if ds.width % factor or ds.height % factor:
        raise DimensionError(f"{ds.width}x{ds.height} is not divisible by {factor}")
    if factor == 1:
        return ds
    h, w = ds.height // factor, ds.width // factor
    blocks = ds.pixels.reshape(ds.n, h, factor, w, factor)
    pooled = np.clip(blocks.mean(axis=(2, 4)), 0.0, 1.0)
    return ImageDataset(pooled.reshape(ds.n, h * w), ds.labels, w, h, ds.n_classes)


@dataclass(frozen=True)
class NoiseConfig:
    """Smoothed-noise backgrounds for the synthetic target domain.

    A uniform field is box-blurred with ``blur_radius``, stretched to span
    [0, 1] when ``stretch`` is set, and scaled by ``amplitude``.
    """

    amplitude: float = 0.5
    blur_radius: int = 1
    stretch: bool = True

    def __post_init__(self):
        if int(self.blur_radius) != self.blur_radius or self.blur_radius < 0:
            raise InvalidArgumentError(f"blur radius must be a non-negative integer, got {self.blur_radius}")
        if not self.amplitude >= 0.0:
            raise InvalidArgumentError("amplitude must be non-negative")


def box_blur(field, radius):
    if radius == 0:
        return field
    size = 2 * radius + 1
    padded = np.pad(field, radius, mode="reflect")
    # Separable running mean via cumulative sums.
    c = np.cumsum(np.pad(padded, ((1, 0), (0, 0))), axis=0)
    rows = (c[size:] - c[:-size]) / size
    c = np.cumsum(np.pad(rows, ((0, 0), (1, 0))), axis=1)
    return (c[:, size:] - c[:, :-size]) / size


def background(height, width, cfg, rng):
    field = box_blur(rng.random((height, width)), int(cfg.blur_radius))
    if cfg.stretch:
        lo, hi = field.min(), field.max()
        field = (field - lo) / (hi - lo) if hi > lo else np.zeros_like(field)
    return cfg.amplitude * field


def make_target_domain(ds, noise_cfg, rng):
    """Blend every image with its own background: ``|foreground - background|``."""
    seed = derive_seed(rng)
    out = np.empty_like(ds.pixels)
    for i in range(ds.n):
        bg = background(ds.height, ds.width, noise_cfg, stream(seed, i)).reshape(-1)
        out[i] = np.abs(ds.pixels[i] - bg)
    return ds.with_pixels(np.clip(out, 0.0, 1.0))


# ------------------------------------------------------------ synthetic data


def bars_and_stripes(side=4):
    """Every distinct bars-and-stripes pattern on a ``side`` x ``side`` grid.

    Label 0 marks patterns made of horizontal bars (constant rows), 1 the
    remaining vertical-stripe patterns.
    """
    patterns, labels = [], []
    seen = set()
    for code in range(2**side):
        bits = np.array([(code >> (side - 1 - i)) & 1 for i in range(side)], dtype=np.float64)
        for label, img in ((0, np.repeat(bits[:, None], side, axis=1)), (1, np.repeat(bits[None, :], side, axis=0))):
            key = img.tobytes()
            if key not in seen:
                seen.add(key)
                patterns.append(img.reshape(-1))
                labels.append(label)
    return ImageDataset(np.array(patterns), np.array(labels), side, side, n_classes=2)


def _arc(cx, cy, rx, ry, t0, t1, n=10):
    t = np.radians(np.linspace(t0, t1, n))
    return np.stack([cx + rx * np.cos(t), cy + ry * np.sin(t)], axis=1)


def _line(*pts):
    return np.array(pts, dtype=np.float64)


# Stroke skeletons in a unit box, x to the right and y downwards.
GLYPH_STROKES = {
    0: [_arc(0.5, 0.5, 0.28, 0.4, 0, 360, 24)],
    1: [_line((0.38, 0.25), (0.55, 0.1), (0.55, 0.9))],
    2: [_arc(0.5, 0.32, 0.25, 0.22, 190, 370, 12), _line((0.75, 0.36), (0.25, 0.9), (0.78, 0.9))],
    3: [_arc(0.48, 0.3, 0.24, 0.2, 200, 450, 12), _arc(0.48, 0.7, 0.27, 0.2, 270, 520, 12)],
    4: [_line((0.62, 0.1), (0.2, 0.65), (0.8, 0.65)), _line((0.62, 0.35), (0.62, 0.9))],
    5: [_line((0.75, 0.1), (0.3, 0.1), (0.27, 0.45)), _arc(0.48, 0.66, 0.27, 0.24, 230, 500, 14)],
    6: [_arc(0.6, 0.45, 0.33, 0.38, 250, 160, 10), _arc(0.5, 0.68, 0.23, 0.21, 0, 360, 18)],
    7: [_line((0.22, 0.1), (0.78, 0.1), (0.42, 0.9))],
    8: [_arc(0.5, 0.3, 0.2, 0.19, 0, 360, 16), _arc(0.5, 0.7, 0.25, 0.2, 0, 360, 18)],
    9: [_arc(0.5, 0.32, 0.23, 0.21, 0, 360, 18), _line((0.73, 0.32), (0.68, 0.9))],
}


def _segment_distance(px, a, b):
    ab = b - a
    denom = float(ab @ ab)
    t = np.zeros(len(px)) if denom == 0 else np.clip((px - a) @ ab / denom, 0.0, 1.0)
    return np.linalg.norm(px - (a + t[:, None] * ab), axis=1)


def render_glyph(label, size, rng):
    """Draw one randomly deformed stroke glyph of class ``label`` on a size x size canvas."""
    angle = np.radians(rng.uniform(-12, 12))
    scale = rng.uniform(0.8, 1.05, size=2)
    shear = rng.uniform(-0.25, 0.25)
    shift = rng.uniform(-0.07, 0.07, size=2)
    thickness = rng.uniform(0.06, 0.1) * size
    rot = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    affine = rot @ np.array([[1.0, shear], [0.0, 1.0]]) @ np.diag(scale)

    ys, xs = np.mgrid[0:size, 0:size]
    px = np.stack([xs.ravel() + 0.5, ys.ravel() + 0.5], axis=1)
    dist = np.full(px.shape[0], np.inf)
    for stroke in GLYPH_STROKES[label]:
        pts = stroke + rng.normal(0.0, 0.015, size=stroke.shape)
        pts = (pts - 0.5) @ affine.T + 0.5 + shift
        pts = pts * size
        for a, b in zip(pts[:-1], pts[1:]):
            dist = np.minimum(dist, _segment_distance(px, a, b))
    ink = np.clip(thickness / 2 + 0.5 - dist, 0.0, 1.0)
    return ink.reshape(size, size)


def synthetic_glyphs(n, seed, split, size=28):
    """Class-balanced glyph images; labels cycle through 0..9 in shuffled order."""
    labels = np.arange(n) % 10
    labels = stream(seed, split, 2**31).permutation(labels)
    pixels = np.stack(
        [render_glyph(int(y), size, stream(seed, split, i)).reshape(-1) for i, y in enumerate(labels)]
    ) if n else np.zeros((0, size * size))
    return ImageDataset(pixels, labels, size, size, 10)


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_mnist(mnist_dir, split):
    names = MNIST_FILES[split]
    paths = []
    for name in names:
        for candidate in (name, name + ".gz"):
            p = os.path.join(mnist_dir, candidate)
            if os.path.exists(p):
                paths.append(p)
                break
        else:
            raise FileNotFoundError(
                f"MNIST file {name} not found in {mnist_dir}; "
                "omit the MNIST directory to use the builtin synthetic glyph source"
            )
    return load_idx(*paths)


@dataclass(frozen=True)
class BenchmarkConfig:
    n_train: int = 2000
    n_test: int = 1000
    factor: int = 2
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    mnist_dir: str = None


def make_desk_benchmark(seed, config=None):
    """Return ``(source_train, source_test, target_test)`` at 14 x 14.

    Source splits hold each image together with its inversion.  The target
    split is a fresh draw from the source generator (never one of the source
    test images), blended with noise backgrounds.
    """
    config = config or BenchmarkConfig()
    if config.mnist_dir is not None:
        pick = stream(seed, 10)
        train = load_mnist(config.mnist_dir, "train")
        test = load_mnist(config.mnist_dir, "test")
        train_idx = pick.permutation(train.n)[: config.n_train]
        test_idx = pick.permutation(test.n)
        train = train.subset(np.sort(train_idx))
        twin = test.subset(np.sort(test_idx[config.n_test : 2 * config.n_test]))
        test = test.subset(np.sort(test_idx[: config.n_test]))
    else:
        train = synthetic_glyphs(config.n_train, seed, 0)
        test = synthetic_glyphs(config.n_test, seed, 1)
        twin = synthetic_glyphs(config.n_test, seed, 2)
    train, test, twin = (downscale(d, config.factor) for d in (train, test, twin))
    source_train = concat(train, invert(train))
    source_test = concat(test, invert(test))
    target_test = make_target_domain(twin, config.noise, stream(seed, 3))
    return source_train, source_test, target_test


# -------------------------------------------------------------------- images


def image_grid(images, n_cols, pad=1, fill=0.5):
    """Tile ``images`` (n x h x w, values in [0, 1]) into one array, row-major."""
    images = np.asarray(images, dtype=np.float64)
    n, h, w = images.shape
    n_rows = max(1, -(-n // n_cols))
    grid = np.full((n_rows * (h + pad) + pad, n_cols * (w + pad) + pad), fill)
    for i in range(n):
        r, col = divmod(i, n_cols)
        y, x = pad + r * (h + pad), pad + col * (w + pad)
        grid[y : y + h, x : x + w] = images[i]
    return grid


def write_pgm(path, image):
    """Binary PGM (P5, maxval 255)."""
    image = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    h, w = image.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(to_u8(image).tobytes())


def read_pgm(path):
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] != b"P5":
        raise BadMagicError(f"{path}: not a binary PGM")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise TruncatedFileError(f"{path}: incomplete PGM header")
        fields.append(int(data[start:pos]))
    w, h, maxval = fields
    # Exactly one whitespace byte separates the header from the raster.
    pixels = np.frombuffer(data[pos + 1 : pos + 1 + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise TruncatedFileError(f"{path}: expected {w * h} pixels")
    return pixels.reshape(h, w) / maxval
