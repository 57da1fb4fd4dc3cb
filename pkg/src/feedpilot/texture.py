"""Ripple-activity estimation from the cropped feeding region.

A pluggable extractor turns the crop into a multi-stage pyramid of feature
maps; the activity index is the spread of per-stage spreads of per-map
variances.  The built-in reference extractor uses a fixed 3x3 filter bank so
results are deterministic and dependency-free; pyramids produced by an
external convolutional network can be loaded from files instead.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, EmptyInputError, ParseError, ValidationError
from .geometry import RipplePair, corners_of

DEFAULT_STAGES = 5

# Fixed 3x3 bank: average, adjacent-difference gradients (horizontal,
# vertical, both diagonals), Laplacian, and two ring filters.  Adjacent
# differences rather than centered ones so a 2-pixel-period texture still
# responds.
_K = np.array
FILTER_BANK: tuple[np.ndarray, ...] = (
    _K([[1, 1, 1], [1, 1, 1], [1, 1, 1]], dtype=float) / 9.0,
    _K([[0, 0, 0], [-1, 1, 0], [0, 0, 0]], dtype=float),
    _K([[0, -1, 0], [0, 1, 0], [0, 0, 0]], dtype=float),
    _K([[-1, 0, 0], [0, 1, 0], [0, 0, 0]], dtype=float),
    _K([[0, 0, -1], [0, 1, 0], [0, 0, 0]], dtype=float),
    _K([[0, 1, 0], [1, -4, 1], [0, 1, 0]], dtype=float),
    _K([[1, 1, 1], [1, -8, 1], [1, 1, 1]], dtype=float) / 8.0,
    _K([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=float) / 8.0,
)


@dataclass(frozen=True)
class GrayImage:
    """Grayscale image with intensities in [0, 1], row-major (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=float)
        if p.ndim != 2 or p.size == 0:
            raise ValidationError(f"image must be a non-empty 2-d array, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("image contains non-finite values")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValidationError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class FeaturePyramid:
    """Stages of feature maps; map dimensions are uniform within a stage.

    ``truncated`` marks pyramids cut short because a stage input fell below
    the 3x3 filter size.
    """

    stages: tuple[tuple[np.ndarray, ...], ...]
    truncated: bool = False

    def __post_init__(self):
        stages = tuple(tuple(np.asarray(m, dtype=float) for m in stage) for stage in self.stages)
        if not stages:
            raise ValidationError("pyramid must have at least one stage")
        for i, stage in enumerate(stages):
            if not stage:
                raise ValidationError(f"stage {i} has no feature maps")
            shape = stage[0].shape
            if any(m.shape != shape for m in stage):
                raise ValidationError(f"stage {i} maps have mixed shapes")
        object.__setattr__(self, "stages", stages)

    @property
    def omega(self) -> int:
        return len(self.stages)


def rgb_to_gray(rgb: np.ndarray) -> np.ndarray:
    """Luminance conversion with weights 0.299 / 0.587 / 0.114."""
    a = np.asarray(rgb, dtype=float)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValidationError(f"expected (h, w, 3) array, got shape {a.shape}")
    return a[:, :, 0] * 0.299 + a[:, :, 1] * 0.587 + a[:, :, 2] * 0.114


def read_pgm(path) -> GrayImage:
    """Load an 8-bit binary PGM (P5), mapping intensities to [0, 1] by /255."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        m = re.compile(rb"\s*(#[^\n]*\n|\S+)").match(data, pos)
        if m is None:
            raise ParseError(f"truncated PGM header in {path}")
        pos = m.end()
        tok = m.group(1)
        if not tok.startswith(b"#"):
            tokens.append(tok)
    if tokens[0] != b"P5":
        raise ParseError(f"{path} is not a binary PGM (P5), magic {tokens[0]!r}")
    width, height, maxval = (int(t) for t in tokens[1:])
    if not (0 < maxval <= 255):
        raise ParseError(f"{path}: only 8-bit PGM supported, maxval {maxval}")
    # exactly one whitespace byte separates the header from the raster
    raster = data[pos + 1 : pos + 1 + width * height]
    if len(raster) < width * height:
        raise ParseError(f"{path}: raster shorter than {width}x{height}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width) / 255.0
    return GrayImage(pixels=pixels)


def write_pgm(path, image: GrayImage) -> None:
    data = np.round(image.pixels * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{image.width} {image.height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def crop_region(image: GrayImage, pair: RipplePair) -> GrayImage:
    """Crop from tl(r1) to br(r2), rounded outward and clamped to the image.

    The rectangle spans componentwise min/max of the two corners using
    half-open pixel intervals; a rectangle that misses the image entirely
    falls back to the nearest single pixel.
    """
    a = corners_of(pair.r1).tl
    b = corners_of(pair.r2).br
    x0f, x1f = min(a[0], b[0]), max(a[0], b[0])
    y0f, y1f = min(a[1], b[1]), max(a[1], b[1])
    w, h = image.width, image.height
    x0 = min(max(math.floor(x0f), 0), w - 1)
    x1 = min(max(math.ceil(x1f), x0 + 1), w)
    y0 = min(max(math.floor(y0f), 0), h - 1)
    y1 = min(max(math.ceil(y1f), y0 + 1), h)
    return GrayImage(pixels=image.pixels[y0:y1, x0:x1])


def _mean_pool2(a: np.ndarray) -> np.ndarray:
    """2x downsampling by 2x2 block means; odd trailing rows/columns dropped."""
    h2 = (a.shape[0] // 2) * 2
    w2 = (a.shape[1] // 2) * 2
    return a[:h2, :w2].reshape(h2 // 2, 2, w2 // 2, 2).mean(axis=(1, 3))


class ReferenceExtractor:
    """Deterministic fixed-filter pyramid extractor.

    Each stage convolves the previous stage's average map with the 8-kernel
    bank (reflect boundary) and mean-pools 2x for the next stage.  Stages
    whose input falls below 3x3 are dropped and the pyramid is flagged
    truncated.
    """

    def __init__(self, stages: int = DEFAULT_STAGES):
        if stages < 1:
            raise ConfigError(f"stages must be >= 1, got {stages}")
        self.stages = stages

    def extract(self, image: GrayImage) -> FeaturePyramid:
        current = image.pixels
        built: list[tuple[np.ndarray, ...]] = []
        truncated = False
        for _ in range(self.stages):
            if current.shape[0] < 3 or current.shape[1] < 3:
                truncated = True
                break
            maps = tuple(ndimage.convolve(current, k, mode="reflect") for k in FILTER_BANK)
            built.append(maps)
            current = _mean_pool2(maps[0])
        if not built:
            raise ValidationError(
                f"image {image.height}x{image.width} too small for even one 3x3 stage"
            )
        return FeaturePyramid(stages=tuple(built), truncated=truncated)


def extract_features(extractor, image: GrayImage) -> FeaturePyramid:
    """Run a configured extractor over an image."""
    return extractor.extract(image)


def map_variance(feature_map) -> float:
    """Population variance of all entries of one feature map.

    Entries are shifted by the first element before the moment computation so
    a bitwise-constant map yields exactly zero (the plain mean can be one ulp
    off the common value, leaving squared-ulp dirt).
    """
    m = np.asarray(feature_map, dtype=float)
    if m.size == 0:
        raise EmptyInputError("feature map is empty")
    return float(np.var(m - m.flat[0]))


def stage_sigma(variances) -> float:
    """Population standard deviation of the per-map variances of one stage."""
    v = np.asarray(list(variances), dtype=float)
    if v.size == 0:
        raise EmptyInputError("stage has no per-map variances")
    return float(np.std(v))


def global_sigma(stage_sigmas) -> float:
    """Population standard deviation across the per-stage values."""
    s = np.asarray(list(stage_sigmas), dtype=float)
    if s.size == 0:
        raise EmptyInputError("no stage values")
    return float(np.std(s))


def pyramid_sigma(pyramid: FeaturePyramid) -> float:
    """Activity index of a pyramid: the full variance cascade."""
    return global_sigma(
        stage_sigma(map_variance(m) for m in stage) for stage in pyramid.stages
    )


def activity_series(sigmas, window: int) -> list[float]:
    """Trailing-window average; the prefix averages the available frames.

    Each entry sums its window slice directly (no running accumulator), so
    values match an independent recomputation bit for bit.
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    values = [float(v) for v in sigmas]
    out: list[float] = []
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out.append(sum(values[lo : i + 1]) / (i + 1 - lo))
    return out


def save_pyramid(path, pyramid: FeaturePyramid) -> None:
    """Write a pyramid as text: 'omega N', then per stage 'phi h w' + maps."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"omega {pyramid.omega}\n")
        for stage in pyramid.stages:
            h, w = stage[0].shape
            fh.write(f"{len(stage)} {h} {w}\n")
            for m in stage:
                for row in m:
                    fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_pyramid(path) -> FeaturePyramid:
    """Read a pyramid file produced externally (arbitrary phi per stage)."""
    with open(path, "r", encoding="utf-8") as fh:
        tokens = fh.read().split()
    try:
        if tokens[0] != "omega":
            raise ValueError(f"expected 'omega' header, got {tokens[0]!r}")
        omega = int(tokens[1])
        if omega < 1:
            raise ValueError(f"omega must be >= 1, got {omega}")
        pos = 2
        stages = []
        for _ in range(omega):
            phi, h, w = (int(t) for t in tokens[pos : pos + 3])
            pos += 3
            if phi < 1 or h < 1 or w < 1:
                raise ValueError(f"bad stage header phi={phi} h={h} w={w}")
            maps = []
            for _ in range(phi):
                flat = np.array([float(t) for t in tokens[pos : pos + h * w]])
                if flat.size != h * w:
                    raise ValueError("map data truncated")
                pos += h * w
                maps.append(flat.reshape(h, w))
            stages.append(tuple(maps))
        if pos != len(tokens):
            raise ValueError(f"{len(tokens) - pos} trailing tokens")
    except (IndexError, ValueError) as exc:
        raise ParseError(f"corrupt pyramid file {path}: {exc}") from exc
    return FeaturePyramid(stages=tuple(stages))
