"""Images, the zero-mean/unit-norm normalization, dot products and file I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateImage, DimensionMismatch, MalformedFile, UnsupportedFormat

DEGENERATE_NORM = 1e-14


@dataclass(frozen=True, eq=False)
class Image:
    """A real raster stored as a (height, width) float64 array, row-major.

    One-dimensional signals are images with ``height == 1``.
    """

    data: np.ndarray
    normalized: bool = False
    _flat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionMismatch(f"expected a non-empty 2D raster, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "_flat", arr.reshape(-1))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def flat(self) -> np.ndarray:
        return self._flat

    @classmethod
    def from_flat(cls, width: int, height: int, values, normalized: bool = False) -> "Image":
        values = np.asarray(values, dtype=np.float64)
        if values.size != width * height:
            raise DimensionMismatch(f"{values.size} values for a {width}x{height} raster")
        return cls(values.reshape(height, width), normalized=normalized)

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height, "data": self.flat.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Image":
        try:
            return cls.from_flat(int(obj["width"]), int(obj["height"]), obj["data"])
        except (KeyError, TypeError, ValueError, DimensionMismatch) as exc:
            raise MalformedFile(f"bad raster JSON: {exc}") from exc


def normalize(raw: Image | np.ndarray) -> Image:
    """Center and scale to unit Euclidean norm.

    Already-normalized images are returned unchanged, which makes the map
    idempotent bit for bit.
    """
    if isinstance(raw, Image):
        if raw.normalized:
            return raw
        arr = raw.data
    else:
        arr = np.asarray(raw, dtype=np.float64)
    if arr.size < 2:
        raise DegenerateImage("need at least two pixels")
    centered = arr - arr.mean()
    norm = np.linalg.norm(centered)
    if norm < DEGENERATE_NORM:
        raise DegenerateImage("constant image carries no information")
    return Image(centered / norm, normalized=True)


def is_normalized(arr: np.ndarray, tol: float = 1e-12) -> bool:
    return abs(arr.mean()) <= tol and abs(np.linalg.norm(arr) - 1.0) <= tol


def dot(a: Image, b: Image) -> float:
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return float(a.flat @ b.flat)


def save_raster_json(image: Image, path) -> None:
    Path(path).write_text(json.dumps(image.to_json()))


def load_raster_json(path) -> Image:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedFile(str(exc)) from exc
    return Image.from_json(obj)


def _pgm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(buf) and buf[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(buf):
            raise MalformedFile("truncated PGM header")
        if buf[pos : pos + 1] == b"#":
            while pos < len(buf) and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(buf) and not buf[pos : pos + 1].isspace():
            pos += 1
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(buf) or not buf[pos : pos + 1].isspace():
        raise MalformedFile("truncated PGM header")
    return tokens, pos + 1


def load_pgm(path) -> Image:
    buf = Path(path).read_bytes()
    if len(buf) < 2:
        raise MalformedFile("truncated PGM header")
    magic = buf[:2]
    if magic in (b"P2", b"P6", b"P3", b"P1", b"P4", b"P5") and magic != b"P5":
        raise UnsupportedFormat(f"only binary P5 is supported, got {magic.decode()}")
    if magic != b"P5":
        raise MalformedFile("not a PGM file")
    tokens, offset = _pgm_tokens(buf[2:], 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise MalformedFile("non-numeric PGM header") from exc
    if width <= 0 or height <= 0:
        raise MalformedFile("empty raster")
    if maxval > 255:
        raise UnsupportedFormat("16-bit PGM is not supported")
    raster = buf[2 + offset :]
    if len(raster) < width * height:
        raise MalformedFile("truncated PGM raster")
    values = np.frombuffer(raster[: width * height], dtype=np.uint8).astype(np.float64)
    return Image(values.reshape(height, width))


def save_pgm(image: Image, path) -> None:
    """Write an 8-bit P5 preview.

    Images whose values are already integers in [0, 255] are written as is
    (so 8-bit data round-trips exactly); anything else is mapped affinely
    from [min, max] onto [0, 255].
    """
    arr = image.data
    if np.all((arr >= 0) & (arr <= 255) & (arr == np.round(arr))):
        q = arr.astype(np.uint8)
    else:
        lo, hi = arr.min(), arr.max()
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        q = np.round((arr - lo) * scale).astype(np.uint8)
    header = f"P5\n{image.width} {image.height}\n255\n".encode()
    Path(path).write_bytes(header + q.tobytes())
