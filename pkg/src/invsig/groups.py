"""Finite groups acting on rasters, pooling windows and smooth warps.

Conventions: ``act(g, I)(x) = I(g^{-1} x)``.  For the permutation kinds this
is stored as a source-index table ``src[g]`` with
``act(g, I).flat[i] == I.flat[src[g][i]]``, which gives
``src[g o h] = src[h][src[g]]``.  Element 0 is always the identity.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, EmptyWindow, InvalidElement, NotAGroup, OutOfRange
from .image import Image
from .rng import SplitMix64

EXACT_KINDS = ("Cyclic1D", "Torus2D", "Rot4", "Dihedral8")
APPROX_KINDS = ("RotInterp", "ScaleSet")


@dataclass(frozen=True, eq=False)
class GroupSpec:
    kind: str
    params: tuple  # sorted (key, value) pairs, hashable
    shape: tuple[int, int]  # raster (height, width) the group acts on
    order: int
    src: np.ndarray | None  # (order, npix) source indices; None for approximate kinds
    table: np.ndarray | None  # table[g, h] = index of g o h
    inverse: np.ndarray | None

    @property
    def exact(self) -> bool:
        return self.src is not None

    @property
    def is_group(self) -> bool:
        return self.table is not None

    @property
    def npix(self) -> int:
        return self.shape[0] * self.shape[1]

    @property
    def param(self) -> dict:
        return dict(self.params)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        for k, v in self.params:
            out[k] = list(v) if isinstance(v, tuple) else v
        return out

    def key(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def compose(self, g: int, h: int) -> int:
        self._need_table()
        self.check(g)
        self.check(h)
        return int(self.table[g, h])

    def inv(self, g: int) -> int:
        self._need_table()
        self.check(g)
        return int(self.inverse[g])

    def check(self, g) -> int:
        if isinstance(g, (bool, np.bool_)) or not isinstance(g, (int, np.integer)):
            raise InvalidElement(f"element index must be an integer, got {g!r}")
        if not 0 <= g < self.order:
            raise InvalidElement(f"element {g} outside 0..{self.order - 1}")
        return int(g)

    def _need_table(self):
        if self.table is None:
            raise NotAGroup(f"{self.kind} has no composition table")

    def shift_of(self, g: int) -> tuple[int, int]:
        """Signed (dy, dx) translation of element g, for Cyclic1D/Torus2D."""
        g = self.check(g)
        h, w = self.shape
        if self.kind == "Cyclic1D":
            dx = g if g <= w // 2 else g - w
            return 0, dx
        if self.kind == "Torus2D":
            dy, dx = divmod(g, w)
            return (dy if dy <= h // 2 else dy - h), (dx if dx <= w // 2 else dx - w)
        raise NotAGroup(f"{self.kind} is not a translation group")

    def element_of_shift(self, dy: int, dx: int) -> int:
        h, w = self.shape
        if self.kind == "Cyclic1D":
            if dy != 0:
                raise InvalidElement("Cyclic1D has no vertical shifts")
            return dx % w
        if self.kind == "Torus2D":
            return (dy % h) * w + (dx % w)
        raise NotAGroup(f"{self.kind} is not a translation group")


def _table_from_src(src: np.ndarray) -> np.ndarray:
    lookup = {row.tobytes(): i for i, row in enumerate(src)}
    if len(lookup) != len(src):
        raise ValueError("duplicate group elements")
    n = len(src)
    table = np.empty((n, n), dtype=np.int64)
    for g in range(n):
        for h in range(n):
            key = src[h][src[g]].tobytes()
            if key not in lookup:
                raise ValueError("permutation set is not closed")
            table[g, h] = lookup[key]
    return table


def _inverse_from_table(table: np.ndarray) -> np.ndarray:
    rows, cols = np.nonzero(table == 0)
    inverse = np.full(len(table), -1, dtype=np.int64)
    inverse[rows] = cols
    if np.any(inverse < 0):
        raise ValueError("missing inverse")
    return inverse


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


@lru_cache(maxsize=64)
def _build(kind: str, params: tuple) -> GroupSpec:
    p = dict(params)
    src = table = None
    if kind == "Cyclic1D":
        d = int(p["d"])
        shape = (1, d)
        i = np.arange(d)
        src = np.stack([(i - xi) % d for xi in range(d)])
        table = (i[:, None] + i[None, :]) % d
    elif kind == "Torus2D":
        w, h = int(p["w"]), int(p["h"])
        shape = (h, w)
        yy, xx = np.divmod(np.arange(h * w), w)
        g = np.arange(h * w)
        gy, gx = np.divmod(g, w)
        src = ((yy[None, :] - gy[:, None]) % h) * w + (xx[None, :] - gx[:, None]) % w
        table = ((gy[:, None] + gy[None, :]) % h) * w + (gx[:, None] + gx[None, :]) % w
    elif kind in ("Rot4", "Dihedral8"):
        n = int(p["n"])
        shape = (n, n)
        idx = np.arange(n * n).reshape(n, n)
        perms = [np.rot90(idx, k).reshape(-1) for k in range(4)]
        if kind == "Dihedral8":
            perms += [np.rot90(np.fliplr(idx), k).reshape(-1) for k in range(4)]
        src = np.stack(perms)
        table = _table_from_src(src)
    elif kind == "RotInterp":
        n = int(p["n_angles"])
        shape = (int(p["h"]), int(p["w"]))
        i = np.arange(n)
        table = (i[:, None] + i[None, :]) % n
    elif kind == "ScaleSet":
        scales = [Fraction(s) for s in p["scales"]]
        if not scales or any(s <= 0 for s in scales) or scales[0] != 1:
            raise ValueError("ScaleSet needs positive scales with the identity scale 1 first")
        shape = (int(p["h"]), int(p["w"]))
    else:
        raise ValueError(f"unknown group kind {kind!r}")
    order = len(src) if src is not None else (len(table) if table is not None else len(p["scales"]))
    inverse = _inverse_from_table(table) if table is not None else None
    if src is not None:
        src = src.astype(np.int64)
    _freeze(src, table, inverse)
    return GroupSpec(kind, params, shape, order, src, table, inverse)


def make_group(kind: str, **params) -> GroupSpec:
    if kind == "ScaleSet":
        params["scales"] = tuple(str(Fraction(s)) for s in params["scales"])
    return _build(kind, tuple(sorted(params.items())))


def cyclic1d(d: int) -> GroupSpec:
    return make_group("Cyclic1D", d=d)


def torus2d(w: int, h: int) -> GroupSpec:
    return make_group("Torus2D", w=w, h=h)


def rot4(n: int) -> GroupSpec:
    return make_group("Rot4", n=n)


def dihedral8(n: int) -> GroupSpec:
    return make_group("Dihedral8", n=n)


def rot_interp(n_angles: int, w: int, h: int) -> GroupSpec:
    return make_group("RotInterp", n_angles=n_angles, w=w, h=h)


def scale_set(scales, w: int, h: int) -> GroupSpec:
    return make_group("ScaleSet", scales=scales, w=w, h=h)


def group_from_json(obj: dict) -> GroupSpec:
    obj = dict(obj)
    kind = obj.pop("kind")
    if "scales" in obj:
        obj["scales"] = tuple(obj["scales"])
    return make_group(kind, **obj)


def bilinear(arr: np.ndarray, ys: np.ndarray, xs: np.ndarray, boundary: str = "wrap") -> np.ndarray:
    """Bilinear samples of ``arr`` at fractional (row, col) positions.

    At integer positions the result equals the stored pixel exactly.
    """
    h, w = arr.shape
    y0 = np.floor(ys)
    x0 = np.floor(xs)
    fy = ys - y0
    fx = xs - x0
    y0 = y0.astype(np.int64)
    x0 = x0.astype(np.int64)

    def at(yi, xi):
        if boundary == "wrap":
            return arr[yi % h, xi % w]
        inside = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        return np.where(inside, arr[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)], 0.0)

    return (
        (1 - fy) * (1 - fx) * at(y0, x0)
        + (1 - fy) * fx * at(y0, x0 + 1)
        + fy * (1 - fx) * at(y0 + 1, x0)
        + fy * fx * at(y0 + 1, x0 + 1)
    )


def _grid(shape):
    h, w = shape
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return yy, xx, (h - 1) / 2.0, (w - 1) / 2.0


def _approx_act(group: GroupSpec, g: int, arr: np.ndarray) -> np.ndarray:
    yy, xx, cy, cx = _grid(group.shape)
    if group.kind == "RotInterp":
        theta = 2.0 * np.pi * g / group.order
        c, s = np.cos(theta), np.sin(theta)
        # inverse rotation of the output grid
        dy, dx = yy - cy, xx - cx
        sy = cy + (c * dy - s * dx)
        sx = cx + (s * dy + c * dx)
    else:
        scale = float(Fraction(group.param["scales"][g]))
        sy = cy + (yy - cy) / scale
        sx = cx + (xx - cx) / scale
    return bilinear(arr, sy, sx, boundary="zero")


def act(group: GroupSpec, g: int, image: Image) -> Image:
    """Apply element ``g`` to ``image``.

    Permutation kinds are exact and keep the normalized flag; interpolated
    kinds return an un-normalized image.
    """
    g = group.check(g)
    if image.shape != group.shape:
        raise DimensionMismatch(f"image {image.shape} vs group raster {group.shape}")
    if g == 0:
        return image
    if group.exact:
        out = image.flat[group.src[g]].reshape(image.shape)
        return Image(out, normalized=image.normalized)
    return Image(_approx_act(group, g, image.data))


def orbit_array(group: GroupSpec, flat: np.ndarray) -> np.ndarray:
    """All transforms of a flattened raster as an (order, npix) array."""
    if flat.shape[-1] != group.npix:
        raise DimensionMismatch(f"{flat.shape[-1]} pixels vs group raster {group.shape}")
    if group.exact:
        return flat[..., group.src]
    if flat.ndim > 1:
        return np.stack([orbit_array(group, row) for row in flat])
    arr = flat.reshape(group.shape)
    return np.stack([flat] + [_approx_act(group, g, arr).reshape(-1) for g in range(1, group.order)])


def orbit(group: GroupSpec, image: Image) -> list[Image]:
    return [act(group, g, image) for g in range(group.order)]


@dataclass(frozen=True, eq=False)
class PoolingWindow:
    """A subset G0 of group elements, stored sorted."""

    group: GroupSpec
    members: tuple[int, ...]

    def __post_init__(self):
        members = [self.group.check(int(m)) for m in self.members]
        if not members:
            raise EmptyWindow("pooling window has no members")
        if len(set(members)) != len(members):
            raise ValueError("duplicate window members")
        object.__setattr__(self, "members", tuple(sorted(members)))

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def is_full(self) -> bool:
        return self.size == self.group.order

    def index(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    def window_id(self) -> str:
        if self.is_full:
            return "full"
        return "pog:" + hashlib.sha256(np.asarray(self.members, dtype=np.int64).tobytes()).hexdigest()[:16]

    def to_json(self) -> dict:
        return {"group": self.group.to_json(), "members": list(self.members)}

    @classmethod
    def from_json(cls, obj: dict) -> "PoolingWindow":
        return cls(group_from_json(obj["group"]), tuple(obj["members"]))


def full_window(group: GroupSpec) -> PoolingWindow:
    return PoolingWindow(group, tuple(range(group.order)))


def box_window(group: GroupSpec, radius: int, radius_y: int | None = None) -> PoolingWindow:
    """Translations with |dx| <= radius and |dy| <= radius_y (defaults to radius)."""
    ry = radius if radius_y is None else radius_y
    if group.kind == "Cyclic1D":
        ry = 0
    members = {
        group.element_of_shift(dy, dx)
        for dy in range(-ry, ry + 1)
        for dx in range(-radius, radius + 1)
    }
    return PoolingWindow(group, tuple(members))


def window_shift(window: PoolingWindow, g: int) -> PoolingWindow:
    """The left coset-like set g G0 = {g o h : h in G0}."""
    group = window.group
    g = group.check(g)
    group._need_table()
    return PoolingWindow(group, tuple(int(group.table[g, h]) for h in window.members))


@dataclass(frozen=True, eq=False)
class SmoothWarp:
    """Per-pixel displacement field tau(x) = (dy, dx) scaled by a parameter r."""

    field: np.ndarray  # (h, w, 2)
    radius: float
    max_r: float = 1.0

    def __post_init__(self):
        f = np.array(self.field, dtype=np.float64)
        if f.ndim != 3 or f.shape[2] != 2:
            raise DimensionMismatch("displacement field must have shape (h, w, 2)")
        if np.max(np.hypot(f[..., 0], f[..., 1])) > self.radius + 1e-12:
            raise OutOfRange("displacement exceeds declared radius")
        f.setflags(write=False)
        object.__setattr__(self, "field", f)

    @property
    def shape(self):
        return self.field.shape[:2]

    def to_json(self) -> dict:
        h, w = self.shape
        return {
            "radius": self.radius,
            "max_r": self.max_r,
            "dy": {"width": w, "height": h, "data": self.field[..., 0].reshape(-1).tolist()},
            "dx": {"width": w, "height": h, "data": self.field[..., 1].reshape(-1).tolist()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SmoothWarp":
        h, w = obj["dy"]["height"], obj["dy"]["width"]
        dy = np.asarray(obj["dy"]["data"], dtype=np.float64).reshape(h, w)
        dx = np.asarray(obj["dx"]["data"], dtype=np.float64).reshape(h, w)
        return cls(np.stack([dy, dx], axis=-1), float(obj["radius"]), float(obj["max_r"]))


def _value_noise(shape, cells: int, rng: SplitMix64) -> np.ndarray:
    """Periodic bilinear upsampling of a cells x cells lattice of normals."""
    h, w = shape
    lattice = rng.normal(cells * cells).reshape(cells, cells)
    yy, xx = np.meshgrid(np.arange(h) * cells / h, np.arange(w) * cells / w, indexing="ij")
    return bilinear(lattice, yy, xx, boundary="wrap")


def make_smooth_warp(shape, seed: int, radius: float = 1.0, max_r: float = 1.0) -> SmoothWarp:
    """Seeded two-octave value-noise displacement field, peak magnitude ``radius``."""
    rng = SplitMix64(seed)
    comps = []
    for _ in range(2):
        comps.append(_value_noise(shape, 4, rng) + 0.5 * _value_noise(shape, 8, rng))
    field = np.stack(comps, axis=-1)
    peak = np.max(np.hypot(field[..., 0], field[..., 1]))
    return SmoothWarp(field * (radius / peak) * (1 - 1e-12), radius, max_r)


def constant_warp(shape, dy: float, dx: float, max_r: float = 64.0) -> SmoothWarp:
    field = np.zeros(tuple(shape) + (2,))
    field[..., 0] = dy
    field[..., 1] = dx
    return SmoothWarp(field, float(np.hypot(dy, dx)), max_r)


def warp(w: SmoothWarp, r: float, image: Image) -> Image:
    """output(x) = I(x - r tau(x)), bilinear on the periodic raster."""
    if abs(r) > w.max_r:
        raise OutOfRange(f"|r|={abs(r)} exceeds {w.max_r}")
    if image.shape != w.shape:
        raise DimensionMismatch(f"image {image.shape} vs warp field {w.shape}")
    if r == 0:
        return image
    yy, xx, _, _ = _grid(image.shape)
    out = bilinear(image.data, yy - r * w.field[..., 0], xx - r * w.field[..., 1], boundary="wrap")
    return Image(out)
