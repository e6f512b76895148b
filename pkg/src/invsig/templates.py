"""Template banks (random, patch, Gabor) with stored orbits, plus
localization diagnostics."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateImage, DimensionMismatch, EmptyBank, MalformedFile
from .groups import GroupSpec, group_from_json, orbit_array
from .image import DEGENERATE_NORM, Image, is_normalized, normalize
from .rng import SplitMix64

MAX_PATCH_ATTEMPTS = 100


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    centered = rows - rows.mean(axis=-1, keepdims=True)
    norms = np.linalg.norm(centered, axis=-1, keepdims=True)
    if np.any(norms < DEGENERATE_NORM):
        raise DegenerateImage("a transformed template is constant")
    return centered / norms


@dataclass(frozen=True, eq=False)
class TemplateBank:
    """K normalized templates and their orbits ``orbits[k, g] = g t^k``."""

    templates: tuple[Image, ...]
    group: GroupSpec
    orbits: np.ndarray  # (K, |G|, npix)
    provenance: dict

    @classmethod
    def build(cls, templates, group: GroupSpec, provenance: dict) -> "TemplateBank":
        templates = tuple(normalize(t) for t in templates)
        if not templates:
            raise EmptyBank("a template bank needs at least one template")
        for t in templates:
            if t.shape != group.shape:
                raise DimensionMismatch(f"template {t.shape} vs group raster {group.shape}")
        flat = np.stack([t.flat for t in templates])
        orbits = orbit_array(group, flat)
        if group.exact:
            renorm = _normalize_rows(orbits)
            drift = np.max(np.abs(renorm - orbits))
            if drift > 1e-12:
                raise AssertionError(f"permutation orbit not normalized (drift {drift:g})")
        else:
            orbits = _normalize_rows(orbits)
        orbits.setflags(write=False)
        return cls(templates, group, orbits, dict(provenance))

    @property
    def K(self) -> int:
        return len(self.templates)

    @property
    def dims(self) -> tuple[int, int]:
        return self.group.shape

    @cached_property
    def _digest(self) -> str:
        h = hashlib.sha256(self.group.key().encode())
        h.update(np.ascontiguousarray(self.orbits).tobytes())
        return h.hexdigest()[:16]

    def bank_id(self) -> str:
        return self._digest

    def to_json(self) -> dict:
        return {
            "provenance": self.provenance,
            "group": self.group.to_json(),
            "K": self.K,
            "dims": {"width": self.dims[1], "height": self.dims[0]},
            "templates": [t.to_json() for t in self.templates],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TemplateBank":
        try:
            group = group_from_json(obj["group"])
            templates = [Image.from_json(t) for t in obj["templates"]]
            if len(templates) != int(obj["K"]):
                raise MalformedFile("K does not match the number of templates")
            # stored rasters are already normalized; keep them bit for bit
            if not all(is_normalized(t.data) for t in templates):
                raise MalformedFile("stored templates are not zero-mean and unit-norm")
            templates = [Image(t.data, normalized=True) for t in templates]
            return cls.build(templates, group, obj["provenance"])
        except KeyError as exc:
            raise MalformedFile(f"bank file missing {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "TemplateBank":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise MalformedFile(str(exc)) from exc
        return cls.from_json(obj)


def make_random_bank(group: GroupSpec, K: int, seed: int) -> TemplateBank:
    """K i.i.d. standard-normal templates on the group's raster, normalized."""
    if K < 1:
        raise EmptyBank("K must be at least 1")
    rng = SplitMix64(seed)
    h, w = group.shape
    raw = rng.normal(K * h * w).reshape(K, h, w)
    return TemplateBank.build([Image(r) for r in raw], group, {"kind": "random", "seed": seed})


@dataclass(frozen=True)
class GaborParams:
    sigma: float
    omega0: float
    orientation: float = 0.0
    center: tuple[float, float] | None = None  # (row, col); raster center when None

    def validate(self) -> None:
        if not self.sigma > 0:
            raise ConfigError("sigma must be positive")
        band = abs(self.omega0) * self.sigma
        # omega0 = 0 is the Gaussian limit and is always admitted
        if self.omega0 != 0 and not (0.5 <= band <= math.pi * self.sigma):
            raise ConfigError(
                f"|omega0|*sigma = {band:.4g} outside the admissible band [0.5, pi*sigma]"
            )

    def to_json(self) -> dict:
        out = {"sigma": self.sigma, "omega0": self.omega0, "orientation": self.orientation}
        if self.center is not None:
            out["center"] = list(self.center)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GaborParams":
        try:
            center = obj.get("center")
            return cls(
                float(obj["sigma"]),
                float(obj["omega0"]),
                float(obj.get("orientation", 0.0)),
                tuple(center) if center is not None else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad Gabor parameters: {exc}") from exc


def gabor_raw(shape, p: GaborParams) -> np.ndarray:
    """Un-normalized cosine-phase Gabor ``cos(w0 u) exp(-(u^2+v^2)/(2 s^2))``."""
    p.validate()
    h, w = shape
    cy, cx = p.center if p.center is not None else ((h - 1) / 2.0, (w - 1) / 2.0)
    yy, xx = np.meshgrid(np.arange(h) - cy, np.arange(w) - cx, indexing="ij")
    c, s = math.cos(p.orientation), math.sin(p.orientation)
    u = xx * c + yy * s
    v = -xx * s + yy * c
    return np.cos(p.omega0 * u) * np.exp(-(u * u + v * v) / (2.0 * p.sigma**2))


def make_gabor_bank(group: GroupSpec, params) -> TemplateBank:
    params = list(params)
    if not params:
        raise EmptyBank("need at least one Gabor")
    templates = [normalize(gabor_raw(group.shape, p)) for p in params]
    prov = {"kind": "gabor", "params": [p.to_json() for p in params]}
    return TemplateBank.build(templates, group, prov)


def embed_centered(patch: np.ndarray, shape) -> np.ndarray:
    """Zero-pad a patch into the middle of a raster of the given shape."""
    h, w = shape
    ph, pw = patch.shape
    if ph > h or pw > w:
        raise DimensionMismatch(f"patch {patch.shape} larger than raster {shape}")
    out = np.zeros((h, w))
    y0, x0 = (h - ph) // 2, (w - pw) // 2
    out[y0 : y0 + ph, x0 : x0 + pw] = patch
    return out


def make_patch_bank(group: GroupSpec, sources, K: int, patch_dims, seed: int) -> TemplateBank:
    """K patches cut at seeded uniform positions from the source images.

    Flat patches are redrawn; after ``MAX_PATCH_ATTEMPTS`` consecutive flat
    draws the bank is declared degenerate.
    """
    sources = [s.data if isinstance(s, Image) else np.asarray(s, dtype=np.float64) for s in sources]
    if not sources:
        raise ConfigError("no source images")
    ph, pw = patch_dims
    for s in sources:
        if s.shape[0] < ph or s.shape[1] < pw:
            raise DimensionMismatch(f"source {s.shape} smaller than patch {patch_dims}")
    rng = SplitMix64(seed)
    templates = []
    while len(templates) < K:
        for _attempt in range(MAX_PATCH_ATTEMPTS):
            u = rng.uniform(3)
            src = sources[int(u[0] * len(sources))]
            y = int(u[1] * (src.shape[0] - ph + 1))
            x = int(u[2] * (src.shape[1] - pw + 1))
            patch = src[y : y + ph, x : x + pw]
            if np.linalg.norm(patch - patch.mean()) >= DEGENERATE_NORM:
                break
        else:
            raise DegenerateImage(f"{MAX_PATCH_ATTEMPTS} consecutive flat patches")
        templates.append(normalize(embed_centered(patch, group.shape)))
    prov = {"kind": "patches", "seed": seed, "patch_dims": list(patch_dims), "n_sources": len(sources)}
    return TemplateBank.build(templates, group, prov)


def localization_profile(image: Image, template: Image, group: GroupSpec) -> list[tuple[int, float]]:
    """``<I, g t>`` for every element, in element-index order."""
    if image.shape != template.shape or image.shape != group.shape:
        raise DimensionMismatch(f"{image.shape}, {template.shape}, group {group.shape}")
    t = normalize(template).flat
    values = orbit_array(group, t) @ image.flat
    return [(g, float(v)) for g, v in enumerate(values)]


def default_delta(npix: int) -> float:
    return 5.0 / math.sqrt(npix)


def localization_support(profile, delta: float) -> set[int]:
    """Elements whose dot product exceeds ``delta`` in magnitude."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    return {g for g, v in profile if abs(v) > delta}


def heisenberg_product(t: np.ndarray, orientation: float = 0.0) -> float:
    """Space-frequency spread product ``dx * dw`` of a raster template.

    Spreads are square roots of the trace of second central moments of the
    energy densities ``|t|^2`` (space) and ``|T|^2`` (frequency).  The
    frequency moments use the half-plane ``w . e >= 0`` with ``e`` the
    modulation direction, so a real Gabor's mirrored lobe is not counted as
    spread.  A continuous Gaussian gives exactly 1 with these definitions.
    """
    h, w = t.shape
    energy = t * t
    yy, xx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    total = energy.sum()
    my, mx = (energy * yy).sum() / total, (energy * xx).sum() / total
    var_x = (energy * ((yy - my) ** 2 + (xx - mx) ** 2)).sum() / total

    spec = np.abs(np.fft.fft2(t)) ** 2
    wy, wx = np.meshgrid(2 * np.pi * np.fft.fftfreq(h), 2 * np.pi * np.fft.fftfreq(w), indexing="ij")
    proj = wx * math.cos(orientation) + wy * math.sin(orientation)
    weight = np.where(proj > 1e-12, 1.0, np.where(np.abs(proj) <= 1e-12, 0.5, 0.0))
    spec = spec * weight
    stotal = spec.sum()
    mwy, mwx = (spec * wy).sum() / stotal, (spec * wx).sum() / stotal
    var_w = (spec * ((wy - mwy) ** 2 + (wx - mwx) ** 2)).sum() / stotal
    return math.sqrt(var_x * var_w)
