"""Synthetic sprite datasets standing in for rendered object categories."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .groups import GroupSpec, act, group_from_json
from .image import Image, normalize, save_pgm, save_raster_json
from .oracle import assert_distinct_orbits
from .rng import SplitMix64, derive_seed

SPRITES = ("blob", "bar-composite", "ring")


def _grid(shape):
    h, w = shape
    return np.mgrid[0:h, 0:w].astype(np.float64)


def make_sprite(kind: str, shape, seed: int) -> Image:
    """A normalized sprite drawn near the raster center."""
    rng = SplitMix64(seed)
    yy, xx = _grid(shape)
    h, w = shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    scale = min(h, w) / 16.0
    if kind == "blob":
        f = np.zeros(shape)
        for _ in range(3):
            u = rng.uniform(4)
            py, px = cy + (u[0] - 0.5) * 6 * scale, cx + (u[1] - 0.5) * 6 * scale
            s = (0.8 + 1.2 * u[2]) * scale
            f += (1.0 if u[3] < 0.7 else -0.6) * np.exp(-((yy - py) ** 2 + (xx - px) ** 2) / (2 * s * s))
    elif kind == "bar-composite":
        f = np.zeros(shape)
        for _ in range(2):
            u = rng.uniform(4)
            theta = np.pi * u[0]
            py, px = cy + (u[1] - 0.5) * 4 * scale, cx + (u[2] - 0.5) * 4 * scale
            along = (xx - px) * np.cos(theta) + (yy - py) * np.sin(theta)
            across = -(xx - px) * np.sin(theta) + (yy - py) * np.cos(theta)
            length = (2.5 + 2.0 * u[3]) * scale
            f += np.exp(-(along**2) / (2 * length**2) - across**2 / (2 * (0.6 * scale) ** 2))
    elif kind == "ring":
        u = rng.uniform(2)
        radius = (2.5 + 2.0 * u[0]) * scale
        width = (0.6 + 0.5 * u[1]) * scale
        r = np.hypot(yy - cy, xx - cx)
        f = np.exp(-((r - radius) ** 2) / (2 * width**2))
    else:
        raise ConfigError(f"unknown sprite kind {kind!r}")
    return normalize(f)


@dataclass
class Sample:
    image: Image
    label: int
    element: int


@dataclass
class SyntheticDataset:
    group: GroupSpec
    classes: list[dict]
    samples: list[Sample]
    config: dict = field(default_factory=dict)

    def manifest(self) -> dict:
        return {
            "config": self.config,
            "group": self.group.to_json(),
            "classes": self.classes,
            "samples": [
                {"file": f"img_{i:05d}.json", "class": s.label, "element": s.element}
                for i, s in enumerate(self.samples)
            ],
        }

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.samples])

    def matrix(self) -> np.ndarray:
        return np.stack([s.image.flat for s in self.samples])


def generate(config: dict, seed: int, mode: str | None = None) -> SyntheticDataset:
    """Build a dataset from a config; every image is a function of (config, seed).

    Config keys: ``group`` (GroupSpec JSON), ``classes`` (list of
    ``{"sprite", "seed"}``), ``samples_per_class``, ``mode``
    (``rectified`` | ``unrectified``) and ``noise`` (norm of the additive
    Gaussian clutter relative to the unit-norm sprite).
    """
    try:
        group = group_from_json(config["group"])
        classes = [dict(c) for c in config["classes"]]
        per_class = int(config["samples_per_class"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad dataset config: {exc}") from exc
    mode = mode or config.get("mode", "unrectified")
    if mode not in ("rectified", "unrectified"):
        raise ConfigError(f"unknown mode {mode!r}")
    if not group.exact:
        raise ConfigError("datasets need a permutation group")
    noise = float(config.get("noise", 0.5))
    exemplars = [make_sprite(c["sprite"], group.shape, int(c["seed"])) for c in classes]
    assert_distinct_orbits(exemplars, group)
    rng = SplitMix64(derive_seed(seed, "gen-data"))
    npix = group.npix
    samples = []
    for label, ex in enumerate(exemplars):
        for _ in range(per_class):
            g = int(rng.integers(1, group.order)[0]) if mode == "unrectified" else 0
            clutter = rng.normal(npix) * (noise / np.sqrt(npix))
            img = normalize(act(group, g, ex).data + clutter.reshape(group.shape))
            samples.append(Sample(img, label, g))
    cfg = dict(config, mode=mode, seed=seed)
    return SyntheticDataset(group, classes, samples, cfg)


def write_dataset(ds: SyntheticDataset, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, s in enumerate(ds.samples):
        save_raster_json(s.image, out / f"img_{i:05d}.json")
        save_pgm(s.image, out / f"img_{i:05d}.pgm")
    (out / "manifest.json").write_text(json.dumps(ds.manifest(), indent=1, sort_keys=True) + "\n")


def load_dataset(path) -> SyntheticDataset:
    """Regenerate a dataset from its manifest (images are a function of config + seed)."""
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text() if path.is_dir() else path.read_text())
    cfg = manifest["config"]
    return generate(cfg, int(cfg["seed"]), cfg["mode"])


def directory_digest(path) -> str:
    h = hashlib.sha256()
    for f in sorted(Path(path).iterdir()):
        h.update(f.name.encode())
        h.update(f.read_bytes())
    return h.hexdigest()
