"""Stacked HW-modules over nested pooling windows G_1 c ... c G_L.

Layer l maps the previous layer's group-indexed feature map
``mu_{l-1}: G -> R^C`` to simple responses
``nu_l^k(g) = <mu_{l-1}, g t_l^k>`` and pools them over the shifted window
``g G_l``.  For ``l = 1`` the input is the image and the templates are an
ordinary :class:`TemplateBank`.  Between layers each map is centered and
scaled to unit norm; the removed ``(mean, norm)`` pair is kept.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateImage, DimensionMismatch
from .groups import GroupSpec, PoolingWindow, act, group_from_json
from .hw import PoolingSpec, Signature, pool_array, signature_distance
from .image import DEGENERATE_NORM, Image
from .rng import SplitMix64
from .templates import TemplateBank


@dataclass(frozen=True, eq=False)
class FeatureBank:
    """Templates living in L^2(G) x R^C with compact support.

    ``weights[k, j, c]`` is the value of template k at group element
    ``support[j]`` in channel c; the template vanishes off the support.
    """

    group: GroupSpec
    support: tuple[int, ...]
    weights: np.ndarray  # (K, |S|, C)
    provenance: dict

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 3 or w.shape[1] != len(self.support):
            raise DimensionMismatch("weights must have shape (K, |support|, C)")
        for s in self.support:
            self.group.check(int(s))
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def channels(self) -> int:
        return self.weights.shape[2]

    def dense(self) -> np.ndarray:
        """Templates as full (K, |G|, C) arrays."""
        out = np.zeros((self.K, self.group.order, self.channels))
        out[:, list(self.support), :] = self.weights
        return out

    def bank_id(self) -> str:
        return self._digest

    @cached_property
    def _digest(self) -> str:
        h = hashlib.sha256(self.group.key().encode())
        h.update(np.asarray(self.support, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        return {
            "group": self.group.to_json(),
            "support": list(self.support),
            "weights": self.weights.tolist(),
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FeatureBank":
        return cls(group_from_json(obj["group"]), tuple(obj["support"]),
                   np.asarray(obj["weights"], dtype=np.float64), obj.get("provenance", {}))


@dataclass(frozen=True, eq=False)
class LayerConfig:
    window: PoolingWindow
    bank: TemplateBank | FeatureBank
    pooling: PoolingSpec


@dataclass(frozen=True, eq=False)
class FeatureMap:
    layer: int
    raw: np.ndarray  # (|G|, K, N) before normalization
    values: np.ndarray  # (|G|, K*N) normalized
    mean: float
    norm: float

    def reconstruct(self) -> np.ndarray:
        """The pre-normalization map from the normalized values and the record."""
        return (self.values * self.norm + self.mean).reshape(self.raw.shape)

    def to_json(self) -> dict:
        g, k, n = self.raw.shape
        return {
            "layer": self.layer,
            "mean": self.mean,
            "norm": self.norm,
            "shape": [g, k, n],
            "raster": {"width": k * n, "height": g, "data": self.values.reshape(-1).tolist()},
        }


def layer_simple(feature, bank: TemplateBank | FeatureBank, method: str = "direct") -> np.ndarray:
    """Simple responses ``nu[g, k]`` of a layer, shape (|G|, K).

    ``feature`` is an :class:`Image` for a :class:`TemplateBank` and a
    ``(|G|, C)`` array for a :class:`FeatureBank`.  ``method="fft"`` uses
    circular cross-correlation and is only available for Torus2D.
    """
    if isinstance(bank, TemplateBank):
        if not isinstance(feature, Image) or feature.shape != bank.dims:
            raise DimensionMismatch("layer 1 expects an image on the bank's raster")
        return (bank.orbits @ feature.flat).T
    group = bank.group
    mu = np.asarray(feature, dtype=np.float64)
    if mu.shape != (group.order, bank.channels):
        raise DimensionMismatch(f"feature map {mu.shape} vs ({group.order}, {bank.channels})")
    if method == "fft":
        return _layer_simple_fft(mu, bank)
    # <mu, g t> = sum_s sum_c mu[g s, c] t[s, c]
    gathered = mu[group.table[:, list(bank.support)]]  # (|G|, |S|, C)
    return np.einsum("gsc,ksc->gk", gathered, bank.weights)


def _layer_simple_fft(mu: np.ndarray, bank: FeatureBank) -> np.ndarray:
    group = bank.group
    if group.kind != "Torus2D":
        raise ConfigError("the frequency-domain path is only defined for Torus2D")
    h, w = group.shape
    fm = np.fft.fft2(mu.T.reshape(-1, h, w))  # (C, h, w)
    ft = np.fft.fft2(bank.dense().transpose(0, 2, 1).reshape(bank.K, -1, h, w))  # (K, C, h, w)
    corr = np.fft.ifft2((fm[None] * np.conj(ft)).sum(axis=1)).real  # (K, h, w)
    return corr.reshape(bank.K, -1).T


def _pool_windows(simple: np.ndarray, window: PoolingWindow, spec: PoolingSpec) -> np.ndarray:
    """raw[g, k, n] = pooled eta_n(nu_k) over g G_l, summed in member order."""
    group = window.group
    idx = group.table[:, list(window.members)]  # (|G|, V)
    out = np.empty((group.order, simple.shape[1], spec.N))
    for k in range(simple.shape[1]):
        out[:, k, :] = pool_array(simple[:, k], idx, spec)
    return out


def _normalize_map(raw: np.ndarray, strict: bool) -> tuple[np.ndarray, float, float]:
    flat = raw.reshape(raw.shape[0], -1)
    mean = float(flat.mean())
    centered = flat - mean
    norm = float(np.linalg.norm(centered))
    if norm < DEGENERATE_NORM:
        if strict:
            raise DegenerateImage("pooled feature map is constant")
        return centered, mean, 0.0
    return centered / norm, mean, norm


def layer_complex(simple: np.ndarray, config: LayerConfig, layer: int = 1, strict: bool = True) -> FeatureMap:
    """Windowed group-convolutional pooling followed by map normalization.

    With ``strict=False`` a constant map is recorded with norm 0 instead of
    raising; :func:`forward` uses this for the top layer, whose output is
    not fed any further.
    """
    group = config.window.group
    simple = np.asarray(simple, dtype=np.float64)
    if simple.ndim != 2 or simple.shape[0] != group.order:
        raise DimensionMismatch(f"simple responses {simple.shape} vs |G| = {group.order}")
    raw = _pool_windows(simple, config.window, config.pooling)
    values, mean, norm = _normalize_map(raw, strict)
    raw.setflags(write=False)
    values.setflags(write=False)
    return FeatureMap(layer, raw, values, mean, norm)


def check_nested(layers) -> None:
    if not layers:
        raise ConfigError("a hierarchy needs at least one layer")
    group = layers[0].window.group
    prev: set[int] = set()
    for i, cfg in enumerate(layers):
        if cfg.window.group.key() != group.key() or cfg.bank.group.key() != group.key():
            raise ConfigError(f"layer {i + 1} acts through a different group")
        if not group.is_group:
            raise ConfigError("hierarchies need a group with a composition table")
        members = set(cfg.window.members)
        if not prev <= members:
            raise ConfigError(f"window of layer {i + 1} does not contain the window of layer {i}")
        prev = members
        if i == 0 and not isinstance(cfg.bank, TemplateBank):
            raise ConfigError("layer 1 needs an image-space TemplateBank")
        if i > 0 and not isinstance(cfg.bank, FeatureBank):
            raise ConfigError(f"layer {i + 1} needs a FeatureBank")


@dataclass(frozen=True, eq=False)
class ForwardResult:
    maps: list[FeatureMap]
    top: Signature
    records: list[tuple[float, float]]


def forward(image: Image, layers, method: str = "direct") -> ForwardResult:
    check_nested(layers)
    feature = image
    maps = []
    for i, cfg in enumerate(layers):
        nu = layer_simple(feature, cfg.bank, method=method)
        fmap = layer_complex(nu, cfg, layer=i + 1, strict=i < len(layers) - 1)
        maps.append(fmap)
        feature = fmap.values
    last = layers[-1]
    top = Signature(maps[-1].raw[0], last.bank.bank_id(), last.pooling.spec_id(), last.window.window_id())
    return ForwardResult(maps, top, [(m.mean, m.norm) for m in maps])


def covariance_errors(image: Image, g: int, layers) -> list[float]:
    """Per-layer max |mu_l(gI)(h) - mu_l(I)(g^{-1} h)| on pre-normalization maps."""
    group = layers[0].window.group
    g = group.check(g)
    moved = act(group, g, image)
    a = forward(image, layers).maps
    b = forward(moved, layers).maps
    perm = group.table[group.inverse[g]]  # h -> g^{-1} h
    return [float(np.max(np.abs(mb.raw - ma.raw[perm]))) for ma, mb in zip(a, b)]


def covariance_check(image: Image, g: int, layers) -> float:
    return max(covariance_errors(image, g, layers))


def _local_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b, axis=1).mean())


def parts_profile(image: Image, g: int, layers) -> list[tuple[int, float]]:
    """Invariance error of the local signature at the identity window, per layer."""
    group = layers[0].window.group
    moved = act(group, group.check(g), image)
    a = forward(image, layers).maps
    b = forward(moved, layers).maps
    return [(m.layer, _local_distance(m.raw[0], n.raw[0])) for m, n in zip(a, b)]


def make_feature_bank(exemplars, layers, K: int, support: PoolingWindow, seed: int) -> FeatureBank:
    """Patches of forwarded exemplars used as next-layer templates.

    Each template copies the normalized map of a seeded exemplar on
    ``c S`` for a seeded center c, then is centered and scaled to unit
    norm on its support.
    """
    group = support.group
    rng = SplitMix64(seed)
    maps = [forward(e, layers).maps[-1].values for e in exemplars]
    S = list(support.members)
    weights = []
    while len(weights) < K:
        u = rng.uniform(2)
        fmap = maps[int(u[0] * len(maps))]
        c = int(u[1] * group.order)
        patch = fmap[group.table[c, S]]
        patch = patch - patch.mean()
        norm = np.linalg.norm(patch)
        if norm < DEGENERATE_NORM:
            continue
        weights.append(patch / norm)
    prov = {"kind": "feature_patches", "seed": seed, "n_exemplars": len(maps)}
    return FeatureBank(group, tuple(S), np.stack(weights), prov)


def top_distance(a: ForwardResult, b: ForwardResult) -> float:
    return signature_distance(a.top, b.top)


def save_config(layers, path) -> None:
    """Hierarchy config JSON with banks inlined under ``bank-ref`` keys."""
    banks, entries = {}, []
    for cfg in layers:
        ref = cfg.bank.bank_id()
        banks[ref] = {"type": "image" if isinstance(cfg.bank, TemplateBank) else "feature",
                      "bank": cfg.bank.to_json()}
        entries.append({"window": cfg.window.to_json(), "bank-ref": ref, "pooling": cfg.pooling.to_json()})
    Path(path).write_text(json.dumps({"layers": entries, "banks": banks}))


def load_config(path) -> list[LayerConfig]:
    obj = json.loads(Path(path).read_text())
    layers = []
    for entry in obj["layers"]:
        stored = obj["banks"][entry["bank-ref"]]
        bank = (TemplateBank.from_json(stored["bank"]) if stored["type"] == "image"
                else FeatureBank.from_json(stored["bank"]))
        layers.append(LayerConfig(PoolingWindow.from_json(entry["window"]), bank,
                                  PoolingSpec.from_json(entry["pooling"])))
    return layers
