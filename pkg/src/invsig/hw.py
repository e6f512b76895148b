"""HW-module: simple-cell dot products against stored template orbits,
complex-cell pooling, signatures and the invariance/stability measurements
built on them."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyWindow,
    IncompatibleSignatures,
    LipschitzBudgetExceeded,
)
from .groups import GroupSpec, PoolingWindow, SmoothWarp, act, full_window, warp
from .image import Image, normalize
from .templates import TemplateBank

POOLING_KINDS = ("cdf_bins", "moments", "max")


def logistic(x, s):
    """sigma_s(x) = 1 / (1 + exp(-x/s)), via tanh so large |x|/s cannot overflow."""
    return 0.5 + 0.5 * np.tanh(np.asarray(x, dtype=np.float64) / (2.0 * s))


@dataclass(frozen=True)
class PoolingSpec:
    """Pooling nonlinearities eta_n.

    ``cdf_bins``: ``eta_n(x) = gain * sigma_s(x - theta_n)`` with thresholds
    ``theta_n = n*delta - 1 - delta/2`` (n = 1..N), a smoothed complementary
    CDF sampled on a grid covering [-1, 1].
    ``moments``: ``eta_n(x) = gain * x**order_n``.
    ``max``: a single value per template, the window maximum.
    """

    kind: str
    N: int = 1
    delta: float = 0.0
    s: float = 0.0
    orders: tuple[int, ...] = ()
    gain: float = 1.0
    thresholds: tuple[float, ...] = field(default=(), compare=False)

    def __post_init__(self):
        if self.kind not in POOLING_KINDS:
            raise ConfigError(f"unknown pooling kind {self.kind!r}")
        if self.kind == "cdf_bins":
            if self.N < 2 or not self.delta > 0 or not self.s > 0:
                raise ConfigError("cdf_bins needs N >= 2, delta > 0, s > 0")
            ths = tuple(n * self.delta - 1.0 - self.delta / 2.0 for n in range(1, self.N + 1))
            object.__setattr__(self, "thresholds", ths)
        elif self.kind == "moments":
            if not self.orders or any(int(o) < 1 for o in self.orders):
                raise ConfigError("moment orders must be a nonempty list of integers >= 1")
            object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
            object.__setattr__(self, "N", len(self.orders))
        else:
            object.__setattr__(self, "N", 1)
        if not self.gain > 0:
            raise ConfigError("gain must be positive")

    @classmethod
    def cdf_bins(cls, N: int, delta: float | None = None, s: float = 0.05, auto_scale: bool = False):
        """Histogram-style pooling; ``auto_scale`` rescales so that N * L_eta = 1."""
        delta = 2.0 / N if delta is None else delta
        spec = cls("cdf_bins", N=N, delta=delta, s=s)
        if auto_scale:
            spec = cls("cdf_bins", N=N, delta=delta, s=s, gain=1.0 / (N * spec.lipschitz()))
        return spec

    @classmethod
    def moments(cls, orders, gain: float = 1.0):
        return cls("moments", orders=tuple(orders), gain=gain)

    @classmethod
    def max(cls):
        return cls("max")

    def lipschitz(self) -> float:
        """max_n Lipschitz constant of eta_n on [-1, 1] (max pooling: 1, sup norm)."""
        if self.kind == "cdf_bins":
            return self.gain / (4.0 * self.s)
        if self.kind == "moments":
            return self.gain * max(self.orders)
        return 1.0

    def budget(self) -> float:
        """N * L_eta, the quantity the stability bound requires to be <= 1."""
        return self.N * self.lipschitz()

    def eta(self, x: np.ndarray) -> np.ndarray:
        """Apply every eta_n to ``x``; output has a trailing axis of length N."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "cdf_bins":
            th = np.asarray(self.thresholds)
            return self.gain * logistic(x[..., None] - th, self.s)
        if self.kind == "moments":
            return self.gain * np.stack([x**o for o in self.orders], axis=-1)
        return x[..., None]

    def to_json(self) -> dict:
        if self.kind == "cdf_bins":
            return {"kind": "cdf_bins", "N": self.N, "delta": self.delta, "s": self.s, "gain": self.gain}
        if self.kind == "moments":
            return {"kind": "moments", "orders": list(self.orders), "gain": self.gain}
        return {"kind": "max"}

    @classmethod
    def from_json(cls, obj: dict) -> "PoolingSpec":
        obj = dict(obj)
        kind = obj.get("kind")
        if kind == "cdf_bins":
            if obj.pop("auto_scale", False):
                return cls.cdf_bins(int(obj["N"]), obj.get("delta"), float(obj.get("s", 0.05)), True)
            N = int(obj["N"])
            return cls("cdf_bins", N=N, delta=float(obj.get("delta", 2.0 / N)),
                       s=float(obj.get("s", 0.05)), gain=float(obj.get("gain", 1.0)))
        if kind == "moments":
            return cls("moments", orders=tuple(obj["orders"]), gain=float(obj.get("gain", 1.0)))
        if kind == "max":
            return cls("max")
        raise ConfigError(f"unknown pooling kind {kind!r}")

    def spec_id(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def pool_array(responses: np.ndarray, index: np.ndarray, spec: PoolingSpec) -> np.ndarray:
    """Pool ``responses[..., index]`` along the last axis.

    The gathered values are reduced in the order given by ``index``; callers
    pass sorted members so the result does not depend on how the window was
    listed.
    """
    if index.size == 0:
        raise EmptyWindow("pooling window has no members")
    vals = responses[..., index]
    if spec.kind == "max":
        return vals.max(axis=-1)[..., None]
    return spec.eta(vals).sum(axis=-2) / index.shape[-1]


def pool(responses, window: PoolingWindow, spec: PoolingSpec) -> list[float]:
    responses = np.asarray(responses, dtype=np.float64)
    if responses.shape != (window.group.order,):
        raise DimensionMismatch(f"{responses.shape[0]} responses for |G| = {window.group.order}")
    return pool_array(responses, window.index(), spec).tolist()


def _all_responses(image: Image, bank: TemplateBank) -> np.ndarray:
    if image.shape != bank.dims:
        raise DimensionMismatch(f"image {image.shape} vs bank raster {bank.dims}")
    return bank.orbits @ image.flat  # (K, |G|)


def simple_responses(image: Image, bank: TemplateBank, k: int) -> list[float]:
    """nu^k(g) = <I, g t^k> in element-index order."""
    if image.shape != bank.dims:
        raise DimensionMismatch(f"image {image.shape} vs bank raster {bank.dims}")
    if not 0 <= k < bank.K:
        raise IndexError(f"template {k} outside 0..{bank.K - 1}")
    return (bank.orbits[k] @ image.flat).tolist()


@dataclass(frozen=True, eq=False)
class Signature:
    values: np.ndarray  # (K, N)
    bank_id: str
    pooling_id: str
    window_id: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or not np.all(np.isfinite(v)):
            raise ValueError("signature values must be a finite K x N matrix")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_json(self) -> dict:
        return {
            "bank-id": self.bank_id,
            "pooling": json.loads(self.pooling_id),
            "window": self.window_id,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Signature":
        return cls(np.asarray(obj["values"], dtype=np.float64), obj["bank-id"],
                   json.dumps(obj["pooling"], sort_keys=True), obj["window"])


def signature(image: Image, bank: TemplateBank, window: PoolingWindow | None, spec: PoolingSpec) -> Signature:
    window = full_window(bank.group) if window is None else window
    if window.group is not bank.group and window.group.key() != bank.group.key():
        raise DimensionMismatch("window and bank act through different groups")
    values = pool_array(_all_responses(image, bank), window.index(), spec)
    return Signature(values, bank.bank_id(), spec.spec_id(), window.window_id())


def signature_distance(a: Signature, b: Signature) -> float:
    """(1/K) sum_k ||mu^k(a) - mu^k(b)||_2."""
    if (a.bank_id, a.pooling_id, a.window_id) != (b.bank_id, b.pooling_id, b.window_id):
        raise IncompatibleSignatures("signatures come from different banks, poolings or windows")
    if a.values.shape != b.values.shape:
        raise IncompatibleSignatures("shape mismatch")
    return float(np.linalg.norm(a.values - b.values, axis=1).mean())


def invariance_error(image: Image, g: int, bank: TemplateBank, window: PoolingWindow | None,
                     spec: PoolingSpec) -> float:
    moved = act(bank.group, g, image)
    if not moved.normalized:
        moved = normalize(moved)
    return signature_distance(signature(image, bank, window, spec), signature(moved, bank, window, spec))


def orbit_hausdorff(image: Image, other: Image, group: GroupSpec) -> float:
    """min_g ||I - g I'||_2; a single loop suffices for unitary actions."""
    if image.shape != other.shape or image.shape != group.shape:
        raise DimensionMismatch(f"{image.shape}, {other.shape}, group {group.shape}")
    if not group.exact:
        raise ValueError("orbit distance needs a permutation group")
    diffs = other.flat[group.src] - image.flat
    return float(np.sqrt(np.min(np.einsum("ij,ij->i", diffs, diffs))))


def stability_check(image: Image, other: Image, bank: TemplateBank, spec: PoolingSpec) -> tuple[float, float]:
    """(signature distance, orbit Hausdorff distance) under full-group pooling.

    The stability bound requires N * L_eta <= 1; larger budgets are refused.
    """
    if spec.budget() > 1.0 + 1e-12:
        raise LipschitzBudgetExceeded(f"N * L_eta = {spec.budget():.6g} > 1")
    if not bank.group.exact:
        raise ValueError("stability check needs a permutation group")
    window = full_window(bank.group)
    lhs = signature_distance(signature(image, bank, window, spec), signature(other, bank, window, spec))
    return lhs, orbit_hausdorff(image, other, bank.group)


def smooth_invariance_profile(image: Image, w: SmoothWarp, r_grid, bank: TemplateBank,
                              window: PoolingWindow | None, spec: PoolingSpec) -> list[tuple[float, float]]:
    """Invariance error of the signature under the smooth warp at each r."""
    base = signature(image, bank, window, spec)
    out = []
    for r in r_grid:
        moved = warp(w, r, image)
        moved = normalize(moved) if not moved.normalized else moved
        out.append((float(r), signature_distance(base, signature(moved, bank, window, spec))))
    return out


def clutter_deviation(image: Image, template: Image, noise_a: np.ndarray, noise_b: np.ndarray) -> float:
    """|<I + n1, t + n2> - <I, t>| with the cluttered vectors re-normalized."""
    cl_i = normalize(image.data + noise_a)
    cl_t = normalize(template.data + noise_b)
    return abs(float(cl_i.flat @ cl_t.flat) - float(image.flat @ template.flat))


def finite_difference_slope(spec: PoolingSpec, grid=None, h: float = 1e-6) -> float:
    """Largest |d eta_n / dx| on [-1, 1] estimated by central differences."""
    grid = np.linspace(-1.0, 1.0, 4001) if grid is None else np.asarray(grid)
    if spec.kind == "max":
        return 1.0
    slope = (spec.eta(grid + h) - spec.eta(grid - h)) / (2 * h)
    return float(np.max(np.abs(slope)))
