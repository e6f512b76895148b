"""Pinned fixtures shared by the ``check`` suites and the test-suite.

Every constructor is a pure function of its arguments; the numbers used
as pass/fail thresholds were measured once on these fixtures.
"""
from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

from .groups import GroupSpec, PoolingWindow, box_window, cyclic1d, full_window, make_smooth_warp, torus2d, warp
from .hierarchy import LayerConfig, make_feature_bank
from .hw import PoolingSpec
from .image import Image, normalize
from .rng import SplitMix64
from .templates import GaborParams, TemplateBank, make_gabor_bank, make_patch_bank, make_random_bank

FIXTURE_ENV = "ISE_FIXTURE_DIR"


def fixture_root() -> Path:
    """Directory holding golden files; ``$ISE_FIXTURE_DIR`` overrides the packaged copy."""
    env = os.environ.get(FIXTURE_ENV)
    return Path(env) if env else Path(__file__).parent / "data"


def seeded_images(shape, count: int, seed: int) -> list[Image]:
    """``count`` normalized Gaussian images drawn from one stream."""
    rng = SplitMix64(seed)
    h, w = shape
    return [normalize(rng.normal(h * w).reshape(h, w)) for _ in range(count)]


def compact_patch(shape, center, half: int, seed: int) -> Image:
    """A seeded square patch, zero-mean on its support, embedded at ``center``."""
    rng = SplitMix64(seed)
    side = 2 * half + 1
    p = rng.normal(side * side).reshape(side, side)
    out = np.zeros(shape)
    cy, cx = center
    out[cy - half : cy + half + 1, cx - half : cx + half + 1] = p - p.mean()
    return normalize(out)


# --- single-layer module -------------------------------------------------

def golden_signature_setup():
    """Torus2D(8,8), 16 random templates, 16 sigmoid bins, one seeded image."""
    group = torus2d(8, 8)
    bank = make_random_bank(group, 16, seed=2024)
    image = seeded_images(group.shape, 1, seed=77)[0]
    return image, bank, PoolingSpec.cdf_bins(16, s=0.05)


def stability_setup(s: float | None = None, N: int = 8, pairs: int = 100):
    """Random-image pairs on Torus2D(8,8) with a 16-template bank.

    By default the bins are auto-scaled so that N * L_eta = 1; passing
    ``s`` gives unit-gain bins with that smoothing instead.
    """
    group = torus2d(8, 8)
    bank = make_random_bank(group, 16, seed=31)
    spec = PoolingSpec.cdf_bins(N, s=0.05, auto_scale=True) if s is None else PoolingSpec.cdf_bins(N, s=s)
    imgs = seeded_images(group.shape, 2 * pairs, seed=4242)
    return [(imgs[2 * i], imgs[2 * i + 1]) for i in range(pairs)], bank, spec


# Localization boundary on a line: template half-width b', image
# half-width a, window half-width b.  Invariance survives shifts up to
# b - b' - a.
LOC_N, LOC_TEMPLATE_HALF, LOC_IMAGE_HALF, LOC_WINDOW_HALF = 64, 4, 2, 10


def _compact_line(n: int, half: int, seed: int) -> Image:
    v = SplitMix64(seed).normal(2 * half + 1)
    v = v - v.mean()
    # push both ends away from zero so the support is exactly 2*half+1
    v[0] += math.copysign(0.5, v[0])
    v[-1] += math.copysign(0.5, v[-1])
    v = v - v.mean()
    x = np.zeros(n)
    c = n // 2
    x[c - half : c + half + 1] = v
    return normalize(x)


def localization_setup():
    group = cyclic1d(LOC_N)
    image = _compact_line(LOC_N, LOC_IMAGE_HALF, seed=1)
    template = _compact_line(LOC_N, LOC_TEMPLATE_HALF, seed=2)
    bank = TemplateBank.build([template], group, {"kind": "compact-line", "seed": 2})
    window = box_window(group, LOC_WINDOW_HALF)
    return image, bank, window, PoolingSpec.cdf_bins(8, s=0.05)


def localization_boundary() -> int:
    return LOC_WINDOW_HALF - LOC_TEMPLATE_HALF - LOC_IMAGE_HALF


# --- hierarchy ------------------------------------------------------------

def covariance_layers(group: GroupSpec | None = None):
    """Two layers on a permutation group: 4 random templates, then 3 feature templates."""
    group = torus2d(8, 8) if group is None else group
    spec = PoolingSpec.cdf_bins(4, s=0.1)
    if group.kind in ("Torus2D", "Cyclic1D"):
        w1, w2, support = box_window(group, 1), box_window(group, 2), box_window(group, 1)
    else:
        w1 = PoolingWindow(group, (0, 1))
        w2 = PoolingWindow(group, tuple(range(min(4, group.order))))
        support = PoolingWindow(group, (0, group.order - 1))
    l1 = LayerConfig(w1, make_random_bank(group, 4, seed=11), spec)
    exemplars = seeded_images(group.shape, 3, seed=12)
    l2 = LayerConfig(w2, make_feature_bank(exemplars, [l1], 3, support, seed=13), spec)
    return [l1, l2]


PARTS_N = 24
PARTS_SHIFT = (0, 5)


def parts_setup():
    """Three layers on Torus2D(24,24) with windows of radius 1, 2 and 10.

    The layer-1 templates and the test image are 3x3 patches, so the
    layer-1 response lives within radius 2 of the identity.  Layers 2
    and 3 mix channels only (support {e}), so supports grow by exactly
    the pooling radius per layer and a shift of 5 fits inside G_3.
    """
    n = PARTS_N
    group = torus2d(n, n)
    c = (n // 2, n // 2)
    spec = PoolingSpec.cdf_bins(4, s=0.1)
    b1 = TemplateBank.build([compact_patch(group.shape, c, 1, 100 + i) for i in range(3)], group,
                            {"kind": "compact", "seed": 100})
    l1 = LayerConfig(box_window(group, 1), b1, spec)
    exemplars = [compact_patch(group.shape, c, 1, 200 + i) for i in range(3)]
    identity = PoolingWindow(group, (0,))
    l2 = LayerConfig(box_window(group, 2), make_feature_bank(exemplars, [l1], 3, identity, seed=5), spec)
    l3 = LayerConfig(box_window(group, 10), make_feature_bank(exemplars, [l1, l2], 3, identity, seed=6), spec)
    image = compact_patch(group.shape, c, 1, 1)
    return image, group.element_of_shift(*PARTS_SHIFT), [l1, l2, l3]


def hierarchy_stability_setup(pairs: int = 100):
    """Two auto-scaled layers on Torus2D(8,8); the top layer pools over all of G."""
    group = torus2d(8, 8)
    spec = PoolingSpec.cdf_bins(4, s=0.1, auto_scale=True)
    l1 = LayerConfig(box_window(group, 1), make_random_bank(group, 4, seed=3), spec)
    exemplars = seeded_images(group.shape, 4, seed=500)
    l2 = LayerConfig(full_window(group), make_feature_bank(exemplars, [l1], 4, box_window(group, 1), seed=5), spec)
    imgs = seeded_images(group.shape, 2 * pairs, seed=1000)
    return [(imgs[2 * i], imgs[2 * i + 1]) for i in range(pairs)], [l1, l2]


# --- calibration ----------------------------------------------------------

CALIBRATION_NS = (4, 8, 16, 32)
CALIBRATION_EPSILONS = (0.02, 0.01)


def calibration_setup():
    """32 random 8x8 images, 8 sigmoid bins; subsets are prefixes of the list."""
    group = torus2d(8, 8)
    return seeded_images(group.shape, max(CALIBRATION_NS), seed=11), group, PoolingSpec.cdf_bins(8, s=0.05)


# --- comparative experiments ---------------------------------------------

def gabor_range_setup():
    """Ten 5x5 zero-mean sprites on Torus2D(16,16), an 8-orientation Gabor
    bank and a radius-5 pooling window."""
    group = torus2d(16, 16)
    images = [compact_patch(group.shape, (8, 8), 2, s) for s in range(10)]
    gabor = make_gabor_bank(group, [GaborParams(1.0, math.pi / 2, k * math.pi / 8) for k in range(8)])
    return images, gabor, box_window(group, 5), PoolingSpec.cdf_bins(16, s=0.05)


WARP_N = 24


def _grid(n):
    return np.mgrid[0:n, 0:n].astype(float)


def _blob(yy, xx, cy, cx, s, amp):
    return amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s * s))


def face(jitter: float = 0.0, seed: int = 0, n: int = WARP_N) -> Image:
    """A smooth face-like sprite: a broad disc with two eyes and a mouth cut out."""
    j = SplitMix64(seed).normal(8) * jitter
    yy, xx = _grid(n)
    c = n / 2
    f = (_blob(yy, xx, c, c, 5, 1.0)
         - _blob(yy, xx, c - 2 + j[0], c - 2.5 + j[1], 1.0, 0.8)
         - _blob(yy, xx, c - 2 + j[2], c + 2.5 + j[3], 1.0, 0.8)
         - _blob(yy, xx, c + 3 + j[4], c + j[5], 1.2, 0.6))
    return normalize(f)


def blob_clutter(seed: int, n: int = WARP_N) -> Image:
    """Four signed Gaussian blobs at seeded positions and widths."""
    rng = SplitMix64(seed)
    yy, xx = _grid(n)
    f = np.zeros((n, n))
    for _ in range(4):
        u = rng.uniform(3)
        sign = 1.0 if rng.uniform(1)[0] > 0.5 else -1.0
        f += sign * _blob(yy, xx, u[0] * n, u[1] * n, 1 + 3 * u[2], 1.0)
    return normalize(f)


def warp_setup():
    """Face under a seeded smooth warp, a face-patch bank and distractors."""
    n = WARP_N
    group = torus2d(n, n)
    field = make_smooth_warp((n, n), seed=7, radius=2.0, max_r=1.0)
    sources = [warp(field, r, face(0.3, s)).data for s in range(1, 4) for r in (0.0, 0.25, 0.5)]
    class_bank = make_patch_bank(group, sources, 8, (n, n), seed=3)
    distractors = [blob_clutter(100 + s) for s in range(6)]
    r_grid = [float(r) for r in np.linspace(0.0, 0.5, 11)]
    return face(), field, r_grid, class_bank, full_window(group), PoolingSpec.max(), distractors


# --- sample complexity ----------------------------------------------------

STANDARD_DATASET = {
    "group": {"kind": "Torus2D", "w": 16, "h": 16},
    "classes": [{"sprite": "blob", "seed": 1}, {"sprite": "ring", "seed": 2}],
    "samples_per_class": 50,
    "noise": 1.0,
}
STANDARD_DATASET_SEED = 42
STANDARD_BANK_SEED = 5
STANDARD_SPLIT_SEED = 7
STANDARD_M_GRID = (1, 2, 4, 8, 16)


def standard_bank() -> TemplateBank:
    return make_random_bank(torus2d(16, 16), 16, seed=STANDARD_BANK_SEED)


def standard_pooling() -> PoolingSpec:
    return PoolingSpec.cdf_bins(16, s=0.05)
