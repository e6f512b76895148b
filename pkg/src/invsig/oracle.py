"""Brute-force ground truth on finite groups: canonical orbits, exact
projection-distribution comparison, orbit distances and the template-count
calibration."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DimensionMismatch, EmptyBank, OrbitsNotDistinct
from .groups import GroupSpec, orbit_array
from .hw import PoolingSpec, orbit_hausdorff, pool_array
from .image import Image, normalize
from .rng import SplitMix64, derive_seed
from .templates import TemplateBank

ORBIT_TOL = 1e-9
ROUND_DECIMALS = 9


@dataclass(frozen=True, eq=False)
class OrbitSet:
    """The |G| transforms of an image sorted lexicographically after
    rounding to 1e-9."""

    members: np.ndarray  # (|G|, npix), sorted rows

    @classmethod
    def of(cls, image: Image, group: GroupSpec) -> "OrbitSet":
        if image.shape != group.shape:
            raise DimensionMismatch(f"image {image.shape} vs group raster {group.shape}")
        rows = orbit_array(group, image.flat)
        keys = np.round(rows, ROUND_DECIMALS)
        order = np.lexsort(keys.T[::-1])
        return cls(rows[order])

    def __len__(self):
        return len(self.members)


def orbits_equal(a: Image, b: Image, group: GroupSpec) -> bool:
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    oa, ob = OrbitSet.of(a, group), OrbitSet.of(b, group)
    return bool(np.all(np.abs(oa.members - ob.members) <= ORBIT_TOL))


def _templates(bank, group: GroupSpec) -> np.ndarray:
    """(K, |G|, npix) orbits from a bank or a plain sequence of templates."""
    if isinstance(bank, TemplateBank):
        return bank.orbits
    templates = [normalize(t) for t in bank]
    if not templates:
        raise EmptyBank("no templates to project on")
    return orbit_array(group, np.stack([t.flat for t in templates]))


def distributions_equal(a: Image, b: Image, group: GroupSpec, bank) -> bool:
    """Compare, per template, the sorted projections <gI, t^k> of both images.

    ``False`` certifies distinct orbits; ``True`` is only as strong as the
    number of templates allows.
    """
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    orbits = _templates(bank, group)
    if orbits.shape[1] != group.order:
        raise DimensionMismatch("bank was built on a different group")
    pa = np.sort(orbits @ a.flat, axis=1)
    pb = np.sort(orbits @ b.flat, axis=1)
    return bool(np.all(np.abs(pa - pb) <= ORBIT_TOL))


def hausdorff_orbit_distance(a: Image, b: Image, group: GroupSpec) -> float:
    return orbit_hausdorff(a, b, group)


def hausdorff_double_loop(a: Image, b: Image, group: GroupSpec) -> float:
    """min over all (g, g') of ||g I - g' I'||; reference for the single loop."""
    oa = orbit_array(group, a.flat)
    ob = orbit_array(group, b.flat)
    d2 = (oa * oa).sum(1)[:, None] + (ob * ob).sum(1)[None, :] - 2 * oa @ ob.T
    best = np.unravel_index(np.argmin(d2), d2.shape)
    return float(np.linalg.norm(oa[best[0]] - ob[best[1]]))


def assert_distinct_orbits(images, group: GroupSpec) -> None:
    for i, j in combinations(range(len(images)), 2):
        if orbits_equal(images[i], images[j], group):
            raise OrbitsNotDistinct(f"images {i} and {j} lie on the same orbit")


# --- template-count calibration -------------------------------------------------


def _reservoir_rows(group: GroupSpec, images: np.ndarray, count: int, seed: int,
                    spec: PoolingSpec, chunk: int = 256) -> np.ndarray:
    """Pooled signatures of every image against ``count`` random templates.

    Returns (count, n_images, N).  Templates are drawn and consumed in
    chunks so the full reservoir of orbits is never held in memory.
    """
    rng = SplitMix64(seed)
    npix = group.npix
    out = np.empty((count, images.shape[0], spec.N))
    full = np.arange(group.order)
    for start in range(0, count, chunk):
        m = min(chunk, count - start)
        raw = rng.normal(m * npix).reshape(m, npix)
        raw -= raw.mean(axis=1, keepdims=True)
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        orbits = orbit_array(group, raw)  # (m, |G|, npix)
        responses = (orbits.reshape(-1, npix) @ images.T).reshape(m, group.order, -1).transpose(0, 2, 1)
        out[start : start + m] = pool_array(responses, full, spec)
    return out


@dataclass
class Calibration:
    n: int
    epsilon: float
    delta: float
    K_measured: int
    c_fit: float
    seeds: int
    K_ref: int
    reservoir_drift: float
    capped: bool


def _pair_contributions(rows: np.ndarray, pairs) -> np.ndarray:
    """Z[k, p] = ||mu^k(I) - mu^k(I')|| for each template and image pair."""
    i, j = np.array(pairs).T
    return np.linalg.norm(rows[:, i, :] - rows[:, j, :], axis=2)


def _bound_constant(K: int, n: int, epsilon: float, delta: float) -> float:
    """c solving K = (2 / (c eps^2)) log(n / delta)."""
    return 2.0 * math.log(n / delta) / (epsilon**2 * K)


@dataclass(frozen=True, eq=False)
class Reservoir:
    """Pooled signatures of a fixed image list against ``2 * K_ref`` random
    templates, shape (2*K_ref, n, N).  Shared across calibration runs so the
    expensive projections are done once."""

    rows: np.ndarray
    K_ref: int
    images: tuple
    group: GroupSpec
    spec: PoolingSpec

    @classmethod
    def draw(cls, images, group: GroupSpec, K_ref: int, spec: PoolingSpec, seed: int = 0) -> "Reservoir":
        arr = np.stack([im.flat for im in images])
        rows = _reservoir_rows(group, arr, 2 * K_ref, seed, spec)
        return cls(rows, K_ref, tuple(images), group, spec)


def calibrate_template_count(images, group: GroupSpec, epsilon: float, delta: float, seeds,
                             spec: PoolingSpec | None = None, K_upper: int = 128,
                             reservoir: Reservoir | None = None, subset=None,
                             reservoir_seed: int = 0, verify_distinct: bool = True) -> Calibration:
    """Smallest K whose empirical distance stays within epsilon of the
    reference on every pair, for a majority of seeds.

    The reference distance uses a reservoir of ``64 * K_upper`` random
    templates; seeded banks are subsets of that reservoir, so the full
    reservoir reproduces the reference exactly.  The reservoir's own
    convergence is measured against a reservoir twice as large.
    ``subset`` restricts a precomputed reservoir to some of its images.
    """
    images = list(images) if images is not None else []
    spec = PoolingSpec.cdf_bins(8, s=0.05) if spec is None else spec
    K_ref = 64 * K_upper
    if reservoir is None:
        idx = list(range(len(images)))
    else:
        if reservoir.K_ref != K_ref:
            raise ValueError("reservoir size does not match K_upper")
        spec = reservoir.spec
        idx = list(range(len(reservoir.images))) if subset is None else list(subset)
        images = [reservoir.images[i] for i in idx]
    n = len(images)
    if n < 2:
        raise OrbitsNotDistinct("need at least two images")
    if verify_distinct:
        assert_distinct_orbits(images, group)
    if reservoir is None:
        reservoir = Reservoir.draw(images, group, K_ref, spec, reservoir_seed)
    pairs = [(idx[i], idx[j]) for i, j in combinations(range(n), 2)]
    z = _pair_contributions(reservoir.rows, pairs)
    d_big = z.mean(axis=0)
    z = z[:K_ref]
    d_ref = z.mean(axis=0)
    drift = float(np.max(np.abs(d_big - d_ref)))
    seeds = list(seeds)
    perms = [SplitMix64(derive_seed(s, "calibration-bank")).permutation(K_ref) for s in seeds]

    def ok(K: int) -> bool:
        wins = 0
        for perm in perms:
            d_hat = z[perm[:K]].mean(axis=0)
            wins += bool(np.all(np.abs(d_ref - d_hat) <= epsilon))
        return 2 * wins > len(perms)

    lo, hi = 1, K_upper
    capped = not ok(hi)
    if not capped:
        while lo < hi:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid + 1
    K = hi
    return Calibration(n, epsilon, delta, K, _bound_constant(K, n, epsilon, delta), len(seeds),
                       K_ref, drift, capped)


def fit_log_growth(ns, Ks) -> tuple[float, float]:
    """Least-squares a, b in K ~ a log n + b, with b lifted so the line
    bounds every point from above."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.asarray(Ks, dtype=float)
    a, b = np.polyfit(x, y, 1)
    b += max(0.0, float(np.max(y - (a * x + b))))
    return float(a), float(b)


def calibration_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "epsilon", "delta", "K_measured", "c_fit", "seed-count"])
    for c in rows:
        writer.writerow([c.n, repr(c.epsilon), repr(c.delta), c.K_measured, repr(c.c_fit), c.seeds])
    return buf.getvalue()
