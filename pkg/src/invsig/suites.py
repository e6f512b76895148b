"""Property suites run by ``invsig check``.

Each runner returns an :class:`ExperimentReport` whose ``checks`` list
records the measured value, the bound it was held to and the verdict.
Rows follow the usual ``(condition, x, y, stddev)`` layout with the
measured quantity in ``y``.
"""
from __future__ import annotations

import numpy as np

from . import fixtures as fx
from .errors import ConfigError
from .experiments import ExperimentReport
from .groups import dihedral8, rot4, torus2d
from .hierarchy import covariance_errors, forward, layer_simple, parts_profile, top_distance
from .hw import PoolingSpec, invariance_error, stability_check
from .oracle import Reservoir, calibrate_template_count, calibration_csv, fit_log_growth, hausdorff_orbit_distance
from .rng import derive_seed
from .templates import make_random_bank

SUITES = ("invariance", "covariance", "stability", "localization", "parts", "theorem4")


def _check(report: ExperimentReport, name: str, value: float, bound: float, passed: bool) -> None:
    report.checks.append({"name": name, "value": float(value), "bound": float(bound), "passed": bool(passed)})


def _at_most(report, name, value, bound):
    _check(report, name, value, bound, value <= bound)


def _above(report, name, value, bound):
    _check(report, name, value, bound, value > bound)


def run_invariance(config: dict, seed: int) -> ExperimentReport:
    """Full-group signatures are unchanged by every element of permutation groups."""
    count = int(config.get("images", 20))
    report = ExperimentReport("check-invariance", {"images": count, "seed": seed})
    poolings = {"cdf_bins": PoolingSpec.cdf_bins(8, s=0.05), "moments": PoolingSpec.moments([1, 2, 3]),
                "max": PoolingSpec.max()}
    for group in (torus2d(8, 8), rot4(8), dihedral8(8)):
        bank = make_random_bank(group, 8, seed=derive_seed(seed, f"check/invariance/{group.kind}/bank"))
        images = fx.seeded_images(group.shape, count, derive_seed(seed, f"check/invariance/{group.kind}"))
        for kind, spec in poolings.items():
            worst = max(invariance_error(im, g, bank, None, spec) for im in images for g in range(group.order))
            name = f"{group.kind}/{kind}"
            report.rows.append((name, group.order, worst, 0.0))
            _at_most(report, name, worst, 1e-12)
    return report


def run_covariance(config: dict, seed: int) -> ExperimentReport:
    """Pre-normalization maps move with the input on permutation groups."""
    count = int(config.get("images", 3))
    report = ExperimentReport("check-covariance", {"images": count, "seed": seed})
    for group in (torus2d(8, 8), dihedral8(8)):
        layers = fx.covariance_layers(group)
        images = fx.seeded_images(group.shape, count, derive_seed(seed, f"check/covariance/{group.kind}"))
        errs = np.array([covariance_errors(im, g, layers) for im in images for g in range(group.order)])
        for layer, worst in enumerate(errs.max(axis=0), start=1):
            name = f"{group.kind}/layer{layer}"
            report.rows.append((name, layer, float(worst), 0.0))
            _at_most(report, name, worst, 1e-12)
    # frequency-domain layer-2 responses agree with the direct sum
    layers = fx.covariance_layers(torus2d(8, 8))
    gap = 0.0
    for im in fx.seeded_images((8, 8), count, derive_seed(seed, "check/covariance/fft")):
        mu = forward(im, layers[:1]).maps[0].values
        gap = max(gap, float(np.max(np.abs(layer_simple(mu, layers[1].bank, "direct")
                                           - layer_simple(mu, layers[1].bank, "fft")))))
    report.rows.append(("fft-vs-direct", 2, gap, 0.0))
    _at_most(report, "fft-vs-direct", gap, 1e-10)
    return report


def run_stability(config: dict, seed: int) -> ExperimentReport:
    """Signature distances never exceed orbit distances (one layer and two layers).

    Config keys ``s`` and ``N`` replace the auto-scaled bins with unit-gain
    bins; an over-budget choice raises LipschitzBudgetExceeded.
    """
    pairs_n = int(config.get("pairs", 100))
    s = config.get("s")
    N = int(config.get("N", 8))
    report = ExperimentReport("check-stability", {"pairs": pairs_n, "s": s, "N": N})
    pairs, bank, spec = fx.stability_setup(None if s is None else float(s), N, pairs_n)
    ratios = []
    for i, (a, b) in enumerate(pairs):
        lhs, rhs = stability_check(a, b, bank, spec)
        ratios.append(lhs / rhs)
        report.rows.append(("single-layer", i, lhs - rhs, 0.0))
    worst = max(r[2] for r in report.rows)
    _at_most(report, "single-layer lhs-rhs", worst, 1e-12)
    report.rows.append(("single-layer max ratio", pairs_n, max(ratios), 0.0))

    hpairs, layers = fx.hierarchy_stability_setup(pairs_n)
    gaps = []
    for a, b in hpairs:
        d = top_distance(forward(a, layers), forward(b, layers))
        gaps.append(d - hausdorff_orbit_distance(a, b, layers[0].window.group))
    report.rows.append(("hierarchy max lhs-rhs", pairs_n, max(gaps), 0.0))
    _at_most(report, "hierarchy lhs-rhs", max(gaps), 1e-10)
    return report


def run_localization(config: dict, seed: int) -> ExperimentReport:
    """Exact invariance up to the boundary shift b - b' - a, broken beyond it."""
    image, bank, window, spec = fx.localization_setup()
    group = bank.group
    edge = fx.localization_boundary()
    report = ExperimentReport("check-localization", {"boundary": edge})
    errs = {}
    for x in range(0, edge + 5):
        errs[x] = invariance_error(image, group.element_of_shift(0, x), bank, window, spec)
        report.rows.append(("shift", x, errs[x], 0.0))
    _at_most(report, "inside boundary", max(errs[x] for x in range(edge + 1)), 1e-10)
    _above(report, "beyond boundary", max(errs[x] for x in range(edge + 1, edge + 5)), 1e-3)
    return report


def run_parts(config: dict, seed: int) -> ExperimentReport:
    """Invariance to a shift larger than G_1 appears once the window chain covers it."""
    image, g, layers = fx.parts_setup()
    profile = parts_profile(image, g, layers)
    report = ExperimentReport("check-parts", {"shift": list(fx.PARTS_SHIFT), "layers": len(layers)})
    for layer, err in profile:
        report.rows.append(("layer", layer, err, 0.0))
    errs = [e for _, e in profile]
    _above(report, "layer 1", errs[0], 1e-3)
    _at_most(report, "top layer", errs[-1], 1e-10)
    # errors at the invariance floor count as zero
    floored = [0.0 if e <= 1e-10 else e for e in errs]
    rises = max((b - a for a, b in zip(floored, floored[1:])), default=0.0)
    _at_most(report, "non-increasing across layers", rises, 0.0)
    return report


def run_calibration(config: dict, seed: int) -> ExperimentReport:
    """Template counts needed for epsilon-accurate distances, per n and epsilon."""
    ns = [int(n) for n in config.get("ns", fx.CALIBRATION_NS)]
    epsilons = sorted(float(e) for e in config.get("epsilons", fx.CALIBRATION_EPSILONS))
    delta = float(config.get("delta", 0.1))
    seeds = int(config.get("seeds", 5))
    K_upper = int(config.get("K_upper", 128))
    images, group, spec = fx.calibration_setup()
    if max(ns) > len(images):
        raise ConfigError(f"the fixture has {len(images)} images")
    report = ExperimentReport("check-theorem4", {"ns": ns, "epsilons": epsilons, "delta": delta,
                                                 "seeds": seeds, "K_upper": K_upper})
    reservoir = Reservoir.draw(images, group, 64 * K_upper, spec)
    calibrations = []
    table = {}
    for eps in epsilons:
        for n in ns:
            c = calibrate_template_count(None, group, eps, delta, range(seeds), K_upper=K_upper,
                                         reservoir=reservoir, subset=range(n))
            calibrations.append(c)
            table[eps, n] = c.K_measured
            report.rows.append((f"eps={eps!r}", n, c.K_measured, 0.0))
    for n in ns:
        steps = [table[a, n] - table[b, n] for a, b in zip(epsilons, epsilons[1:])]
        _check(report, f"non-increasing in eps at n={n}", min(steps, default=0), 0, min(steps, default=0) >= 0)
    for eps in epsilons:
        a, _ = fit_log_growth(ns, [table[eps, n] for n in ns])
        _above(report, f"log-growth slope at eps={eps!r}", a, 0.0)
    report.artifacts["calibration.csv"] = calibration_csv(calibrations)
    return report


RUNNERS = {
    "invariance": run_invariance,
    "covariance": run_covariance,
    "stability": run_stability,
    "localization": run_localization,
    "parts": run_parts,
    "theorem4": run_calibration,
}


def run_suite(name: str, config: dict | None = None, seed: int = 0) -> ExperimentReport:
    if name not in RUNNERS:
        raise ConfigError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return RUNNERS[name](dict(config or {}), seed)
