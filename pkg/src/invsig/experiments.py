"""Nearest-neighbor sample-complexity runs and the comparative
invariance-range measurements."""
from __future__ import annotations

import hashlib
import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import SyntheticDataset
from .errors import InsufficientSamples
from .groups import act
from .hw import PoolingSpec, signature, signature_distance, smooth_invariance_profile
from .rng import SplitMix64, derive_seed
from .templates import TemplateBank


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list[tuple] = field(default_factory=list)  # (condition, x, y, stddev)
    checks: list[dict] = field(default_factory=list)  # {name, value, bound, passed}
    artifacts: dict[str, str] = field(default_factory=dict)  # extra file name -> text

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.config, sort_keys=True).encode()).hexdigest()[:16]

    def to_csv(self) -> str:
        lines = ["condition,x,y,stddev"]
        lines += [f"{c},{x!r},{y!r},{s!r}" for c, x, y, s in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "experiment": self.experiment,
            "config-hash": self.config_hash(),
            "config": self.config,
            "rows": [list(r) for r in self.rows],
            "checks": self.checks,
            "passed": self.passed,
        }


def correlation_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """1 - Pearson correlation between the rows of a and the rows of b."""
    a = a - a.mean(axis=1, keepdims=True)
    b = b - b.mean(axis=1, keepdims=True)
    a = a / np.linalg.norm(a, axis=1, keepdims=True)
    b = b / np.linalg.norm(b, axis=1, keepdims=True)
    return 1.0 - a @ b.T


def nn_accuracy(train_x, train_y, test_x, test_y) -> float:
    d = correlation_distance_matrix(np.asarray(test_x), np.asarray(train_x))
    pred = np.asarray(train_y)[np.argmin(d, axis=1)]
    return float(np.mean(pred == np.asarray(test_y)))


def represent(ds: SyntheticDataset, bank: TemplateBank | None, spec: PoolingSpec | None) -> np.ndarray:
    """Raw pixels when ``bank`` is None, else flattened full-group signatures."""
    if bank is None:
        return ds.matrix()
    return np.stack([signature(s.image, bank, None, spec).values.reshape(-1) for s in ds.samples])


def _split(labels: np.ndarray, m: int, seed: int):
    rng = SplitMix64(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        perm = idx[rng.permutation(len(idx))]
        train.extend(perm[:m])
        test.extend(perm[m:])
    return np.array(sorted(train)), np.array(sorted(test))


def sample_complexity(features: np.ndarray, labels: np.ndarray, m_grid, splits: int, seed: int,
                      condition: str, threads: int = 1) -> list[tuple]:
    """Mean and std of 1-NN accuracy over seeded splits for each m."""
    labels = np.asarray(labels)
    counts = np.bincount(labels)
    rows = []
    for m in m_grid:
        if m < 1 or m >= counts.min():
            raise InsufficientSamples(f"m={m} leaves no test samples (smallest class has {counts.min()})")

        def run(i, m=m):
            tr, te = _split(labels, m, derive_seed(seed, f"split-{m}-{i}"))
            return nn_accuracy(features[tr], labels[tr], features[te], labels[te])

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                accs = list(pool.map(run, range(splits)))
        else:
            accs = [run(i) for i in range(splits)]
        accs = np.array(accs)  # ordered by split index
        rows.append((condition, int(m), float(accs.mean()), float(accs.std())))
    return rows


def translation_invariance_range(images, bank: TemplateBank, window, spec: PoolingSpec,
                                 eps: float = 0.1, max_shift: int | None = None) -> float:
    """Mean over images of the largest shift s such that every axis shift up
    to s keeps the invariance error below ``eps`` times the median signature
    distance between distinct images of the set."""
    group = bank.group
    h, w = group.shape
    max_shift = max_shift or min(h, w) // 2
    sigs = [signature(im, bank, window, spec) for im in images]
    scale = float(np.median([signature_distance(a, b) for a, b in itertools.combinations(sigs, 2)]))
    ranges = []
    for im, base in zip(images, sigs):
        reach = 0
        for s in range(1, max_shift + 1):
            moves = [(0, s), (s, 0)] if h > 1 else [(0, s)]
            err = max(
                signature_distance(base, signature(act(group, group.element_of_shift(dy, dx), im), bank, window, spec))
                for dy, dx in moves
            )
            if err > eps * scale:
                break
            reach = s
        ranges.append(reach)
    return float(np.mean(ranges))


def relative_warp_error(image, warp_field, r_grid, bank, window, spec, distractors) -> float:
    """Mean warp invariance error over ``r_grid`` divided by the mean
    signature distance from ``image`` to the distractors (the bank's own
    selectivity scale)."""
    base = signature(image, bank, window, spec)
    scale = float(np.mean([signature_distance(base, signature(d, bank, window, spec)) for d in distractors]))
    errs = [e for _, e in smooth_invariance_profile(image, warp_field, r_grid, bank, window, spec)]
    return float(np.mean(errs)) / scale
