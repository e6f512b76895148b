import csv
import io
import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invsig import act, normalize
from invsig import fixtures as fx
from invsig.errors import DimensionMismatch, EmptyBank, OrbitsNotDistinct
from invsig.groups import dihedral8, rot4, torus2d
from invsig.oracle import (
    OrbitSet, Reservoir, assert_distinct_orbits, calibrate_template_count, calibration_csv,
    distributions_equal, fit_log_growth, hausdorff_double_loop, hausdorff_orbit_distance, orbits_equal,
)
from invsig.templates import make_random_bank


def seeded(shape, seed):
    return fx.seeded_images(shape, 1, seed)[0]


class TestOrbitsEqual:
    def test_equivalence_relation(self):
        """Reflexive, symmetric and transitive on a mix of moved and fresh images."""
        group = dihedral8(4)
        bases = fx.seeded_images((4, 4), 5, seed=3)
        images = bases + [act(group, (7 * i + 3) % group.order, bases[i % 5]) for i in range(15)]
        rel = np.array([[orbits_equal(a, b, group) for b in images] for a in images])
        assert rel.diagonal().all()
        np.testing.assert_array_equal(rel, rel.T)
        np.testing.assert_array_equal((rel.astype(int) @ rel.astype(int)) > 0, rel)
        # ground truth: same base image
        truth = np.array([[i % 5 == j % 5 for j in range(20)] for i in range(20)])
        np.testing.assert_array_equal(rel, truth)

    def test_orbit_set_size(self):
        assert len(OrbitSet.of(seeded((4, 4), 0), rot4(4))) == 4

    def test_perturbation_breaks_equality(self):
        group = torus2d(4, 4)
        a = seeded((4, 4), 1)
        bumped = a.data.copy()
        bumped[0, 0] += 1e-6
        bumped[0, 1] -= 1e-6
        assert not orbits_equal(a, normalize(bumped), group)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            orbits_equal(seeded((4, 4), 0), seeded((4, 5), 0), torus2d(4, 4))

    def test_distinct_guard(self):
        group = torus2d(4, 4)
        a = seeded((4, 4), 2)
        assert_distinct_orbits([a, seeded((4, 4), 3)], group)
        with pytest.raises(OrbitsNotDistinct):
            assert_distinct_orbits([a, act(group, 5, a)], group)


class TestDistributions:
    def test_same_orbit_equal_distributions(self):
        group = dihedral8(5)
        bank = make_random_bank(group, 4, seed=0)
        a = seeded((5, 5), 4)
        for g in range(group.order):
            assert distributions_equal(a, act(group, g, a), group, bank)

    def test_false_certifies_distinct_orbits(self):
        group = torus2d(5, 5)
        bank = make_random_bank(group, 2, seed=1)
        images = fx.seeded_images((5, 5), 6, seed=5)
        for a, b in combinations(images, 2):
            if not distributions_equal(a, b, group, bank):
                assert not orbits_equal(a, b, group)

    def test_template_list_and_empty(self):
        group = torus2d(4, 4)
        a = seeded((4, 4), 6)
        assert distributions_equal(a, act(group, 3, a), group, [seeded((4, 4), 7)])
        with pytest.raises(EmptyBank):
            distributions_equal(a, a, group, [])


class TestHausdorff:
    @given(st.integers(0, 5000))
    def test_single_loop_matches_double_loop(self, seed):
        group = dihedral8(4)
        a, b = seeded((4, 4), seed), seeded((4, 4), seed + 1)
        assert hausdorff_orbit_distance(a, b, group) == pytest.approx(hausdorff_double_loop(a, b, group), abs=1e-12)

    def test_symmetric_and_bounded(self):
        group = torus2d(5, 5)
        a, b = seeded((5, 5), 8), seeded((5, 5), 9)
        d = hausdorff_orbit_distance(a, b, group)
        assert d == pytest.approx(hausdorff_orbit_distance(b, a, group), abs=1e-15)
        assert d <= np.linalg.norm(a.flat - b.flat) + 1e-15
        assert hausdorff_orbit_distance(a, act(group, 7, a), group) <= 1e-15


@pytest.fixture(scope="module")
def ten():
    images, group, spec = fx.calibration_setup()
    return images[:10], group, spec


class TestCalibration:
    def test_needs_distinct_images(self, ten):
        images, group, spec = ten
        with pytest.raises(OrbitsNotDistinct):
            calibrate_template_count(images[:1], group, 0.05, 0.1, range(3), spec, K_upper=4)
        with pytest.raises(OrbitsNotDistinct):
            calibrate_template_count([images[0], act(group, 9, images[0])], group, 0.05, 0.1, range(3), spec,
                                     K_upper=4)

    def test_pinned_counts(self, ten):
        images, group, spec = ten
        got = [calibrate_template_count(images, group, eps, 0.1, range(5), spec, K_upper=16)
               for eps in (0.05, 0.025, 0.01)]
        assert [c.K_measured for c in got] == [1, 3, 13]
        for c in got:
            assert c.c_fit == pytest.approx(2 * math.log(10 / 0.1) / (c.epsilon**2 * c.K_measured), rel=1e-12)
            assert c.reservoir_drift < c.epsilon / 10
            assert c.K_ref == 1024 and not c.capped
        assert got[0].c_fit == pytest.approx(3684.136, abs=1e-3)

    def test_cap_is_reported(self, ten):
        images, group, spec = ten
        c = calibrate_template_count(images[:4], group, 1e-6, 0.1, range(3), spec, K_upper=4)
        assert c.capped and c.K_measured == 4

    def test_reservoir_subset_matches_fresh_run(self, ten):
        images, group, spec = ten
        res = Reservoir.draw(images, group, 64 * 8, spec)
        a = calibrate_template_count(None, group, 0.025, 0.1, range(3), K_upper=8, reservoir=res, subset=range(6))
        b = calibrate_template_count(images[:6], group, 0.025, 0.1, range(3), spec, K_upper=8)
        # templates do not depend on the images, so a prefix subset sees the same projections
        assert a.K_measured == b.K_measured
        assert a.reservoir_drift == pytest.approx(b.reservoir_drift, abs=1e-15)

    def test_csv_columns(self, ten):
        images, group, spec = ten
        c = calibrate_template_count(images[:4], group, 0.05, 0.1, range(3), spec, K_upper=4)
        rows = list(csv.reader(io.StringIO(calibration_csv([c]))))
        assert rows[0] == ["n", "epsilon", "delta", "K_measured", "c_fit", "seed-count"]
        assert rows[1][0] == "4" and rows[1][5] == "3"


class TestLogGrowth:
    def test_exact_line(self):
        ns = [4, 8, 16, 32]
        a, b = fit_log_growth(ns, [2 * math.log(n) + 1 for n in ns])
        assert a == pytest.approx(2.0) and b == pytest.approx(1.0)

    def test_lifted_to_bound_points(self):
        ns = [4, 8, 16, 32]
        Ks = [2, 3, 6, 9]
        a, b = fit_log_growth(ns, Ks)
        assert a > 0
        assert all(a * math.log(n) + b >= k - 1e-12 for n, k in zip(ns, Ks))
