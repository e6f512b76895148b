import hashlib
import json

import numpy as np
import pytest

from helpers import brute_complex, brute_layer_simple, foil_covariance_error
from invsig import act, normalize
from invsig import fixtures as fx
from invsig.errors import ConfigError, DimensionMismatch
from invsig.groups import PoolingWindow, box_window, dihedral8, full_window, scale_set, torus2d
from invsig.hierarchy import (
    FeatureBank, LayerConfig, check_nested, covariance_check, covariance_errors, forward, layer_complex,
    layer_simple, load_config, make_feature_bank, parts_profile, save_config,
)
from invsig.hw import PoolingSpec, signature, simple_responses
from invsig.templates import make_random_bank

SPEC = PoolingSpec.cdf_bins(4, s=0.1)


def seeded(shape, seed):
    return fx.seeded_images(shape, 1, seed)[0]


def random_feature_bank(group, support, K, C, seed):
    rng = np.random.default_rng(seed)
    return FeatureBank(group, tuple(support), rng.normal(size=(K, len(support), C)), {"kind": "test"})


class TestLayerSimple:
    def test_layer_one_matches_single_module(self):
        group = torus2d(6, 6)
        bank = make_random_bank(group, 3, seed=1)
        image = seeded((6, 6), 2)
        nu = layer_simple(image, bank)
        for k in range(3):
            np.testing.assert_array_equal(nu[:, k], simple_responses(image, bank, k))

    def test_sifting_template(self):
        """A one-hot template at the identity reads out one channel."""
        group = torus2d(5, 5)
        mu = np.random.default_rng(0).normal(size=(group.order, 3))
        w = np.zeros((1, 1, 3))
        w[0, 0, 2] = 1.0
        bank = FeatureBank(group, (0,), w, {})
        np.testing.assert_array_equal(layer_simple(mu, bank)[:, 0], mu[:, 2])

    @pytest.mark.parametrize("group", [torus2d(5, 4), dihedral8(4)], ids=lambda g: g.kind)
    def test_brute_force_oracle(self, group):
        support = (0, 1, 3, group.order - 1)
        bank = random_feature_bank(group, support, 3, 2, seed=4)
        mu = np.random.default_rng(5).normal(size=(group.order, 2))
        np.testing.assert_allclose(layer_simple(mu, bank), brute_layer_simple(mu, bank), atol=1e-13)

    def test_fft_matches_direct(self):
        group = torus2d(8, 6)
        bank = random_feature_bank(group, list(box_window(group, 1).members), 4, 3, seed=6)
        mu = np.random.default_rng(7).normal(size=(group.order, 3))
        np.testing.assert_allclose(layer_simple(mu, bank, "fft"), layer_simple(mu, bank), atol=1e-10)

    def test_fft_needs_torus(self):
        group = dihedral8(4)
        bank = random_feature_bank(group, (0,), 1, 1, seed=0)
        with pytest.raises(ConfigError):
            layer_simple(np.zeros((group.order, 1)), bank, "fft")

    def test_shape_errors(self):
        group = torus2d(4, 4)
        bank = random_feature_bank(group, (0,), 1, 2, seed=0)
        with pytest.raises(DimensionMismatch):
            layer_simple(np.zeros((group.order, 3)), bank)
        with pytest.raises(DimensionMismatch):
            layer_simple(np.zeros((group.order, 2)), make_random_bank(group, 1, seed=0))


class TestLayerComplex:
    def test_brute_force_oracle(self):
        group = torus2d(6, 6)
        simple = np.random.default_rng(1).uniform(-1, 1, size=(group.order, 3))
        cfg = LayerConfig(box_window(group, 1), make_random_bank(group, 3, seed=0), SPEC)
        fmap = layer_complex(simple, cfg)
        np.testing.assert_allclose(fmap.raw, brute_complex(simple, cfg.window, SPEC), atol=1e-14)

    def test_full_window_gives_constant_map(self):
        group = torus2d(5, 5)
        simple = np.random.default_rng(2).uniform(-1, 1, size=(group.order, 2))
        cfg = LayerConfig(full_window(group), make_random_bank(group, 2, seed=0), SPEC)
        fmap = layer_complex(simple, cfg, strict=False)
        np.testing.assert_allclose(fmap.raw, np.broadcast_to(fmap.raw[0], fmap.raw.shape), atol=1e-14)

    def test_normalization_record(self):
        group = torus2d(6, 6)
        simple = np.random.default_rng(3).uniform(-1, 1, size=(group.order, 2))
        fmap = layer_complex(simple, LayerConfig(box_window(group, 1), make_random_bank(group, 2, seed=0), SPEC))
        assert abs(fmap.values.mean()) < 1e-15
        assert np.linalg.norm(fmap.values) == pytest.approx(1.0, abs=1e-14)
        np.testing.assert_allclose(fmap.reconstruct(), fmap.raw, atol=1e-14)

    def test_single_full_layer_is_the_signature(self):
        image, bank, spec = fx.golden_signature_setup()
        res = forward(image, [LayerConfig(full_window(bank.group), bank, spec)])
        np.testing.assert_allclose(res.top.values, signature(image, bank, None, spec).values, atol=1e-15)


class TestForward:
    def test_golden(self):
        image, _, _ = fx.golden_signature_setup()
        stored = json.loads((fx.fixture_root() / "golden_hierarchy.json").read_text())
        res = forward(image, fx.covariance_layers())
        assert [hashlib.sha256(m.raw.tobytes()).hexdigest() for m in res.maps] == stored["layer_digests"]
        assert [list(r) for r in res.records] == stored["records"]
        np.testing.assert_array_equal(res.top.values, np.array(stored["top"]["values"]))

    def test_fft_path_agrees(self):
        image = seeded((8, 8), 9)
        layers = fx.covariance_layers()
        a, b = forward(image, layers), forward(image, layers, method="fft")
        for ma, mb in zip(a.maps, b.maps):
            np.testing.assert_allclose(mb.raw, ma.raw, atol=1e-10)

    def test_records_reconstruct_every_layer(self):
        res = forward(seeded((8, 8), 10), fx.covariance_layers())
        for fmap, (mean, norm) in zip(res.maps, res.records):
            assert (fmap.mean, fmap.norm) == (mean, norm)
            np.testing.assert_allclose(fmap.reconstruct(), fmap.raw, atol=1e-14)

    def test_config_round_trip(self, tmp_path):
        layers = fx.covariance_layers(dihedral8(6))
        save_config(layers, tmp_path / "h.json")
        loaded = load_config(tmp_path / "h.json")
        image = seeded((6, 6), 11)
        np.testing.assert_array_equal(forward(image, loaded).top.values, forward(image, layers).top.values)


class TestCovariance:
    @pytest.mark.parametrize("group", [torus2d(6, 6), dihedral8(6)], ids=lambda g: g.kind)
    @pytest.mark.parametrize("spec", [SPEC, PoolingSpec.moments([1, 2]), PoolingSpec.max()],
                             ids=lambda s: s.kind)
    def test_every_element_every_pooling(self, group, spec):
        base = fx.covariance_layers(group)
        l1 = LayerConfig(base[0].window, base[0].bank, spec)
        exemplars = fx.seeded_images(group.shape, 3, seed=12)
        support = PoolingWindow(group, tuple(base[1].bank.support))
        l2 = LayerConfig(base[1].window, make_feature_bank(exemplars, [l1], 3, support, seed=13), spec)
        image = seeded(group.shape, 14)
        worst = max(covariance_check(image, g, [l1, l2]) for g in range(group.order))
        assert worst <= 1e-12

    @pytest.mark.parametrize("group", [torus2d(8, 8), dihedral8(8)], ids=lambda g: g.kind)
    def test_foil_breaks_covariance(self, group):
        layer = fx.covariance_layers(group)[0]
        image = seeded(group.shape, 15)
        errs = [foil_covariance_error(image, g, layer) for g in range(1, group.order)]
        assert max(errs) > 1e-3
        assert max(covariance_errors(image, g, [layer])[0] for g in range(group.order)) <= 1e-12


class TestParts:
    def test_identity_gives_zero(self):
        image, _, layers = fx.parts_setup()
        assert all(err == 0.0 for _, err in parts_profile(image, 0, layers))

    def test_pinned_profile(self):
        image, g, layers = fx.parts_setup()
        errs = [e for _, e in parts_profile(image, g, layers)]
        np.testing.assert_allclose(errs[:2], [0.1845, 0.00303], rtol=2e-3)
        assert errs[2] <= 1e-10

    def test_every_shift_up_to_five_vanishes_at_top(self):
        image, _, layers = fx.parts_setup()
        group = layers[0].window.group
        for dx in range(1, 6):
            errs = [e for _, e in parts_profile(image, group.element_of_shift(0, dx), layers)]
            assert errs[0] > 1e-3 and errs[-1] <= 1e-10


class TestCheckNested:
    def test_rejects_bad_stacks(self):
        layers = fx.covariance_layers()
        group = layers[0].window.group
        with pytest.raises(ConfigError):
            check_nested([])
        with pytest.raises(ConfigError):
            check_nested([layers[1]])
        with pytest.raises(ConfigError):
            check_nested([layers[0], LayerConfig(layers[1].window, layers[0].bank, SPEC)])
        narrow = LayerConfig(PoolingWindow(group, (0,)), layers[1].bank, SPEC)
        with pytest.raises(ConfigError):
            check_nested([layers[0], narrow])
        other = torus2d(4, 4)
        with pytest.raises(ConfigError):
            check_nested([LayerConfig(full_window(other), layers[0].bank, SPEC)])

    def test_rejects_scale_sets(self):
        group = scale_set([1.0, 1.5], 6, 6)
        cfg = LayerConfig(full_window(group), make_random_bank(group, 1, seed=0), SPEC)
        with pytest.raises(ConfigError):
            check_nested([cfg])

    def test_degenerate_inner_map(self):
        group = torus2d(4, 4)
        cfg = LayerConfig(full_window(group), make_random_bank(group, 1, seed=0), PoolingSpec.max())
        top = LayerConfig(full_window(group), random_feature_bank(group, (0,), 1, 1, 0), SPEC)
        with pytest.raises(Exception, match="constant"):
            forward(seeded((4, 4), 0), [cfg, top])
