"""Encoder-decoder model: wiring, shapes, naming, determinism."""

import numpy as np
import pytest

from rfrlkit.errors import ConfigError, ShapeError
from rfrlkit.model import (LossSwitches, ModelConfig, build_model,
                           count_params, forward)
from rfrlkit.rng import PortableRng
from rfrlkit.tensor import Tensor, backward
from rfrlkit.losses import total_loss


def default_model(seed=0):
    return build_model(ModelConfig(), seed)


def batch(n=2, seed=4, size=32, channels=1):
    rng = PortableRng(seed).child(0xBA7C4)
    return Tensor(rng.uniform((n, channels, size, size)).astype(np.float32))


class TestConfig:
    def test_defaults_valid(self):
        ModelConfig().validate()

    def test_too_few_stages(self):
        with pytest.raises(ConfigError):
            ModelConfig(n_stages=1, stage_channels=(8,)).validate()

    def test_channel_count_mismatch(self):
        with pytest.raises(ConfigError):
            ModelConfig(n_stages=3, stage_channels=(8, 16)).validate()

    def test_input_not_divisible(self):
        with pytest.raises(ConfigError):
            ModelConfig(input_shape=(1, 30, 30)).validate()

    def test_too_few_classes(self):
        with pytest.raises(ConfigError):
            ModelConfig(num_classes=1).validate()


class TestForwardShapes:
    def test_output_shapes(self):
        model = default_model()
        x = batch()
        taps = forward(model, x)
        assert taps.recon.shape == x.shape
        assert taps.logits.shape == (2, 3)
        assert taps.probs.shape == (2, 3)
        assert np.allclose(taps.probs.data.sum(axis=1), 1.0, atol=1e-5)

    def test_encoder_spatial_chain(self):
        taps = forward(default_model(), batch())
        assert [f.shape[2] for f in taps.enc_feats] == [32, 16, 8, 4]
        assert [f.shape[1] for f in taps.enc_feats] == [8, 16, 32, 64]

    def test_decoder_spatial_chain(self):
        taps = forward(default_model(), batch())
        assert [f.shape[2] for f in taps.dec_feats] == [4, 8, 16, 32]
        assert [f.shape[1] for f in taps.dec_feats] == [64, 32, 16, 8]

    def test_feature_pairs_shape_compatible(self):
        taps = forward(default_model(), batch())
        n = len(taps.enc_feats)
        for i, e in enumerate(taps.enc_feats):
            d = taps.dec_feats[n - 1 - i]
            assert e.shape == d.shape, i

    def test_wrong_input_shape_rejected(self):
        model = default_model()
        with pytest.raises(ShapeError):
            forward(model, batch(size=16))
        with pytest.raises(ShapeError):
            forward(model, batch(channels=2))

    def test_two_stage_variant(self):
        cfg = ModelConfig(input_shape=(1, 16, 16), n_stages=2,
                          stem_channels=4, stage_channels=(8, 12),
                          num_classes=4)
        taps = forward(build_model(cfg, 1), batch(size=16))
        assert [f.shape[2] for f in taps.enc_feats] == [16, 8, 4]
        assert [f.shape[2] for f in taps.dec_feats] == [4, 8, 16]
        assert taps.logits.shape == (2, 4)


class TestParameters:
    def test_names_cover_all_groups(self):
        names = [n for n, _ in default_model().named_params()]
        assert "stem.weight" in names and "stem.bias" in names
        for i in (1, 2, 3):
            assert f"enc.{i}.conv1.weight" in names
            assert f"enc.{i}.conv2.weight" in names
        for i in (0, 1, 2, 3):
            assert f"attn.{i}.weight" in names
        for j in (0, 1, 2):
            assert f"dec.{j}.weight" in names
        assert "recon.weight" in names
        assert "cls.weight" in names and "cls.bias" in names

    def test_names_unique_and_stable(self):
        a = [n for n, _ in default_model().named_params()]
        b = [n for n, _ in default_model(seed=9).named_params()]
        assert a == b
        assert len(a) == len(set(a))

    def test_param_count_matches_shapes(self):
        model = default_model()
        total = sum(p.data.size for _, p in model.named_params())
        assert count_params(model) == total

    def test_biases_start_at_zero(self):
        for name, p in default_model().named_params():
            if name.endswith("bias"):
                assert np.all(p.data == 0.0), name

    def test_init_deterministic_per_seed(self):
        a = dict(default_model(seed=3).named_params())
        b = dict(default_model(seed=3).named_params())
        c = dict(default_model(seed=4).named_params())
        for name in a:
            assert np.array_equal(a[name].data, b[name].data), name
        assert any(not np.array_equal(a[n].data, c[n].data) for n in a)


class TestLossSwitchWiring:
    def test_classifier_path_unaffected_by_switches(self):
        x = batch()
        full = build_model(ModelConfig(), 0)
        sup_only = full.with_switches(LossSwitches(
            supervised=True, unsupervised=False, frs=False))
        assert np.array_equal(forward(full, x).logits.data,
                              forward(sup_only, x).logits.data)

    def test_gradients_reach_every_parameter(self):
        model = default_model()
        x = batch()
        taps = forward(model, x)
        y = Tensor(np.eye(3, dtype=np.float32)[[0, 1]])
        rep = total_loss(taps, x, y, model.cfg.switches)
        g = backward(rep.total)
        missing = [n for n, p in model.named_params() if p not in g]
        assert missing == []

    def test_supervised_only_leaves_decoder_untrained(self):
        model = build_model(ModelConfig(switches=LossSwitches(
            supervised=True, unsupervised=False, frs=False)), 0)
        x = batch()
        taps = forward(model, x)
        y = Tensor(np.eye(3, dtype=np.float32)[[0, 1]])
        rep = total_loss(taps, x, y, model.cfg.switches)
        g = backward(rep.total)
        dec_names = [n for n, p in model.named_params()
                     if n.startswith(("dec.", "recon.")) and p in g]
        assert dec_names == []
        assert model.stem.weight in g


class TestDeterminism:
    def test_forward_reproducible(self):
        x = batch()
        a = forward(default_model(), x)
        b = forward(default_model(), x)
        assert np.array_equal(a.logits.data, b.logits.data)
        assert np.array_equal(a.recon.data, b.recon.data)
