"""Network shapes, losses, fusion head, region decoding and checkpoints."""
import math
from types import SimpleNamespace

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from forestdriver.config import SegNetConfig, TrainConfig
from forestdriver.errors import NumericalError, ShapeError, TruncatedRegion
from forestdriver.features import FeatureTransform
from forestdriver.ingest import DriverClass
from forestdriver.model import (
    Checkpoint, Predictor, build_model, load_checkpoint, predict_region, save_checkpoint,
)
from forestdriver.model.checkpoint import load_matching, state_arrays
from forestdriver.model.inference import argmax_canonical
from forestdriver.model.losses import (
    batch_loss, focal_loss, gdice_loss, loss_total, masked_cross_entropy,
)
from forestdriver.model.net import FusionHead, region_mean
from forestdriver.model.training import check_gradients

SMALL = SegNetConfig(in_bands=3, widths=[4, 8, 8], decoder_width=8)


def instance(seed, b=2, h=6, w=6, c=4, dtype=torch.float64):
    g = torch.Generator().manual_seed(seed)
    logits = torch.randn(b, c, h, w, generator=g, dtype=dtype) * 2
    targets = torch.randint(0, c, (b, h, w), generator=g)
    mask = torch.rand(b, h, w, generator=g) < 0.5
    mask[:, 0, 0] = True
    return logits, targets, mask


def model(fusion=False, n_aux=0, seed=0, dropout=0.0):
    torch.manual_seed(seed)
    return build_model(SMALL, TrainConfig(fusion_enabled=fusion, fusion_hidden=[8, 8],
                                          dropout=dropout), n_aux).double()


class TestNet:
    def test_shape_contract(self):
        m = model().eval()
        x = torch.randn(2, 3, 16, 24, dtype=torch.float64)
        assert m(x).shape == (2, 4, 16, 24)
        with pytest.raises(ShapeError):
            m(torch.randn(1, 3, 10, 16, dtype=torch.float64))
        with pytest.raises(ShapeError):
            m(torch.randn(1, 2, 16, 16, dtype=torch.float64))

    def test_eval_deterministic_and_finite(self):
        torch.manual_seed(0)
        m = build_model(SegNetConfig(in_bands=1, widths=[4, 8], decoder_width=8), TrainConfig()).eval()
        x = torch.full((1, 1, 8, 8), 0.7)
        a, b = m(x), m(x)
        assert torch.equal(a, b) and torch.isfinite(a).all()

    def test_batch_one_equals_batched(self):
        m = model(True, 3).eval()
        x = torch.randn(3, 3, 8, 8, dtype=torch.float64)
        mask = torch.rand(3, 8, 8) < 0.5
        aux = torch.randn(3, 3, dtype=torch.float64)
        full = m.class_scores(m(x), mask, aux)
        for i in range(3):
            one = m.class_scores(m(x[i:i + 1]), mask[i:i + 1], aux[i:i + 1])
            assert torch.allclose(one[0], full[i], rtol=0, atol=1e-12)

    def test_softmax_sums_to_one(self):
        logits, _, _ = instance(0, dtype=torch.float32)
        s = torch.softmax(logits, dim=1).sum(dim=1)
        assert torch.all((s - 1).abs() <= 1e-6)


class TestLosses:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_focal_gamma0_is_ce(self, seed):
        logits, t, m = instance(seed)
        assert torch.allclose(focal_loss(logits, t, m, 0.0), masked_cross_entropy(logits, t, m),
                              rtol=0, atol=1e-9)

    def test_focal_example(self):
        logits = torch.zeros(1, 4, 1, 1, dtype=torch.float64)
        logits[0, 0] = math.log(3.0)  # p_0 = 3 / (3 + 3) = 0.5
        t = torch.zeros(1, 1, 1, dtype=torch.long)
        m = torch.ones(1, 1, 1, dtype=torch.bool)
        val = focal_loss(logits, t, m, 2.0).item()
        assert val == pytest.approx(0.25 * math.log(2), abs=1e-12)
        assert round(val, 4) == 0.1733

    def test_focal_perfect(self):
        logits = torch.full((1, 4, 2, 2), -1e3, dtype=torch.float64)
        logits[:, 1] = 1e3
        t = torch.ones(1, 2, 2, dtype=torch.long)
        assert focal_loss(logits, t, torch.ones(1, 2, 2, dtype=torch.bool), 2.0).item() == 0.0

    def test_gdice_uniform_single_class(self):
        probs = torch.full((1, 4, 3, 3), 0.25, dtype=torch.float64)
        t = torch.full((1, 3, 3), 2, dtype=torch.long)
        val = gdice_loss(probs, t, torch.ones(1, 3, 3, dtype=torch.bool), 1e-6).item()
        assert val == pytest.approx(1 - 2 * 0.25 / 1.25, abs=1e-9)

    def test_gdice_perfect_and_bounds(self):
        g = torch.Generator().manual_seed(0)
        worst_perfect = 0.0
        for _ in range(1000):
            h, w = torch.randint(1, 6, (2,), generator=g).tolist()
            t = torch.randint(0, 4, (1, h, w), generator=g)
            m = torch.rand(1, h, w, generator=g) < 0.7
            m[0, 0, 0] = True
            probs = torch.softmax(torch.randn(1, 4, h, w, generator=g, dtype=torch.float64) * 3, 1)
            v = gdice_loss(probs, t, m, 1e-6).item()
            assert 0.0 <= v <= 1.0
            onehot = torch.nn.functional.one_hot(t, 4).permute(0, 3, 1, 2).double()
            worst_perfect = max(worst_perfect, gdice_loss(onehot, t, m, 1e-6).item())
        assert worst_perfect <= 1e-5

    def test_empty_mask_gives_zero(self):
        logits, t, m = instance(1)
        m[:] = False
        assert focal_loss(logits, t, m, 2.0).abs().sum() == 0
        assert gdice_loss(torch.softmax(logits, 1), t, m, 1e-6).abs().sum() == 0
        assert loss_total(None, logits, t, m, TrainConfig()).total is None

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_lambda_endpoints(self, seed):
        logits, t, m = instance(seed)
        f = focal_loss(logits, t, m, 2.0).mean()
        gd = gdice_loss(torch.softmax(logits, 1), t, m, 1e-6).mean()
        a = loss_total(None, logits, t, m, TrainConfig(lam=1.0, beta=0.0)).total
        b = loss_total(None, logits, t, m, TrainConfig(lam=0.0, beta=0.0)).total
        assert abs((a - f).item()) <= 1e-9 and abs((b - gd).item()) <= 1e-9

    def test_component_sum(self):
        logits, t, m = instance(7)
        cfg = TrainConfig(lam=0.5, beta=1.0)
        res = loss_total(None, logits, t, m, cfg)
        # hand-summed from independent pieces
        lab = torch.tensor([int(np.bincount(t[i][m[i]].numpy(), minlength=4).argmax()) for i in range(2)])
        pooled = region_mean(logits, m)
        ce = -torch.log_softmax(pooled, 1)[torch.arange(2), lab].mean()
        f = focal_loss(logits, t, m, 2.0).mean()
        gd = gdice_loss(torch.softmax(logits, 1), t, m, 1e-6).mean()
        assert abs(res.total.item() - (0.5 * f + 0.5 * gd + ce).item()) <= 1e-9

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_locality(self, seed):
        net = model(True, 2, seed=1)
        logits, t, m = instance(seed)
        aux = torch.randn(2, 2, dtype=torch.float64)
        labels = torch.tensor([0, 3])
        base = loss_total(net, logits, t, m, TrainConfig(), aux, labels).total
        t2 = torch.where(m, t, (t + 1 + seed % 3) % 4)
        assert loss_total(net, logits, t2, m, TrainConfig(), aux, labels).total.item() == base.item()

    def test_truncated_example_zero_gradient(self):
        net = model(seed=2).train()
        g = torch.Generator().manual_seed(3)
        x = torch.randn(3, 3, 8, 8, generator=g, dtype=torch.float64)
        t = torch.randint(0, 4, (3, 8, 8), generator=g)
        m = torch.rand(3, 8, 8, generator=g) < 0.5
        m[1] = False
        cfg = TrainConfig()

        def grads(xs, ts, ms):
            net.zero_grad()
            batch_loss(net, xs, ts, ms, cfg).total.backward()
            return [p.grad.clone() for p in net.parameters()]

        keep = torch.tensor([0, 2])
        full = grads(x, t, m)
        x2 = x.clone()
        x2[1] = 1e6  # arbitrary content in the truncated example
        perturbed = grads(x2, t, m)
        without = grads(x[keep], t[keep], m[keep])
        for a, b, c in zip(full, perturbed, without):
            assert torch.equal(a, b) and torch.equal(a, c)

    def test_all_truncated_skips(self):
        net = model()
        res = batch_loss(net, torch.zeros(2, 3, 8, 8, dtype=torch.float64),
                         torch.zeros(2, 8, 8, dtype=torch.long), torch.zeros(2, 8, 8, dtype=torch.bool),
                         TrainConfig())
        assert res.total is None and res.n_usable == 0

    def test_gradient_linearity_and_independence(self):
        net = model(True, 2, seed=4).train()
        x = torch.randn(2, 3, 8, 8, dtype=torch.float64)
        _, t, m = instance(5, h=8, w=8)
        aux = torch.randn(2, 2, dtype=torch.float64)
        extra = torch.nn.Parameter(torch.ones(3, dtype=torch.float64))
        net.register_parameter("unused", extra)
        net.zero_grad()
        batch_loss(net, x, t, m, TrainConfig(), aux).total.backward()
        g1 = [p.grad.clone() if p.grad is not None else None for p in net.parameters()]
        net.zero_grad()
        (2 * batch_loss(net, x, t, m, TrainConfig(), aux).total).backward()
        for a, p in zip(g1, net.parameters()):
            if a is not None:
                assert torch.allclose(2 * a, p.grad, rtol=0, atol=1e-12)
        assert extra.grad is None or torch.all(extra.grad == 0)


class TestFusion:
    def test_zero_weights(self):
        head = FusionHead(3, (8, 8), dropout=0.0).double()
        for p in head.parameters():
            torch.nn.init.zeros_(p)
        out = head(torch.randn(2, 4, dtype=torch.float64), torch.randn(2, 3, dtype=torch.float64))
        assert torch.equal(out, torch.zeros(2, 4, dtype=torch.float64))

    def test_identity_first_layer(self):
        head = FusionHead(3, (8, 8), dropout=0.0).double()
        with torch.no_grad():
            first = head.net[0]
            first.weight.zero_()
            first.weight[:4, :4] = torch.eye(4)
            first.bias.zero_()
        z = torch.randn(2, 4, dtype=torch.float64)
        a = head(z, torch.zeros(2, 3, dtype=torch.float64))
        with torch.no_grad():
            first.weight[:, 4:] = 5.0
        b = head(z, torch.zeros(2, 3, dtype=torch.float64))
        assert torch.equal(a, b)

    def test_aux_length_mismatch(self):
        head = FusionHead(3, (8, 8))
        with pytest.raises(ShapeError):
            head(torch.zeros(1, 4), torch.zeros(1, 2))

    def test_eval_twice(self):
        head = FusionHead(3, (8, 8), dropout=0.5).eval()
        z, a = torch.randn(1, 4), torch.randn(1, 3)
        assert torch.equal(head(z, a), head(z, a))


class TestDecoding:
    def test_tie_goes_to_plantation(self):
        logits = torch.zeros(1, 4, 1, 2, dtype=torch.float64)
        logits[0, 0, 0, 0] = 2.0
        logits[0, 1, 0, 1] = 2.0
        scores = region_mean(logits, torch.ones(1, 1, 2, dtype=torch.bool))[0]
        assert scores.tolist() == [1.0, 1.0, 0.0, 0.0]
        assert argmax_canonical(scores.numpy()) == DriverClass.PLANTATION

    def test_unanimous(self):
        logits = torch.zeros(1, 4, 3, 3, dtype=torch.float64)
        logits[:, 2] = 3.0
        scores = region_mean(logits, torch.rand(1, 3, 3) < 2)[0]
        assert argmax_canonical(scores.numpy()) == DriverClass.GRASSLAND_SHRUBLAND

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_three_pixel_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        logits = rng.normal(size=(4, 3, 3))
        cells = [int(p) for p in rng.permutation(9)[:3]]
        mask = np.zeros((3, 3), bool)
        for c in cells:
            mask[divmod(c, 3)] = True
        brute = [sum(logits[k][divmod(c, 3)] for c in cells) / 3 for k in range(4)]
        got = region_mean(torch.from_numpy(logits[None]), torch.from_numpy(mask[None]))[0].numpy()
        assert np.allclose(got, brute, rtol=0, atol=1e-12)
        assert argmax_canonical(got) == DriverClass(int(np.argmax(brute)))


def test_numerical_error_names_parameter():
    net = model()
    for name, p in net.named_parameters():
        p.grad = torch.zeros_like(p)
    bad = next(n for n, _ in net.named_parameters() if n.endswith("head.weight"))
    dict(net.named_parameters())[bad].grad[0] = float("nan")
    with pytest.raises(NumericalError) as exc:
        check_gradients(net)
    assert exc.value.parameter == bad


def _ckpt(fusion=False):
    torch.manual_seed(3)
    cfg = TrainConfig(fusion_enabled=fusion, fusion_hidden=[8, 8])
    net = build_model(SMALL, cfg, 2 if fusion else 0)
    tf = FeatureTransform([0.0, 0.0], [1.0, -1.0], [2.0, 0.5]) if fusion else None
    return Checkpoint(state_arrays(net), SMALL, cfg, ("red", "green", "blue"), [0.1, 0.2, 0.3],
                      [0.05, 0.05, 0.1], ("a", "b") if fusion else (), tf, epoch=3, val_macro_f1=0.5)


def _event_and_scenes(size=16):
    from forestdriver.composite import SceneSet
    from forestdriver.raster import RasterImage

    rng = np.random.default_rng(0)
    img = RasterImage(bands={b: rng.random((size, size)).astype(np.float32)
                             for b in ("red", "green", "blue")})
    ring = [(3.0, 3.0), (12.0, 4.0), (10.0, 13.0)]
    ev = SimpleNamespace(event_id="e", loss_year=2014, driver=DriverClass.OTHER,
                         polygon_rings=lambda: [ring])
    return ev, SceneSet("e", (), img, (2015, 2018))


@pytest.mark.parametrize("fusion", [False, True])
def test_checkpoint_roundtrip_bit_identical(tmp_path, fusion):
    ck = _ckpt(fusion)
    path = save_checkpoint(ck, tmp_path / "c.fdt")
    back = load_checkpoint(path)
    assert back.epoch == 3 and back.bands == ck.bands and back.feature_names == ck.feature_names
    for k, v in ck.state.items():
        assert np.array_equal(back.state[k], v) and back.state[k].dtype == v.dtype
    ev, ss = _event_and_scenes()
    aux = [0.3, -2.0] if fusion else None
    a = predict_region(ev, ss, Predictor.from_checkpoint(ck), aux, crop_size=16)
    b = predict_region(ev, ss, Predictor.from_checkpoint(back), aux, crop_size=16)
    assert a.class_scores == b.class_scores and np.array_equal(a.pixel_classes, b.pixel_classes)
    assert save_checkpoint(back, tmp_path / "d.fdt").read_bytes() == path.read_bytes()


def test_predict_truncated_and_record():
    ev, ss = _event_and_scenes(40)
    pred = Predictor.from_checkpoint(_ckpt())
    with pytest.raises(TruncatedRegion):
        predict_region(ev, ss, pred, crop_size=8)
    rec = predict_region(ev, ss, pred, crop_size=40).record()
    assert set(rec) == {"event_id", "predicted_class", "class_scores", "true_class"}
    assert rec["true_class"] == "Other" and len(rec["class_scores"]) == 4


def test_load_matching(tmp_path):
    ck = _ckpt()
    path = save_checkpoint(ck, tmp_path / "c.fdt")
    torch.manual_seed(9)
    other = build_model(SegNetConfig(in_bands=3, widths=[4, 8, 8], decoder_width=8, n_classes=3),
                        TrainConfig())
    copied = load_matching(other, path)
    assert "seg.stages.0.0.weight" in copied and "seg.head.weight" not in copied
    assert np.array_equal(other.state_dict()["seg.stages.0.0.weight"].numpy(),
                          ck.state["seg.stages.0.0.weight"])
