import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch import nn

from maneuver_net.nets import (
    MODEL_NAMES,
    BaselineNet,
    DisjointNet,
    I3DConfig,
    I3DNet,
    SlowFastConfig,
    SlowFastNet,
    STMConfig,
    STMNet,
    build_model,
    fuse_probabilities,
    fused_scores,
    head_loss,
    inflate_2d_weights,
    model_config,
    multiplicative_gate,
    slowfast_sample,
)
from maneuver_net.nets.i3d import Plain2dStream, inflate_stream
from maneuver_net.nets.stm import Bottleneck


def clip_batch(B=2, N=20, S=112, seed=0):
    g = torch.Generator().manual_seed(seed)
    app = torch.randint(0, 256, (B, N, S, S, 3), dtype=torch.uint8, generator=g)
    flow = torch.rand((B, N - 1, S, S, 2), generator=g) * 0.2 - 0.1
    return app, flow


@torch.no_grad()
def central_diff(fn, x, idx, eps=1e-6):
    xp, xm = x.clone(), x.clone()
    xp[idx] += eps
    xm[idx] -= eps
    return (fn(xp) - fn(xm)) / (2 * eps)


@pytest.fixture(scope="module")
def models():
    torch.manual_seed(0)
    return {name: build_model(name).eval() for name in MODEL_NAMES}


class TestGate:
    def test_all_ones_is_plain_residual(self):
        x_a = torch.randn(2, 3, 4, 4)
        res = nn.Conv2d(3, 3, 3, padding=1)
        out = multiplicative_gate(x_a, torch.full_like(x_a, 5.0), res, f=lambda t: torch.ones_like(t) if t is not x_a else F.relu(t))
        assert torch.allclose(out, F.relu(x_a) + res(x_a), atol=1e-6)
        # with f = relu and a gate input of ones the product is the identity too
        ones = torch.ones_like(x_a)
        assert torch.allclose(multiplicative_gate(x_a, ones, res), F.relu(x_a) + res(x_a), atol=1e-6)

    def test_annihilation(self):
        x_a = torch.randn(2, 3, 4, 4)
        x_m = -torch.rand(2, 3, 4, 4)  # relu -> 0
        res = nn.Conv2d(3, 3, 3, padding=1, bias=False)
        assert torch.equal(multiplicative_gate(x_a, x_m, res), F.relu(x_a))

    def test_scalar_oracle(self):
        x_a = torch.tensor([[[1.0, -2.0], [3.0, 0.5]], [[-1.0, 4.0], [2.0, -3.0]]])
        x_m = torch.tensor([[[2.0, 1.0], [-1.0, 3.0]], [[0.5, -2.0], [1.0, 1.0]]])
        out = multiplicative_gate(x_a, x_m, lambda t: t)
        for idx in np.ndindex(2, 2, 2):
            a, m = float(x_a[idx]), float(x_m[idx])
            assert float(out[idx]) == pytest.approx(max(a, 0.0) + a * max(m, 0.0))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            multiplicative_gate(torch.zeros(2, 3, 4, 4), torch.zeros(2, 5, 4, 4), lambda t: t)
        with pytest.raises(ValueError):
            multiplicative_gate(torch.zeros(2, 3, 1, 1), torch.zeros(2, 3, 4, 4), lambda t: t)

    def test_broadcast_gate_allowed(self):
        out = multiplicative_gate(torch.ones(2, 3, 4, 4), torch.ones(2, 3, 1, 1), lambda t: t)
        assert out.shape == (2, 3, 4, 4)

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(1)
        units = [Bottleneck(8, 2, 8).double().eval() for _ in range(2)]
        x_a0 = torch.rand(1, 8, 5, 5, dtype=torch.double)
        x_m0 = torch.randn(1, 8, 5, 5, dtype=torch.double)

        def loss(x_a, x_m):
            h = x_a
            for u in units:  # two gated units, the same motion gate
                h = u(h, x_m)
            return (h ** 2).sum()

        x_m = x_m0.clone().requires_grad_(True)
        x_a = x_a0.clone().requires_grad_(True)
        loss(x_a, x_m).backward()
        rng = np.random.default_rng(0)
        for _ in range(8):
            idx = tuple(int(rng.integers(0, s)) for s in x_m0.shape)
            fd_m = central_diff(lambda t: loss(x_a0, t), x_m0, idx)
            fd_a = central_diff(lambda t: loss(t, x_m0), x_a0, idx)
            assert x_m.grad[idx].item() == pytest.approx(float(fd_m), rel=1e-4, abs=1e-8)
            assert x_a.grad[idx].item() == pytest.approx(float(fd_a), rel=1e-4, abs=1e-8)


class TestInflation:
    def test_t1_unchanged(self):
        k = torch.randn(4, 3, 3, 3)
        assert torch.equal(inflate_2d_weights(k, 1)[:, :, 0], k)
        kn = np.random.default_rng(0).normal(size=(4, 3, 3, 3))
        assert np.array_equal(inflate_2d_weights(kn, 1)[:, :, 0], kn)

    def test_time_sum_exact(self):
        k = torch.randn(8, 3, 5, 5)
        assert torch.equal(inflate_2d_weights(k, 4).sum(dim=2), k)
        kn = np.random.default_rng(1).normal(size=(8, 3, 5, 5))
        assert np.array_equal(inflate_2d_weights(kn, 4).sum(axis=2), kn)
        # non power-of-two T is exact up to rounding
        assert torch.allclose(inflate_2d_weights(k, 3).sum(dim=2), k, atol=1e-6)

    def test_constant_clip_matches_2d(self):
        torch.manual_seed(2)
        conv2 = nn.Conv2d(3, 6, 3, padding=1)
        k3 = inflate_2d_weights(conv2.weight.detach(), 4)
        frame = torch.randn(1, 3, 16, 16)
        clip = frame.unsqueeze(2).repeat(1, 1, 4, 1, 1)
        out3 = F.conv3d(clip, k3, conv2.bias, padding=(0, 1, 1))
        assert (out3[:, :, 0] - conv2(frame)).abs().max() < 1e-5

    def test_bad_t(self):
        with pytest.raises(ValueError):
            inflate_2d_weights(torch.zeros(1, 1, 3, 3), 0)

    def test_i3d_first_layer_from_2d(self):
        torch.manual_seed(3)
        cfg = model_config("i3d")
        s2, s3 = Plain2dStream(3, cfg).eval(), None
        net = I3DNet.from_2d(s2, Plain2dStream(2, cfg), cfg).eval()
        s3 = net.appearance
        frame = torch.randn(1, 3, 112, 112)
        clip = frame.unsqueeze(2).repeat(1, 1, 16, 1, 1)
        with torch.no_grad():
            out3 = s3.first_conv()(clip)
            out2 = s2.features[0](frame)
        # away from the zero-padded first and last time steps
        assert (out3[:, :, 1:-1] - out2.unsqueeze(2)).abs().max() < 1e-5

    def test_inflate_stream_copies_heads(self):
        cfg = model_config("i3d")
        s2 = Plain2dStream(3, cfg)
        from maneuver_net.nets.i3d import I3DStream
        s3 = inflate_stream(I3DStream(3, cfg), s2)
        assert torch.equal(s3.fc7.weight, s2.fc7.weight)


class TestScores:
    @pytest.mark.parametrize("name", MODEL_NAMES)
    def test_softmax_normalised_and_deterministic(self, models, name):
        m = models[name]
        inputs = m.prepare(*clip_batch(seed=4))
        a, b = m.scores(*inputs), m.scores(*inputs)
        p = a.probabilities
        assert p.shape == (2, 3)
        assert torch.allclose(p.sum(dim=1), torch.ones(2), atol=1e-6)
        assert ((p >= 0) & (p <= 1)).all()
        assert torch.equal(a.logits, b.logits)

    def test_fusion_examples(self):
        big = 60.0
        za = torch.tensor([[big, 0.0, 0.0]])
        zb = torch.tensor([[0.0, big, 0.0]])
        assert torch.allclose(fuse_probabilities([za, zb]), torch.tensor([[0.5, 0.5, 0.0]]), atol=1e-6)
        assert torch.allclose(fuse_probabilities([za, za]), F.softmax(za, -1))

    def test_disjoint_fusion_recomputed(self, models):
        m = models["disjoint"]
        inputs = m.prepare(*clip_batch(seed=5))
        with torch.no_grad():
            za = m.appearance_logits(inputs[0])
            zb = m.motion(inputs[1])
        expect = (F.softmax(za, -1) + F.softmax(zb, -1)) / 2
        assert torch.allclose(m.scores(*inputs).probabilities, expect, atol=1e-7)

    def test_fusion_gradient(self):
        z = torch.randn(2, 2, 3, dtype=torch.double)

        def f(t):
            return (fuse_probabilities([t[0], t[1]]) * torch.tensor([1.0, -2.0, 0.5], dtype=torch.double)).sum()

        zg = z.clone().requires_grad_(True)
        f(zg).backward()
        for idx in np.ndindex(2, 2, 3):
            assert float(zg.grad[idx]) == pytest.approx(float(central_diff(f, z, idx)), rel=1e-4, abs=1e-9)

    def test_single_head_scores(self):
        z = torch.tensor([[1.0, 2.0, 3.0]])
        assert torch.equal(fused_scores([z]).logits, z)

    def test_argmax_ties_to_lower_index(self):
        s = fused_scores([torch.tensor([[1.0, 1.0, 0.0], [0.0, 2.0, 2.0]])])
        assert s.predicted().tolist() == [0, 1]

    def test_head_loss_uniform_anchor(self):
        z = torch.zeros(4, 3)
        y = torch.tensor([0, 1, 2, 0])
        assert float(head_loss([z], y)) == pytest.approx(np.log(3), abs=1e-6)
        assert float(head_loss([z, z], y)) == pytest.approx(2 * np.log(3), abs=1e-6)


class TestBaselineDisjoint:
    def test_head_permutation(self):
        torch.manual_seed(6)
        m = BaselineNet(model_config("baseline")).eval()
        (x,) = m.prepare(clip_batch(seed=6)[0])
        p = m.scores(x).probabilities
        perm = [2, 0, 1]
        with torch.no_grad():
            m.appearance.head.weight.copy_(m.appearance.head.weight[perm])
            m.appearance.head.bias.copy_(m.appearance.head.bias[perm])
        assert torch.allclose(m.scores(x).probabilities, p[:, perm], atol=1e-6)

    def test_wrong_spatial_size(self, models):
        bad = torch.zeros(1, 20, 3, 64, 64)
        with pytest.raises(ValueError):
            models["baseline"](bad)

    def test_stream_shape_mismatch(self, models):
        app, stack = models["disjoint"].prepare(*clip_batch())
        with pytest.raises(ValueError):
            models["disjoint"](app, stack[:, :10])
        with pytest.raises(ValueError):
            models["disjoint"](app, stack[:1])

    def test_full_layer_counts(self):
        cfg = model_config("disjoint", "full")
        assert len(cfg.conv_layers) == 5 and cfg.fc_layers == (4096, 2048, 3)
        assert (cfg.pool_size, cfg.pool_stride) == (3, 2)


class TestI3D:
    def test_clip_length_enforced(self, models):
        m = models["i3d"]
        a, f = m.prepare(*clip_batch())
        assert a.shape[2] == 16 and f.shape[2] == 16
        with pytest.raises(ValueError):
            m(a[:, :, :12], f[:, :, :12])
        with pytest.raises(ValueError):
            I3DConfig(clip_len=8)

    def test_layer_counts(self):
        m = build_model("i3d", "full")
        convs = [l for l in m.appearance.features if isinstance(l, nn.Conv3d)]
        pools = [l for l in m.appearance.features if isinstance(l, nn.MaxPool3d)]
        bns = [l for l in m.appearance.modules() if isinstance(l, (nn.BatchNorm3d, nn.BatchNorm1d))]
        assert (len(convs), len(pools)) == (8, 5)
        assert len(bns) == 9  # every conv and the hidden fc

    def test_temporal_order_matters(self):
        torch.manual_seed(7)
        m = build_model("i3d")
        app, flow = clip_batch(B=4, seed=7)
        opt = torch.optim.SGD(m.parameters(), lr=0.01)
        for _ in range(3):
            loss = head_loss(m(*m.prepare(app, flow)), torch.tensor([0, 1, 2, 1]))
            opt.zero_grad()
            loss.backward()
            opt.step()
        a, f = m.prepare(app, flow)
        fwd = m.scores(a, f).logits
        rev = m.scores(a.flip(2), f.flip(2)).logits
        assert not torch.allclose(fwd, rev)


class TestSTM:
    def test_gate_identity(self):
        torch.manual_seed(8)
        m = build_model("stm").eval()
        inputs = m.prepare(*clip_batch(seed=8))
        m.gate_mode = "ones"
        gated = m.scores(*inputs).logits
        m.gate_mode = "off"
        plain = m.scores(*inputs).logits
        assert (gated - plain).abs().max() < 1e-5
        m.gate_mode = "motion"
        assert not torch.allclose(m.scores(*inputs).logits, plain)

    def test_full_backbone_is_resnet50(self):
        cfg = model_config("stm", "full")
        assert cfg.blocks == (3, 4, 6, 3) and cfg.expansion == 4
        # 1 stem conv + 3 convs per bottleneck + fc = 50 layers
        assert 1 + 3 * sum(cfg.blocks) + 1 == 50

    def test_shape_mismatch(self, models):
        a, f = models["stm"].prepare(*clip_batch())
        with pytest.raises(ValueError):
            models["stm"](a, f[:, :-1])

    def test_bad_gate_mode(self):
        m = build_model("stm")
        m.gate_mode = "sideways"
        with pytest.raises(ValueError):
            m(*m.prepare(*clip_batch(B=1)))

    def test_temporal_conv_starts_as_identity(self):
        m = build_model("stm")
        x = torch.randn(2 * 5, m.appearance.out_channels, 3, 3)
        tc = m.appearance.temporal["3"]
        assert torch.allclose(tc(x, 5), x, atol=1e-6)


class TestSlowFast:
    def test_sample_examples(self):
        slow, fast = slowfast_sample(64)
        assert slow == [0, 16, 32, 48]
        assert fast == list(range(0, 64, 2))
        slow, fast = slowfast_sample(16)
        assert len(slow) == 1 and len(fast) == 8

    def test_ratio_for_all_lengths(self):
        cfg = SlowFastConfig()
        for n in range(16, 129):
            slow, fast = slowfast_sample(n, cfg)
            assert len(fast) == cfg.alpha * len(slow)
            assert all(b - a == cfg.tau for a, b in zip(slow, slow[1:]))
            assert all(b - a == cfg.tau // cfg.alpha for a, b in zip(fast, fast[1:]))
            assert max(fast) < n and set(slow) <= set(fast)

    def test_short_clip(self):
        with pytest.raises(ValueError):
            slowfast_sample(15)
        m = build_model("slowfast")
        with pytest.raises(ValueError):
            m(torch.zeros(1, 3, 8, 112, 112))

    @pytest.mark.parametrize("preset", ["toy", "full"])
    def test_channel_audit(self, preset):
        m = build_model("slowfast", preset)
        assert len(m.stage_channels) == 6  # stem + five residual blocks
        for slow, fast in m.stage_channels:
            assert fast * 8 == slow
        assert len(m.laterals) == 5

    def test_lateral_ablation_changes_logits(self):
        torch.manual_seed(9)
        m = build_model("slowfast")
        app, _ = clip_batch(B=4, seed=9)
        opt = torch.optim.SGD(m.parameters(), lr=0.01)
        for _ in range(3):
            loss = head_loss(m(*m.prepare(app)), torch.tensor([0, 1, 2, 1]))
            opt.zero_grad()
            loss.backward()
            opt.step()
        x = m.prepare(app)
        on = m.scores(*x).logits
        m.lateral_enabled = False
        off = m.scores(*x).logits
        assert not torch.allclose(on, off)

    def test_prepare_resamples(self):
        m = build_model("slowfast", "full")
        (x,) = m.prepare(clip_batch(B=1)[0])
        assert x.shape == (1, 3, 64, 112, 112)


class TestFactory:
    def test_unknown_model(self):
        with pytest.raises(ValueError):
            build_model("resnet")

    def test_unknown_override(self):
        with pytest.raises(ValueError):
            build_model("i3d", colour="red")

    def test_width_override(self):
        narrow = build_model("baseline", width_multiplier=1 / 32)
        wide = build_model("baseline", width_multiplier=1 / 8)
        count = lambda m: sum(p.numel() for p in m.parameters())
        assert count(narrow) < count(wide)

    def test_disjoint_flow_fields(self):
        m = build_model("disjoint", flow_fields=9)
        assert isinstance(m, DisjointNet)
        assert m.motion.features[0].in_channels == 18
