# test_network.py - Tests for the TCIT encoder-decoder, its heads and the Dice losses

from dataclasses import replace

import numpy as np
import pytest

from models.model_config import ModelConfig, tiny_config
from services import autodiff as ad
from services.autodiff import Tape, Tensor
from services.errors import ConfigurationError, DimensionError
from services.gradcheck_suite import BLOCK_CASES, BLOCK_TOLERANCE, run_case
from services.network import (ConvParams, NetworkOutput, ConductionNet, channel_norm, count_params, dice_loss,
                              feed_forward, forward, param_breakdown, position_code, stage_features,
                              tcit_forward, total_loss)


def test_forward_shapes():
    print("🔍 Testing network shapes...")
    model = ConductionNet(tiny_config((64, 64)), seed=0)
    image = np.random.default_rng(0).uniform(size=(2, 1, 64, 64))
    with ad.no_grad():
        out = forward(image, model, keep_features=True)
    for logits in (out.main_logits, out.aux_body_logits, out.aux_boundary_logits):
        assert logits.shape == (2, 1, 64, 64)
    assert [m.shape for m in out.stage_maps] == [(2, 8, 16, 16), (2, 8, 8, 8), (2, 8, 4, 4), (2, 8, 2, 2)]
    assert [m.shape for m in out.decoder_maps] == [(2, 8, 4, 4), (2, 8, 8, 8), (2, 8, 16, 16)]
    with ad.no_grad():
        assert forward(image, model).decoder_maps == []


def test_default_config_stage_widths():
    model = ConductionNet(ModelConfig(), seed=1)
    maps = stage_features(np.zeros((1, 1, 64, 64)), model)
    assert [m.shape for m in maps] == [(1, 16, 16, 16), (1, 32, 8, 8), (1, 64, 4, 4), (1, 128, 2, 2)]


def test_input_validation():
    model = ConductionNet(tiny_config(), seed=0)
    with pytest.raises(ConfigurationError):
        forward(np.zeros((1, 1, 48, 48)), model)
    with pytest.raises(DimensionError):
        forward(np.zeros((1, 3, 32, 32)), model)
    with pytest.raises(DimensionError):
        forward(np.zeros((32, 32)), model)


def test_position_code_with_zero_kernel_is_identity():
    x = np.random.default_rng(2).normal(size=(1, 8, 5, 5))
    out = position_code(Tensor(x), ConvParams(w=Tensor(np.zeros((8, 1, 3, 3)))))
    assert np.array_equal(out.data, x)


def test_block_without_branches_is_plain_ffn():
    model = ConductionNet(tiny_config().variant("baseline"), seed=3)
    block = model.stages[0].blocks[0]
    assert block.tcia is None and block.tcbm is None
    x = Tensor(np.random.default_rng(3).normal(size=(2, 8, 4, 4)))
    with ad.no_grad():
        expected = ad.add(x, feed_forward(channel_norm(x, block.norm2), block.ffn))
        assert np.array_equal(tcit_forward(x, block).data, expected.data)


def test_forward_without_tape_keeps_no_graph():
    model = ConductionNet(tiny_config(), seed=0)
    image = np.random.default_rng(0).uniform(size=(1, 1, 32, 32))
    for _ in range(3):
        out = forward(image, model)
        assert not out.main_logits.requires_grad
    assert Tape.current() is None


def test_batch_permutation_equivariance():
    model = ConductionNet(tiny_config(), seed=4)
    images = np.random.default_rng(4).uniform(size=(3, 1, 32, 32))
    order = [2, 0, 1]
    with ad.no_grad():
        out = forward(images, model)
        permuted = forward(images[order], model)
    for a, b in ((out.main_logits, permuted.main_logits), (out.aux_body_logits, permuted.aux_body_logits),
                 (out.aux_boundary_logits, permuted.aux_boundary_logits)):
        assert np.allclose(a.data[order], b.data, atol=1e-12)


def test_same_seed_same_weights():
    first, second = ConductionNet(tiny_config(), seed=5), ConductionNet(tiny_config(), seed=5)
    names = [n for n, _ in first.named_parameters()]
    assert len(names) == len(set(names))
    for (n1, t1), (n2, t2) in zip(first.named_parameters(), second.named_parameters()):
        assert n1 == n2 and np.array_equal(t1.data, t2.data)
    assert all(not k.requires_grad for _, k in first.fixed_kernels())
    assert not set(n for n, _ in first.fixed_kernels()) & set(names)


def _mask(shape, indices):
    mask = np.zeros(shape)
    mask.reshape(-1)[indices] = 1.0
    return mask


def test_dice_saturated_match():
    mask = _mask((1, 1, 8, 8), np.arange(10))
    logits = np.where(mask == 1.0, 20.0, -20.0)
    assert dice_loss(logits, mask).item() < 1e-6


def test_dice_disjoint():
    mask = _mask((1, 1, 8, 8), np.arange(10))
    logits = np.where(mask == 1.0, -20.0, 20.0)
    assert abs(dice_loss(logits, mask, eps=1e-9).item() - 1.0) < 1e-3
    # with unit smoothing only eps survives in the numerator
    assert abs(dice_loss(logits, mask).item() - (1.0 - 1.0 / 65.0)) < 1e-6


def test_dice_half_probability():
    mask = _mask((1, 1, 4, 4), [0, 5, 10, 15])
    loss = dice_loss(np.zeros((1, 1, 4, 4)), mask, eps=0.0)
    assert abs(loss.item() - 2.0 / 3.0) < 1e-12


def test_dice_validation():
    with pytest.raises(DimensionError):
        dice_loss(np.zeros((1, 1, 4, 4)), np.zeros((1, 1, 4, 5)))
    with pytest.raises(ConfigurationError):
        dice_loss(np.zeros((1, 1, 2, 2)), np.full((1, 1, 2, 2), 0.5))


def test_total_loss_is_sum_of_components():
    rng = np.random.default_rng(6)
    shape = (2, 1, 8, 8)
    out = NetworkOutput(*(Tensor(rng.normal(size=shape)) for _ in range(3)))
    mask = (rng.uniform(size=shape) > 0.7).astype(np.float64)
    boundary = (rng.uniform(size=shape) > 0.8).astype(np.float64)
    total, parts = total_loss(out, mask, boundary)
    assert parts.total == parts.l_seg + parts.l_tb + parts.l_ib
    assert total.item() == parts.total
    assert parts.l_seg == dice_loss(out.main_logits, mask).item()
    assert parts.l_tb == dice_loss(out.aux_boundary_logits, boundary).item()
    assert parts.l_ib == dice_loss(out.aux_body_logits, mask).item()


def test_aux_heads_receive_gradients():
    model = ConductionNet(tiny_config((64, 64)), seed=7)
    rng = np.random.default_rng(7)
    image = rng.uniform(size=(1, 1, 64, 64))
    mask = np.zeros((1, 1, 64, 64))
    mask[..., 30:34, 20:23] = 1.0
    boundary = mask.copy()
    boundary[..., 31:33, 21] = 0.0
    with Tape() as tape:
        total, _ = total_loss(forward(image, model), mask, boundary)
        tape.backward(total)
    for head in (model.head_main, model.head_body, model.head_boundary):
        assert head.w.grad is not None and np.any(head.w.grad != 0.0)
    assert np.any(model.stages[3].blocks[0].tcia.gamma.grad != 0.0)
    assert np.any(model.stages[3].blocks[0].tcbm.h_step.grad != 0.0)
    model.zero_grad()
    assert all(t.grad is None for t in model.parameters())


def test_aux_stage_selects_head_input():
    config = tiny_config((64, 64))
    assert config.aux_stage == 1
    config.stage_channels = (8, 8, 8, 16)
    for stage, width in ((1, 8), (4, 16)):
        model = ConductionNet(replace(config, aux_stage=stage), seed=8)
        assert model.head_body.w.shape == (1, width, 1, 1)
        assert model.head_boundary.w.shape == (1, width, 1, 1)
        with ad.no_grad():
            out = forward(np.zeros((1, 1, 64, 64)), model)
        assert out.aux_body_logits.shape == (1, 1, 64, 64)
    with pytest.raises(ConfigurationError):
        ConductionNet(replace(config, aux_stage=5))


def test_aux_heads_see_stage_one_detail():
    """With the default aux stage a single bright pixel changes aux logits locally, not as a 2×2 blur"""
    model = ConductionNet(tiny_config((64, 64)), seed=9)
    image = np.zeros((1, 1, 64, 64))
    spot = image.copy()
    spot[0, 0, 8, 8] = 1.0
    with ad.no_grad():
        delta = np.abs(forward(spot, model).aux_boundary_logits.data - forward(image, model).aux_boundary_logits.data)
    assert delta[0, 0, :16, :16].max() > 1e-9
    assert delta[0, 0, 40:, 40:].max() < 1e-12


def test_param_counts_follow_toggles():
    config = tiny_config()
    counts = {name: count_params(ConductionNet(config.variant(name))) for name in ("baseline", "tcia", "tcbm", "full")}
    assert counts["baseline"] < counts["tcia"] < counts["full"]
    assert counts["baseline"] < counts["tcbm"] < counts["full"]
    assert counts["full"] - counts["tcia"] == counts["tcbm"] - counts["baseline"]

    model = ConductionNet(config.variant("baseline"))
    breakdown = param_breakdown(model)
    assert sum(breakdown.values()) == count_params(model)
    assert breakdown["tcia"] == 0 and breakdown["tcbm"] == 0
    full = param_breakdown(ConductionNet(config))
    # each 8-channel TCBM: two 3×3 convs with bias plus h
    assert full["tcbm"] == 4 * (2 * (8 * 8 * 9 + 8) + 1)


def test_network_end_to_end_gradient():
    result = run_case("network", BLOCK_CASES["network"], 0, BLOCK_TOLERANCE)
    assert result.passed, result.max_rel_error


def main():
    """Run all tests and print a summary"""
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    results = []
    for name, fn in tests:
        try:
            fn()
            results.append((name, True))
        except Exception as e:
            print(f"❌ {name} failed: {e}")
            results.append((name, False))

    print("\n" + "=" * 50)
    print("📊 TEST RESULTS:")
    for name, passed in results:
        print(f"{name}: {'✅ PASSED' if passed else '❌ FAILED'}")
    print(f"\nOverall: {sum(p for _, p in results)}/{len(results)} tests passed")


if __name__ == "__main__":
    main()
