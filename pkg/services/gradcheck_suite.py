# gradcheck_suite.py - Gradient verification of every primitive, block and the full network

import logging
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from models.model_config import ModelConfig, tiny_config
from services import autodiff as ad
from services.autodiff import Tensor
from services.gradcheck import GradCheckResult, check_parameters, grad_check
from services.network import ConductionNet, forward, position_code, tcit_forward
from services.tcbm import init_tcbm, tcbm_forward
from services.tcia import axis_squeeze, init_tcia, stencil_term, tcia_forward

logger = logging.getLogger(__name__)

PRIMITIVE_TOLERANCE = 1e-5
BLOCK_TOLERANCE = 1e-4
DEFAULT_SEEDS = (0, 1, 2)

# builder(rng) -> (function of the checked tensor, the tensor, max_checks)
Case = Callable[[np.random.Generator], Tuple[Callable[[Tensor], Tensor], Tensor, int]]


def _weighted(out_fn: Callable[[Tensor], Tensor], shape: Sequence[int], rng: np.random.Generator):
    """Scalarize a tensor-valued op with a fixed random weighting"""
    weights = Tensor(rng.normal(size=tuple(shape)))
    return lambda t: ad.sum_reduce(ad.mul(out_fn(t), weights))


def _normal(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.normal(size=shape))


def _matmul(rng):
    b = _normal(rng, 5, 3)
    return _weighted(lambda a: ad.matmul(a, b), (4, 3), rng), _normal(rng, 4, 5), None


def _conv_input(rng):
    w = _normal(rng, 3, 2, 3, 3)
    return _weighted(lambda x: ad.conv2d(x, w, padding=1), (1, 3, 6, 6), rng), _normal(rng, 1, 2, 6, 6), None


def _conv_kernel(rng):
    x = _normal(rng, 1, 2, 6, 6)
    return _weighted(lambda w: ad.conv2d(x, w, padding=1), (1, 3, 6, 6), rng), _normal(rng, 3, 2, 3, 3), None


def _conv_replicate_strided(rng):
    w = _normal(rng, 2, 2, 3, 3)
    fn = lambda x: ad.conv2d(x, w, stride=2, padding=1, pad_mode="replicate")
    return _weighted(fn, (1, 2, 3, 3), rng), _normal(rng, 1, 2, 6, 6), None


def _depthwise(rng):
    w = _normal(rng, 3, 1, 3, 3)
    return _weighted(lambda x: ad.conv2d(x, w, padding=1, groups=3), (2, 3, 5, 5), rng), \
        _normal(rng, 2, 3, 5, 5), None


def _deconv(rng):
    w = _normal(rng, 3, 2, 2, 2)
    return _weighted(lambda x: ad.deconv2d(x, w, stride=2), (1, 2, 6, 6), rng), _normal(rng, 1, 3, 3, 3), None


def _layer_norm(rng):
    gain, bias = _normal(rng, 4), _normal(rng, 4)
    return _weighted(lambda x: ad.layer_norm(x, gain, bias), (2, 3, 4), rng), _normal(rng, 2, 3, 4), None


def _softmax(rng):
    return _weighted(lambda x: ad.softmax(x, axis=-1), (3, 5), rng), _normal(rng, 3, 5), None


def _sigmoid(rng):
    return _weighted(ad.sigmoid, (3, 4), rng), _normal(rng, 3, 4), None


def _gelu(rng):
    return _weighted(ad.gelu_like, (3, 4), rng), _normal(rng, 3, 4), None


def _mean_axis(rng):
    return _weighted(lambda x: ad.mean_reduce(x, axis=1), (2, 4), rng), _normal(rng, 2, 3, 4), None


def _broadcast_add(rng):
    x = _normal(rng, 2, 3, 4, 4)
    return _weighted(lambda b: ad.broadcast_add(x, b), (2, 3, 4, 4), rng), _normal(rng, 1, 3, 1, 1), None


def _mul_div(rng):
    other = Tensor(rng.uniform(0.5, 2.0, size=(3, 4)))
    fn = lambda x: ad.div(ad.mul(x, x), other)
    return _weighted(fn, (3, 4), rng), _normal(rng, 3, 4), None


def _resize(rng):
    return _weighted(lambda x: ad.resize_bilinear(x, 8, 8), (1, 2, 8, 8), rng), _normal(rng, 1, 2, 2, 2), None


def _squeeze(rng):
    return _weighted(lambda x: axis_squeeze(x, "vertical"), (1, 5, 4), rng), _normal(rng, 1, 4, 3, 5), None


def _stencil(rng):
    return _weighted(stencil_term, (1, 4, 4, 4), rng), _normal(rng, 1, 4, 4, 4), None


def _position_code(rng):
    model = ConductionNet(tiny_config(), seed=int(rng.integers(1 << 30)))
    stage = model.stages[0]
    return _weighted(lambda x: position_code(x, stage.position), (1, 8, 4, 4), rng), \
        _normal(rng, 1, 8, 4, 4), None


def _tcia(rng):
    params = init_tcia(4, 2, 2, 1, rng)
    return _weighted(lambda x: tcia_forward(x, params), (1, 4, 5, 5), rng), _normal(rng, 1, 4, 5, 5), None


def _tcbm(rng):
    params = init_tcbm(2, rng)
    return _weighted(lambda x: tcbm_forward(x, params), (1, 2, 6, 6), rng), _normal(rng, 1, 2, 6, 6), None


def _tcit(rng):
    model = ConductionNet(tiny_config(), seed=int(rng.integers(1 << 30)))
    block = model.stages[0].blocks[0]
    return _weighted(lambda x: tcit_forward(x, block), (1, 8, 4, 4), rng), _normal(rng, 1, 8, 4, 4), 32


def _network(rng, config: ModelConfig = None):
    config = config or tiny_config()
    model = ConductionNet(config, seed=int(rng.integers(1 << 30)))
    height, width = config.input_size
    weights = [Tensor(rng.normal(size=(1, 1, height, width))) for _ in range(3)]

    def loss(x):
        out = forward(x, model)
        heads = (out.main_logits, out.aux_body_logits, out.aux_boundary_logits)
        total = ad.sum_reduce(ad.mul(heads[0], weights[0]))
        for head, w in zip(heads[1:], weights[1:]):
            total = ad.add(total, ad.sum_reduce(ad.mul(head, w)))
        return total

    return loss, Tensor(rng.uniform(0.0, 1.0, size=(1, 1, height, width))), 24


PRIMITIVE_CASES: Dict[str, Case] = {
    "matmul": _matmul,
    "conv2d.input": _conv_input,
    "conv2d.kernel": _conv_kernel,
    "conv2d.replicate_stride2": _conv_replicate_strided,
    "conv2d.depthwise": _depthwise,
    "deconv2d": _deconv,
    "layer_norm": _layer_norm,
    "softmax": _softmax,
    "sigmoid": _sigmoid,
    "gelu_like": _gelu,
    "mean_reduce": _mean_axis,
    "broadcast_add": _broadcast_add,
    "mul_div": _mul_div,
    "resize_bilinear": _resize,
    "axis_squeeze": _squeeze,
    "stencil_term": _stencil,
    "position_code": _position_code,
}

BLOCK_CASES: Dict[str, Case] = {
    "tcia": _tcia,
    "tcbm": _tcbm,
    "tcit": _tcit,
    "network": _network,
}


def _network_parameters(seed: int, config: ModelConfig, max_checks: int = 3) -> GradCheckResult:
    """Sampled parameter gradients of the full network under a weighted-output loss"""
    rng = np.random.default_rng([seed, 7])
    model = ConductionNet(config, seed=seed)
    height, width = config.input_size
    image = Tensor(rng.uniform(0.0, 1.0, size=(1, 1, height, width)))
    weights = Tensor(rng.normal(size=(1, 1, height, width)))

    def loss():
        out = forward(image, model)
        return ad.add(ad.sum_reduce(ad.mul(out.main_logits, weights)),
                      ad.add(ad.sum_reduce(out.aux_body_logits), ad.sum_reduce(out.aux_boundary_logits)))

    wanted = ("stage1.embed.w", "stage1.block1.tcia.gamma", "stage1.block1.tcbm.h_step",
              "stage2.block1.ffn.expand.w", "decoder.up3.w", "head.main.w", "head.body.w", "head.boundary.w")
    named = [(n, t) for n, t in model.named_parameters() if n in wanted]
    errors = check_parameters(loss, named, max_checks=max_checks, seed=seed)
    worst = max(errors.values()) if errors else 0.0
    return GradCheckResult("network.parameters", seed, worst, BLOCK_TOLERANCE)


def run_case(name: str, case: Case, seed: int, tolerance: float) -> GradCheckResult:
    rng = np.random.default_rng(seed)
    fn, x, max_checks = case(rng)
    error = grad_check(fn, x, max_checks=max_checks, seed=seed)
    return GradCheckResult(name, seed, error, tolerance)


def run_gradcheck_suite(seeds: Sequence[int] = DEFAULT_SEEDS, include_network: bool = True) -> List[GradCheckResult]:
    """Every primitive at 1e-5 and every composed block at 1e-4, once per seed"""
    results = []
    for seed in seeds:
        for name, case in PRIMITIVE_CASES.items():
            results.append(run_case(name, case, seed, PRIMITIVE_TOLERANCE))
        for name, case in BLOCK_CASES.items():
            if name == "network" and not include_network:
                continue
            results.append(run_case(name, case, seed, BLOCK_TOLERANCE))
        if include_network:
            results.append(_network_parameters(seed, tiny_config()))
        logger.debug(f"gradcheck seed {seed} done")
    failed = [r for r in results if not r.passed]
    if failed:
        logger.error(f"❌ {len(failed)}/{len(results)} gradient checks failed")
    else:
        logger.info(f"✅ All {len(results)} gradient checks passed")
    return results
