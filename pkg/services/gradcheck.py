# gradcheck.py - Central-difference verification of reverse-mode gradients

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from services.autodiff import Tape, Tensor, no_grad
from services.errors import DimensionError

logger = logging.getLogger(__name__)

DENOMINATOR_FLOOR = 1e-8


@dataclass
class GradCheckResult:
    name: str
    seed: int
    max_rel_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), DENOMINATOR_FLOOR)


def _scalar(out: Tensor) -> float:
    if out.size != 1:
        raise DimensionError(f"grad_check needs a scalar-valued function, got shape {out.shape}")
    return float(out.data.reshape(-1)[0])


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5,
               max_checks: Optional[int] = None, seed: int = 0) -> float:
    """
    Compare the tape gradient of scalar f at x with (f(x+eps) - f(x-eps)) / 2eps.

    Returns the max component-wise relative error, using
    max(|a|, |b|, 1e-8) as denominator. With max_checks, a seeded random
    subset of components is compared instead of all of them. Other leaves
    used by f accumulate gradients as a side effect.
    """
    saved_grad, saved_flag = x.grad, x.requires_grad
    x.grad, x.requires_grad = None, True
    try:
        with Tape() as tape:
            out = f(x)
            _scalar(out)
            tape.backward(out)
        analytic = np.zeros(x.size) if x.grad is None else x.grad.reshape(-1).copy()
    finally:
        x.grad, x.requires_grad = saved_grad, saved_flag

    components = np.arange(x.size)
    if max_checks is not None and max_checks < x.size:
        components = np.sort(np.random.default_rng(seed).choice(x.size, size=max_checks, replace=False))

    flat = x.data.reshape(-1)
    worst = 0.0
    with no_grad():
        for k in components:
            original = flat[k]
            flat[k] = original + eps
            f_plus = _scalar(f(x))
            flat[k] = original - eps
            f_minus = _scalar(f(x))
            flat[k] = original
            numeric = (f_plus - f_minus) / (2.0 * eps)
            worst = max(worst, relative_error(analytic[k], numeric))
    return worst


def check_parameters(loss_fn: Callable[[], Tensor], params: Iterable[Tuple[str, Tensor]],
                     eps: float = 1e-5, max_checks: Optional[int] = None,
                     seed: int = 0) -> Dict[str, float]:
    """grad_check each named parameter of a closure-built loss"""
    params = list(params)
    errors = {}
    for index, (name, param) in enumerate(params):
        errors[name] = grad_check(lambda _: loss_fn(), param, eps=eps,
                                  max_checks=max_checks, seed=seed + index)
    for _, param in params:
        param.zero_grad()
    return errors


def summarize(results: List[GradCheckResult]) -> str:
    lines = [f"{'check':<28} {'seed':>4} {'max rel err':>12} {'tol':>8}  status"]
    for r in results:
        status = "✅" if r.passed else "❌"
        lines.append(f"{r.name:<28} {r.seed:>4} {r.max_rel_error:>12.3e} {r.tolerance:>8.0e}  {status}")
    return "\n".join(lines)
