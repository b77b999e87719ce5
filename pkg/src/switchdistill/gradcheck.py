"""Central-finite-difference validation of analytic parameter gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError
from .network import Gradients, NetworkParams

LossFn = Callable[[NetworkParams], float]
GradFn = Callable[[NetworkParams], Gradients]


@dataclass
class LayerCheck:
    layer: int
    max_rel_error: float
    ok: bool


@dataclass
class GradCheckReport:
    checks: list[LayerCheck]
    tolerance: float

    @property
    def max_rel_error(self) -> float:
        return max(c.max_rel_error for c in self.checks)

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failing_layers(self) -> list[int]:
        return [c.layer for c in self.checks if not c.ok]


def _eval_loss(loss_fn: LossFn, net: NetworkParams) -> float:
    value = float(loss_fn(net))
    if not math.isfinite(value):
        raise NumericError(f"loss closure returned non-finite value {value}")
    return value


def grad_check(
    net: NetworkParams,
    loss_fn: LossFn,
    grad_fn: GradFn,
    tolerance: float = 1e-4,
    h: float = 1e-4,
) -> GradCheckReport:
    """Compare ``grad_fn`` against central differences of ``loss_fn``.

    Each parameter entry is perturbed by h scaled to its magnitude
    (h * max(1, |value|)), so the check is meaningful for parameters far
    from unit scale.
    """
    _eval_loss(loss_fn, net)  # fail fast on a broken closure
    analytic = grad_fn(net)
    probe = net.copy()
    checks = []
    for i in range(len(net.layers)):
        worst = 0.0
        for arrays, grads in ((probe.weights, analytic.weights), (probe.biases, analytic.biases)):
            arr = arrays[i]
            grad = grads[i]
            flat = arr.reshape(-1)
            gflat = np.asarray(grad).reshape(-1)
            for j in range(flat.size):
                orig = flat[j]
                step_size = h * max(1.0, abs(orig))
                flat[j] = orig + step_size
                up = _eval_loss(loss_fn, probe)
                flat[j] = orig - step_size
                down = _eval_loss(loss_fn, probe)
                flat[j] = orig
                numeric = (up - down) / (2.0 * step_size)
                denom = max(abs(gflat[j]), abs(numeric), 1e-8)
                worst = max(worst, abs(gflat[j] - numeric) / denom)
        checks.append(LayerCheck(layer=i, max_rel_error=worst, ok=worst <= tolerance))
    return GradCheckReport(checks=checks, tolerance=tolerance)
