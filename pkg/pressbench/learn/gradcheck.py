"""Central finite-difference oracle for layer gradients."""
import copy
import logging
from typing import Sequence, Tuple, Union

import torch
import torch.nn as nn
from pydantic import BaseModel
from torch import Tensor

logger = logging.getLogger(__name__)


class GradCheckResult(BaseModel):
    """Outcome of one finite-difference check."""

    layer: str
    max_relative_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


def _relative_error(analytic: Tensor, numeric: Tensor) -> float:
    scale = max(analytic.norm().item(), numeric.norm().item(), 1e-8)
    return (analytic - numeric).norm().item() / scale


def finite_difference_check(
    layer: nn.Module,
    inputs: Union[Tensor, Sequence[Tensor]],
    h: float = 1e-4,
    tolerance: float = 1e-3,
    max_entries: int = 48,
    seed: int = 0,
) -> GradCheckResult:
    """Compare autograd gradients of a layer to central differences in float64.

    The scalar checked is ``sum(output * R)`` for a fixed random ``R``. Up to
    ``max_entries`` coordinates per tensor (inputs and parameters) are perturbed.

    Args:
        layer: Module under test (copied and promoted to float64)
        inputs: One tensor or a sequence of input tensors
        h: Finite-difference step
        tolerance: Allowed relative error
        max_entries: Coordinates checked per tensor
        seed: Seed for R and coordinate selection

    Returns:
        GradCheckResult with the worst relative error over all checked tensors
    """
    generator = torch.Generator().manual_seed(seed)
    module = copy.deepcopy(layer).double()
    xs: Tuple[Tensor, ...] = (inputs,) if isinstance(inputs, Tensor) else tuple(inputs)
    xs = tuple(x.detach().double().clone().requires_grad_(True) for x in xs)

    with torch.no_grad():
        weights = torch.randn(module(*xs).shape, generator=generator, dtype=torch.float64)

    def scalar() -> Tensor:
        return (module(*xs) * weights).sum()

    targets = list(xs) + [p for p in module.parameters() if p.requires_grad]
    analytic = torch.autograd.grad(scalar(), targets, allow_unused=True)

    worst = 0.0
    for target, grad in zip(targets, analytic):
        grad = torch.zeros_like(target) if grad is None else grad
        flat = target.data.view(-1)
        count = min(max_entries, flat.numel())
        picks = torch.randperm(flat.numel(), generator=generator)[:count]
        numeric = torch.empty(count, dtype=torch.float64)
        with torch.no_grad():
            for j, idx in enumerate(picks.tolist()):
                original = flat[idx].item()
                flat[idx] = original + h
                plus = scalar().item()
                flat[idx] = original - h
                minus = scalar().item()
                flat[idx] = original
                numeric[j] = (plus - minus) / (2 * h)
        worst = max(worst, _relative_error(grad.reshape(-1)[picks], numeric))

    name = type(layer).__name__
    logger.debug(f"Gradient check {name}: max relative error {worst:.2e}")
    return GradCheckResult(layer=name, max_relative_error=worst, tolerance=tolerance)
