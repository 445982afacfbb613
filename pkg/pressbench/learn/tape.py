"""Explicit forward/backward over a module, on top of torch autograd."""
import weakref
from typing import Dict, Optional

import torch
import torch.nn as nn
from torch import Tensor

from pressbench.errors import ShapeError, TrainingStateError


class GradientTape:
    """Records one forward pass of a module so gradients can be pulled later."""

    def __init__(self, module: nn.Module):
        self.module = module
        self._input: Optional[Tensor] = None
        self._output: Optional[Tensor] = None

    def forward(self, x: Tensor) -> Tensor:
        check = getattr(self.module, "check_input", None)
        if check is not None:
            check(x)
        self._input = x.detach().clone().requires_grad_(True)
        try:
            self._output = self.module(self._input)
        except RuntimeError as e:
            raise ShapeError(f"{type(self.module).__name__}: {e}") from e
        return self._output

    def backward(self, loss_grad: Tensor) -> Dict[str, Tensor]:
        """Gradients of <output, loss_grad> for every parameter and the input."""
        if self._output is None:
            raise TrainingStateError("backward called before forward")
        named = [(n, p) for n, p in self.module.named_parameters() if p.requires_grad]
        names = [name for name, _ in named]
        params = [param for _, param in named]
        grads = torch.autograd.grad(
            self._output,
            [self._input, *params],
            grad_outputs=loss_grad,
            allow_unused=True,
            retain_graph=True,
        )
        result = {"input": grads[0] if grads[0] is not None else torch.zeros_like(self._input)}
        for name, param, grad in zip(names, params, grads[1:]):
            result[name] = grad if grad is not None else torch.zeros_like(param)
        return result


_TAPES: "weakref.WeakKeyDictionary[nn.Module, GradientTape]" = weakref.WeakKeyDictionary()


def forward(module: nn.Module, x: Tensor) -> Tensor:
    """Run ``module`` on ``x`` and record the pass for ``backward``."""
    tape = GradientTape(module)
    out = tape.forward(x)
    _TAPES[module] = tape
    return out


def backward(module: nn.Module, loss_grad: Tensor) -> Dict[str, Tensor]:
    """Reverse-mode gradients of the last recorded forward pass of ``module``."""
    tape = _TAPES.get(module)
    if tape is None:
        raise TrainingStateError(f"backward on {type(module).__name__} without a recorded forward")
    return tape.backward(loss_grad)
