"""Minimal differentiable-computation core: float32 tensors, the op set the
fusion/diffusion networks need, reverse-mode autodiff, AdamW, and a
finite-difference gradient checker."""

from . import nn, ops, ptns
from .gradcheck import gradcheck, numerical_gradient, rel_error
from .nn import ParamStore
from .optim import AdamWState, adamw_step
from .tensor import GradTape, Tensor, as_tensor, backward, check_finite, no_grad

__all__ = [
    "AdamWState",
    "GradTape",
    "ParamStore",
    "Tensor",
    "adamw_step",
    "as_tensor",
    "backward",
    "check_finite",
    "gradcheck",
    "nn",
    "no_grad",
    "numerical_gradient",
    "ops",
    "ptns",
    "rel_error",
]
