"""Seedable differentiable-computation kernel: tensors, layers, losses, Adam."""

from .gradcheck import grad_check
from .ops import (attention_apply, cosine_matrix, cosine_similarity,
                  cross_attention_apply, cross_entropy_loss, dice_loss,
                  gaussian_kl, gaussian_sample, init_attention, init_mlp,
                  log_softmax, mlp_apply, reparameterize, softmax)
from .params import AdamState, Gaussian, ParamStore, adam_step, evaluate_with_gradients
from .rng import RngStream
from .tensor import Tensor, as_tensor, backward

__all__ = [
    "Tensor", "as_tensor", "backward", "RngStream",
    "ParamStore", "Gaussian", "AdamState", "adam_step", "evaluate_with_gradients",
    "init_mlp", "mlp_apply", "init_attention", "attention_apply",
    "cross_attention_apply", "gaussian_kl", "gaussian_sample", "reparameterize",
    "cosine_similarity", "cosine_matrix", "softmax", "log_softmax",
    "cross_entropy_loss", "dice_loss", "grad_check",
]
