"""AdamW with decoupled weight decay."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .nn import ParamStore
from .tensor import GradTape


class AdamWState:
    """First/second moment accumulators, zero-initialized at step 0."""

    def __init__(self, params: ParamStore):
        self.m = {n: np.zeros_like(t.data) for n, t in params.items()}
        self.v = {n: np.zeros_like(t.data) for n, t in params.items()}

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for n, a in self.m.items():
            out["om." + n] = a.copy()
        for n, a in self.v.items():
            out["ov." + n] = a.copy()
        return out

    def load_state(self, arrays: dict[str, np.ndarray]):
        for n in self.m:
            self.m[n] = np.asarray(arrays["om." + n], dtype=np.float32).copy()
            self.v[n] = np.asarray(arrays["ov." + n], dtype=np.float32).copy()


def _grad_lookup(grads, params: ParamStore):
    if isinstance(grads, GradTape):
        return {n: grads.gradient(t) for n, t in params.items()}
    return grads


def adamw_step(params: ParamStore, grads, lr: float, betas=(0.9, 0.999),
               weight_decay: float = 0.0, step_index: int = 0,
               state: AdamWState | None = None, eps: float = 1e-8) -> ParamStore:
    """One update, in place; `step_index` is 0-based (bias correction uses t = step_index + 1).

    `grads` is a GradTape or a name->ndarray mapping covering every parameter.
    """
    if not (lr > 0):
        raise ContractError(f"lr must be positive, got {lr}")
    b1, b2 = betas
    if not (0 < b1 < 1 and 0 < b2 < 1):
        raise ContractError(f"betas must lie in (0,1), got {betas}")
    if state is None:
        state = AdamWState(params)
    gmap = _grad_lookup(grads, params)
    t = step_index + 1
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for name, p in params.items():
        if name not in gmap:
            raise ContractError(f"missing gradient for parameter {name!r}")
        g = np.asarray(gmap[name], dtype=np.float32)
        if g.shape != p.data.shape:
            raise ContractError(f"gradient shape {g.shape} != parameter shape {p.data.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        if weight_decay:
            p.data -= (lr * weight_decay) * p.data
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
    return params
