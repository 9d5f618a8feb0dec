"""Parameter storage and initialization helpers."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ContractError
from .tensor import Tensor


class ParamStore:
    """Named trainable tensors; iteration order is sorted by name."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(array, dtype=np.float32), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        for name in self.names():
            yield name, self._params[name]

    def subset(self, prefix: str) -> list[str]:
        return [n for n in self.names() if n.startswith(prefix)]

    def n_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self.items()}

    def load_state(self, arrays: dict[str, np.ndarray]):
        missing = [n for n in self._params if n not in arrays]
        if missing:
            raise ContractError(f"checkpoint is missing parameters: {missing[:5]}...")
        for n, t in self._params.items():
            src = np.asarray(arrays[n], dtype=np.float32)
            if src.shape != t.data.shape:
                raise ContractError(
                    f"parameter {n!r}: stored shape {src.shape} != model shape {t.data.shape}"
                )
            t.data = src.copy()


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


def add_linear(store: ParamStore, prefix: str, n_in: int, n_out: int,
               rng: np.random.Generator, zero: bool = False):
    if zero:
        store.add(prefix + ".w", np.zeros((n_in, n_out), dtype=np.float32))
    else:
        store.add(prefix + ".w", kaiming_uniform(rng, (n_in, n_out), n_in))
    store.add(prefix + ".b", np.zeros(n_out, dtype=np.float32))


def add_conv(store: ParamStore, prefix: str, c_in: int, c_out: int, k: int,
             rng: np.random.Generator, zero: bool = False):
    if zero:
        store.add(prefix + ".w", np.zeros((c_out, c_in, k, k), dtype=np.float32))
    else:
        store.add(prefix + ".w", kaiming_uniform(rng, (c_out, c_in, k, k), c_in * k * k))
    store.add(prefix + ".b", np.zeros(c_out, dtype=np.float32))


def add_depthwise(store: ParamStore, prefix: str, c: int, k: int, rng: np.random.Generator):
    store.add(prefix + ".w", kaiming_uniform(rng, (c, k, k), k * k))
    store.add(prefix + ".b", np.zeros(c, dtype=np.float32))


def add_layernorm(store: ParamStore, prefix: str, c: int):
    store.add(prefix + ".g", np.ones(c, dtype=np.float32))
    store.add(prefix + ".b", np.zeros(c, dtype=np.float32))


def linear(store: ParamStore, prefix: str, x):
    """x [..., n_in] -> [..., n_out]"""
    from . import ops

    return ops.add(ops.matmul(x, store[prefix + ".w"]), store[prefix + ".b"])


def conv(store: ParamStore, prefix: str, x, stride: int = 1, padding: int = 0):
    from . import ops

    y = ops.conv2d(x, store[prefix + ".w"], stride=stride, padding=padding)
    b = store[prefix + ".b"]
    return ops.add(y, ops.reshape(b, (1, b.data.shape[0], 1, 1)))


def depthwise(store: ParamStore, prefix: str, x, padding: int = 0):
    from . import ops

    y = ops.depthwise_conv2d(x, store[prefix + ".w"], padding=padding)
    b = store[prefix + ".b"]
    return ops.add(y, ops.reshape(b, (1, b.data.shape[0], 1, 1)))


def layer_norm(store: ParamStore, prefix: str, x, axis: int = -1):
    from . import ops

    return ops.layernorm(x, store[prefix + ".g"], store[prefix + ".b"], axis=axis)
