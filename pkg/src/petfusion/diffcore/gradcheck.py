"""Finite-difference gradient checking.

Tolerances are set for float32 roundoff: central differences at eps=1e-3
against reverse-mode gradients, compared by norm-relative error.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, backward


def numerical_gradient(f, t: Tensor, eps: float = 1e-3) -> np.ndarray:
    """Central finite differences of scalar f() w.r.t. every element of t."""
    g = np.zeros_like(t.data)
    flat = t.data.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f().item()
        flat[i] = orig - eps
        fm = f().item()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return g


def rel_error(ga: np.ndarray, gn: np.ndarray) -> float:
    na = float(np.linalg.norm(ga.ravel()))
    nn = float(np.linalg.norm(gn.ravel()))
    d = float(np.linalg.norm((ga - gn).ravel()))
    return d / max(na, nn, 1e-8)


def gradcheck(f, tensors, eps: float = 1e-3, rtol: float = 1e-2) -> dict:
    """Compare reverse-mode and finite-difference gradients of scalar f().

    `tensors` is a list of (name, Tensor) pairs to perturb; returns a
    name -> rel_error dict and raises AssertionError past rtol.
    """
    loss = f()
    tape = backward(loss)
    report = {}
    for name, t in tensors:
        ga = tape.gradient(t)
        gn = numerical_gradient(f, t, eps=eps)
        err = rel_error(ga, gn)
        report[name] = err
        if err >= rtol:
            raise AssertionError(f"gradient check failed for {name}: rel err {err:.4g} >= {rtol}")
    return report
