"""Shared numerical-testing utilities.

The central-difference gradient checker perturbs every entry of a
parameter array in place, so callers hand in a closure that recomputes
the scalar loss from current parameter values.
"""

import numpy as np


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    """Norm-based relative disagreement between two gradient blocks.

    Uses max(|a|, |b|) in the denominator so a zero analytic gradient
    against a zero numerical gradient compares as 0, not NaN.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a.ravel()), np.linalg.norm(b.ravel()), 1e-12)
    return float(np.linalg.norm((a - b).ravel()) / denom)


def fd_gradient(loss_fn, arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of loss_fn with respect to arr.

    arr is mutated entry by entry and restored; loss_fn takes no
    arguments and must read arr by reference.
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + eps
        above = loss_fn()
        flat[k] = orig - eps
        below = loss_fn()
        flat[k] = orig
        gflat[k] = (above - below) / (2.0 * eps)
    return grad
