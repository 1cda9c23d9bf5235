"""Dense float64 building blocks used by the model, the loss and the diagnostics.

Everything here works on plain ``numpy`` arrays. The differentiable versions
of the same operations live in :mod:`sfplab.tape`.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import InputError, ShapeError, DegenerateError, UsageError

RMS_EPS = 1e-6
INIT_SCHEMES = ("xavier-uniform", "zeros", "ones")


def as_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-d matrix, got shape {a.shape}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product ``a @ b`` in float64.

    Raises ShapeError naming both shapes when the inner dimensions differ.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def causal_mask(n: int) -> np.ndarray:
    """Additive ``n x n`` mask: 0 on and below the diagonal, -inf above it."""
    mask = np.zeros((n, n))
    mask[np.triu_indices(n, k=1)] = -np.inf
    return mask


def masked_softmax(scores, mask) -> np.ndarray:
    """Softmax over the last axis of ``scores + mask``.

    ``mask`` holds 0 for visible entries and -inf for hidden ones and must
    broadcast against ``scores``. Hidden entries come out as exactly 0.0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    try:
        z = scores + mask
    except ValueError as exc:
        raise ShapeError(f"scores {scores.shape} and mask {mask.shape} do not broadcast") from exc
    if z.shape != scores.shape:
        raise ShapeError(f"mask {mask.shape} widens scores {scores.shape}")
    row_max = z.max(axis=-1, keepdims=True)
    if not np.all(np.isfinite(row_max)):
        raise DegenerateError("softmax row has no visible entry")
    e = np.exp(z - row_max)
    return e / e.sum(axis=-1, keepdims=True)


def rms_norm(x, gain, eps: float = RMS_EPS) -> np.ndarray:
    """Scale each row by ``1/sqrt(mean(x**2) + eps)`` and apply ``gain`` element-wise."""
    x = np.asarray(x, dtype=np.float64)
    gain = np.asarray(gain, dtype=np.float64)
    if gain.shape != (x.shape[-1],):
        raise ShapeError(f"gain {gain.shape} does not match row width {x.shape[-1]}")
    inv = 1.0 / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + eps)
    return x * inv * gain


def gelu_tanh(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    c = math.sqrt(2.0 / math.pi)
    return 0.5 * x * (1.0 + np.tanh(c * x * (1.0 + 0.044715 * x * x)))


def singular_values(x, tol: float = 1e-15, max_sweeps: int = 60) -> np.ndarray:
    """Singular values in descending order via one-sided (Hestenes) Jacobi.

    Columns of the working copy are rotated pairwise until mutually
    orthogonal; the column norms are then the singular values.
    """
    a = np.array(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InputError(f"singular_values needs a non-empty matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InputError("singular_values: matrix has non-finite entries")
    # fewer columns means fewer rotations; sigma(X) == sigma(X^T)
    if a.shape[1] > a.shape[0]:
        a = a.T.copy()
    n = a.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                ap = a[:, p]
                aq = a[:, q]
                alpha = ap @ ap
                beta = aq @ aq
                gamma = ap @ aq
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0.0:
                    continue
                rotated = True
                if abs(beta - alpha) > 1e150 * abs(gamma):
                    # huge zeta: t -> 1/(2 zeta), computed without overflow
                    t = gamma / (beta - alpha)
                else:
                    zeta = (beta - alpha) / (2.0 * gamma)
                    t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * ap - s * aq
                new_q = s * ap + c * aq
                a[:, p] = new_p
                a[:, q] = new_q
        if not rotated:
            break
    sv = np.sqrt(np.sum(a * a, axis=0))
    return np.sort(sv)[::-1]


def seeded_init(shape: Sequence[int], seed, scheme: str = "xavier-uniform", gain: float = 1.0) -> np.ndarray:
    """Deterministic parameter initialisation.

    ``seed`` may be an int or a sequence of ints (fed to ``default_rng``).
    Xavier-uniform draws from ``U(-b, b)`` with ``b = gain * sqrt(6 / (fan_in + fan_out))``
    where fan_in/fan_out are the first/last dimensions.
    """
    shape = tuple(int(s) for s in shape)
    if scheme == "zeros":
        return np.zeros(shape)
    if scheme == "ones":
        return np.ones(shape)
    if scheme != "xavier-uniform":
        raise UsageError(f"unknown init scheme {scheme!r}; expected one of {INIT_SCHEMES}")
    if len(shape) != 2:
        raise ShapeError(f"xavier-uniform needs a 2-d shape, got {shape}")
    bound = gain * math.sqrt(6.0 / (shape[0] + shape[1]))
    rng = np.random.default_rng(seed)
    return rng.uniform(-bound, bound, size=shape)
