"""Dense tensor algebra used by the polynomial evaluators.

Tensors are C-contiguous float64 ndarrays; modes are numbered from 1.
Mode-m unfolding maps element (i_1, ..., i_M) to row i_m and column
j = 1 + sum_{k != m} (i_k - 1) * J_k with J_k = prod_{n < k, n != m} I_n,
so the first remaining mode varies fastest along a row.
"""

from __future__ import annotations

from functools import reduce

import numpy as np


def _as_tensor(t) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(t, dtype=np.float64))


def _check_mode(m: int, order: int) -> None:
    if not 1 <= m <= order:
        raise ValueError(f"mode {m} out of range for an order-{order} tensor")


def mode_m_unfold(t, m: int) -> np.ndarray:
    """Matricize `t` along mode `m` (1-based), columns in the layout above."""
    t = _as_tensor(t)
    _check_mode(m, t.ndim)
    return np.reshape(np.moveaxis(t, m - 1, 0), (t.shape[m - 1], -1), order="F")


def mode_m_fold(mat, m: int, shape) -> np.ndarray:
    """Inverse of :func:`mode_m_unfold` for a tensor of the given shape."""
    mat = np.asarray(mat, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(m, len(shape))
    if mat.shape != (shape[m - 1], int(np.prod(shape)) // shape[m - 1]):
        raise ValueError(
            f"unfolded shape {mat.shape} does not match mode-{m} of {shape}"
        )
    rest = shape[:m - 1] + shape[m:]
    folded = np.reshape(mat, (shape[m - 1],) + rest, order="F")
    return np.ascontiguousarray(np.moveaxis(folded, 0, m - 1))


def mode_m_vec_product(t, m: int, u) -> np.ndarray:
    """Contract mode `m` of `t` with the vector `u`; the order drops by one.

    vec of the result in the unfolding column layout equals
    mode_m_unfold(t, m).T @ u.
    """
    t = _as_tensor(t)
    u = np.asarray(u, dtype=np.float64)
    _check_mode(m, t.ndim)
    if u.ndim != 1:
        raise ValueError(f"expected a vector, got shape {u.shape}")
    if t.shape[m - 1] != u.shape[0]:
        raise ValueError(
            f"mode-{m} size {t.shape[m - 1]} does not match vector length {u.shape[0]}"
        )
    return np.tensordot(t, u, axes=([m - 1], [0]))


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; row (i, j) flattens with i slowest."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column counts differ: {a.shape[1]} vs {b.shape[1]}"
        )
    out = np.einsum("ir,jr->ijr", a, b)
    return out.reshape(a.shape[0] * b.shape[0], a.shape[1])


def khatri_rao_chain(mats) -> np.ndarray:
    """Left-to-right Khatri-Rao product of a nonempty matrix sequence."""
    mats = list(mats)
    if not mats:
        raise ValueError("khatri_rao_chain needs at least one matrix")
    return reduce(khatri_rao, mats)


def hadamard(a, b) -> np.ndarray:
    """Elementwise product with strict shape agreement (no broadcasting)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a * b


def cp_reconstruct(factors) -> np.ndarray:
    """Dense tensor with CP factors `factors` (one I_m x R matrix per mode)."""
    factors = [np.asarray(f, dtype=np.float64) for f in factors]
    if not factors:
        raise ValueError("cp_reconstruct needs at least one factor matrix")
    ranks = {f.shape[1] for f in factors if f.ndim == 2}
    if any(f.ndim != 2 for f in factors) or len(ranks) != 1:
        raise ValueError(
            "factors must be matrices sharing one rank; got shapes "
            + str([f.shape for f in factors])
        )
    letters = "abcdefghijklmnop"
    if len(factors) > len(letters):
        raise ValueError(f"too many modes: {len(factors)}")
    subs = ",".join(f"{letters[i]}r" for i in range(len(factors)))
    return np.einsum(subs + "->" + letters[: len(factors)], *factors)
