"""Dense complex tensors: contraction, reshaping and SVD.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` laid out
in row-major (C) order, so :func:`reshape` never copies.  The helpers here
add the shape validation the simulators rely on and raise
:class:`~vqst.errors.DimensionError` instead of numpy's generic errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError

ORTHO_TOL = 1e-10


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Return ``data`` as a C-contiguous complex128 array, optionally reshaped.

    Raises DimensionError for non-finite entries or a size mismatch.
    """
    arr = np.ascontiguousarray(data, dtype=np.complex128)
    if shape is not None:
        arr = reshape(arr, shape)
    if not np.all(np.isfinite(arr)):
        raise DimensionError("tensor contains NaN or Inf entries")
    return arr


def contract(a: np.ndarray, axes_a: Sequence[int], b: np.ndarray, axes_b: Sequence[int]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the free axes of ``a`` followed by the free axes of
    ``b``, both in their original order.
    """
    axes_a, axes_b = list(axes_a), list(axes_b)
    if len(axes_a) != len(axes_b):
        raise DimensionError(f"{len(axes_a)} axes of a paired with {len(axes_b)} axes of b")
    for i, j in zip(axes_a, axes_b):
        try:
            ea, eb = a.shape[i], b.shape[j]
        except IndexError as exc:
            raise DimensionError(f"axis pair ({i}, {j}) out of range") from exc
        if ea != eb:
            raise DimensionError(f"extent mismatch on axes ({i}, {j}): {ea} != {eb}")
    return np.tensordot(a, b, axes=(axes_a, axes_b))


def reshape(a: np.ndarray, new_shape: Sequence[int]) -> np.ndarray:
    new_shape = tuple(int(s) for s in new_shape)
    if any(s <= 0 for s in new_shape):
        raise DimensionError(f"extents must be positive, got {new_shape}")
    if int(np.prod(new_shape, dtype=np.int64)) != a.size:
        raise DimensionError(f"cannot reshape size {a.size} into {new_shape}")
    return np.reshape(a, new_shape, order="C")


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``m = u @ diag(s) @ vdag`` with ``s`` sorted descending."""

    u: np.ndarray
    s: np.ndarray
    vdag: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.vdag


def svd(m: np.ndarray) -> SvdResult:
    """Thin singular value decomposition of a rank-2 tensor.

    Backed by LAPACK ``gesdd`` with a fallback to the slower but more robust
    ``gesvd`` driver when the divide-and-conquer routine fails to converge.
    """
    if m.ndim != 2:
        raise DimensionError(f"svd needs a rank-2 tensor, got rank {m.ndim}")
    try:
        u, s, vdag = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        u, s, vdag = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return SvdResult(u=u, s=s, vdag=vdag)
