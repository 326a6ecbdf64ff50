"""Real multispectral stacks to complex or 3-channel representations."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .complex import ComplexTensor
from .tensor import ContractError, DimensionError, Tensor

__all__ = [
    "BAND_ORDER",
    "BINS",
    "sliding_encode",
    "sliding_decode",
    "reduce_average",
    "reduce_binned",
]

BAND_ORDER = ("Coastal Blue", "Blue", "Green", "Yellow", "Red", "Red Edge", "Near-IR1", "Near-IR2")

# 0-based channel bins for the binned-average reduction
BINS = ((0, 3), (3, 6), (6, 8))


def _as_tensor(img) -> Tensor:
    return img if isinstance(img, Tensor) else Tensor(img)


def sliding_encode(img) -> ComplexTensor:
    """Pair adjacent bands: channel k becomes I_k + i*I_{k+1}.

    An m-band [N, m, H, W] stack becomes an (m-1)-channel complex tensor.
    """
    img = _as_tensor(img)
    if img.ndim != 4:
        raise DimensionError(f"sliding_encode: expected [N,m,H,W], got {img.shape}")
    m = img.shape[1]
    if m < 2:
        raise ContractError(f"sliding_encode needs at least 2 bands, got {m}")
    return ComplexTensor(T.slice_channels(img, 0, m - 1), T.slice_channels(img, 1, m))


def sliding_decode(z: ComplexTensor) -> np.ndarray:
    """Invert :func:`sliding_encode`: real parts plus the last imaginary part."""
    re, im = z.re.data, z.im.data
    return np.concatenate([re, im[:, -1:]], axis=1)


def _check_eight(img: Tensor, name: str) -> None:
    if img.ndim != 4 or img.shape[1] != 8:
        raise DimensionError(f"{name}: expected [N,8,H,W], got {img.shape}")


def reduce_average(img) -> Tensor:
    """Mean over all 8 bands, duplicated into 3 identical channels."""
    img = _as_tensor(img)
    _check_eight(img, "reduce_average")
    avg = T.mean(img, axis=1, keepdims=True)
    return T.concat_channels([avg, avg, avg])


def reduce_binned(img) -> Tensor:
    """Per-bin means over bands 1-3, 4-6 and 7-8."""
    img = _as_tensor(img)
    _check_eight(img, "reduce_binned")
    parts = [T.mean(T.slice_channels(img, a, b), axis=1, keepdims=True) for a, b in BINS]
    return T.concat_channels(parts)
