"""Two-dimensional block-Hankel lifting of image patches.

Storage convention (row-major patches, 0-based indices): for a patch ``X`` of
shape ``(M, N)`` and a filter of shape ``(p, q)``, with ``R = M - p + 1`` and
``K = N - q + 1``, the lifted matrix has shape ``(R * K, p * q)`` and

    lifted[j * R + i, b * p + a] = X[i + a, j + b]

for ``0 <= i < R``, ``0 <= j < K``, ``0 <= a < p``, ``0 <= b < q``.  The inner
1-D Hankel blocks run down the first patch axis with window ``p``; the block
rows and block columns step along the second axis with window ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyInputError, InvalidShapeError

__all__ = [
    "HankelShape",
    "LiftedMatrix",
    "MultiChannelLifted",
    "lift",
    "adjoint",
    "multiplicity",
    "pseudo_inverse",
    "concat_channels",
    "split_channels",
]


@dataclass(frozen=True)
class HankelShape:
    """Patch and filter geometry of a lifting."""

    patch_rows: int
    patch_cols: int
    filt_rows: int
    filt_cols: int

    def __post_init__(self):
        for name in ("patch_rows", "patch_cols", "filt_rows", "filt_cols"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidShapeError(f"{name} must be a positive integer, got {v!r}")
        if self.filt_rows > self.patch_rows or self.filt_cols > self.patch_cols:
            raise InvalidShapeError(
                f"filter {self.filt_rows}x{self.filt_cols} does not fit "
                f"patch {self.patch_rows}x{self.patch_cols}"
            )

    @classmethod
    def square(cls, patch: int, filt: int) -> "HankelShape":
        return cls(patch, patch, filt, filt)

    @property
    def patch_dims(self) -> tuple[int, int]:
        return (self.patch_rows, self.patch_cols)

    @property
    def window_rows(self) -> int:
        """Number of filter placements along the first axis."""
        return self.patch_rows - self.filt_rows + 1

    @property
    def window_cols(self) -> int:
        return self.patch_cols - self.filt_cols + 1

    @property
    def lifted_rows(self) -> int:
        return self.window_rows * self.window_cols

    @property
    def lifted_cols(self) -> int:
        return self.filt_rows * self.filt_cols

    @property
    def lifted_dims(self) -> tuple[int, int]:
        return (self.lifted_rows, self.lifted_cols)

    def with_patch(self, rows: int, cols: int) -> "HankelShape":
        return HankelShape(rows, cols, self.filt_rows, self.filt_cols)


@dataclass(frozen=True)
class LiftedMatrix:
    data: np.ndarray
    shape: HankelShape

    def __post_init__(self):
        if self.data.shape != self.shape.lifted_dims:
            raise InvalidShapeError(
                f"lifted data has shape {self.data.shape}, expected {self.shape.lifted_dims}"
            )


@dataclass(frozen=True)
class MultiChannelLifted:
    """Channel blocks concatenated side by side."""

    data: np.ndarray
    shape: HankelShape
    channel_count: int

    @property
    def blocks(self) -> list[LiftedMatrix]:
        return split_channels(self)


def _check_patch(patch: np.ndarray, shape: HankelShape) -> np.ndarray:
    patch = np.asarray(patch, dtype=float)
    if patch.shape != shape.patch_dims:
        raise InvalidShapeError(f"patch has shape {patch.shape}, expected {shape.patch_dims}")
    return patch


def _check_lifted(data: np.ndarray, shape: HankelShape) -> np.ndarray:
    data = np.asarray(data, dtype=float)
    if data.shape != shape.lifted_dims:
        raise InvalidShapeError(f"lifted data has shape {data.shape}, expected {shape.lifted_dims}")
    return data


@lru_cache(maxsize=64)
def _index_map(shape: HankelShape) -> np.ndarray:
    # flat (row-major) patch index of every lifted entry, flattened row-major
    idx = np.arange(shape.patch_rows * shape.patch_cols).reshape(shape.patch_dims)
    out = lift_array(idx, shape).ravel()
    out.setflags(write=False)
    return out


@lru_cache(maxsize=64)
def _multiplicity(shape: HankelShape) -> np.ndarray:
    wr = _axis_weights(shape.patch_rows, shape.filt_rows)
    wc = _axis_weights(shape.patch_cols, shape.filt_cols)
    out = np.outer(wr, wc)
    out.setflags(write=False)
    return out


def _axis_weights(length: int, window: int) -> np.ndarray:
    i = np.arange(length)
    return np.minimum.reduce([i + 1, np.full(length, window), np.full(length, length - window + 1), length - i]).astype(float)


def lift_array(patch: np.ndarray, shape: HankelShape) -> np.ndarray:
    """Lift a patch to its block-Hankel matrix as a plain array."""
    w = sliding_window_view(patch, (shape.filt_rows, shape.filt_cols))  # (R, K, p, q)
    return w.transpose(1, 0, 3, 2).reshape(shape.lifted_dims)


def adjoint_array(data: np.ndarray, shape: HankelShape) -> np.ndarray:
    """Sum every lifted entry back onto the pixel it was copied from."""
    n = shape.patch_rows * shape.patch_cols
    out = np.bincount(_index_map(shape), weights=data.ravel(), minlength=n)
    return out.reshape(shape.patch_dims)


def pseudo_inverse_array(data: np.ndarray, shape: HankelShape) -> np.ndarray:
    return adjoint_array(data, shape) / _multiplicity(shape)


def lift(patch: np.ndarray, shape: HankelShape) -> LiftedMatrix:
    patch = _check_patch(patch, shape)
    return LiftedMatrix(np.ascontiguousarray(lift_array(patch, shape)), shape)


def adjoint(lifted: LiftedMatrix) -> np.ndarray:
    return adjoint_array(_check_lifted(lifted.data, lifted.shape), lifted.shape)


def multiplicity(shape: HankelShape) -> np.ndarray:
    """Number of lifted entries that duplicate each pixel."""
    return _multiplicity(shape).copy()


def pseudo_inverse(lifted: LiftedMatrix) -> np.ndarray:
    """Average the lifted entries belonging to each pixel (left inverse of `lift`)."""
    return pseudo_inverse_array(_check_lifted(lifted.data, lifted.shape), lifted.shape)


def concat_channels(lifted_list) -> MultiChannelLifted:
    lifted_list = list(lifted_list)
    if not lifted_list:
        raise EmptyInputError("no channels to concatenate")
    shape = lifted_list[0].shape
    for m in lifted_list[1:]:
        if m.shape != shape:
            raise InvalidShapeError(f"channel shapes differ: {m.shape} vs {shape}")
    data = np.hstack([m.data for m in lifted_list])
    return MultiChannelLifted(data, shape, len(lifted_list))


def split_channels(multi: MultiChannelLifted) -> list[LiftedMatrix]:
    w = multi.shape.lifted_cols
    if multi.data.shape != (multi.shape.lifted_rows, w * multi.channel_count):
        raise InvalidShapeError(f"concatenated data has shape {multi.data.shape}")
    return [LiftedMatrix(multi.data[:, c * w:(c + 1) * w].copy(), multi.shape) for c in range(multi.channel_count)]


def lift_stack(stack: np.ndarray, shape: HankelShape) -> np.ndarray:
    """Lift a ``(C, M, N)`` stack and concatenate the channel blocks."""
    return np.hstack([lift_array(ch, shape) for ch in stack])


def pseudo_inverse_stack(data: np.ndarray, shape: HankelShape) -> np.ndarray:
    w = shape.lifted_cols
    C = data.shape[1] // w
    return np.stack([pseudo_inverse_array(data[:, c * w:(c + 1) * w], shape) for c in range(C)])
