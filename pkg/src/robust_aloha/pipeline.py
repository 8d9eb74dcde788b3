"""Patch-by-patch denoising of whole images with overlap averaging."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import EmptyInputError, InvalidShapeError, NumericError, RobustAlohaError
from .noise import amf_detect
from .solver import ChannelMode, SolverConfig, inpaint_decompose, robust_decompose

log = logging.getLogger(__name__)

__all__ = ["PatchGrid", "Accumulator", "plan_grid", "DenoiseResult", "run_denoise", "denoise_image"]


@dataclass(frozen=True)
class PatchGrid:
    patch_rows: int
    patch_cols: int
    stride_rows: int
    stride_cols: int
    origins: tuple[tuple[int, int], ...]

    def coverage(self, image_dims: tuple[int, int]) -> np.ndarray:
        count = np.zeros(image_dims, dtype=np.int64)
        for r, c in self.origins:
            count[r:r + self.patch_rows, c:c + self.patch_cols] += 1
        return count


def _axis_origins(length: int, patch: int, stride: int) -> list[int]:
    out = list(range(0, length - patch + 1, stride))
    if out[-1] != length - patch:
        out.append(length - patch)
    return out


def plan_grid(image_dims, patch_dims, stride=None) -> PatchGrid:
    """Row-major patch origins covering the image, the last patch per axis clamped to the edge.

    `stride` defaults to half the patch size; an int applies to both axes.
    """
    H, W = image_dims
    pr, pc = patch_dims
    if pr > H or pc > W or pr < 1 or pc < 1:
        raise InvalidShapeError(f"patch {pr}x{pc} does not fit image {H}x{W}")
    if stride is None:
        stride = (max(1, pr // 2), max(1, pc // 2))
    elif np.isscalar(stride):
        stride = (int(stride), int(stride))
    sr, sc = stride
    if sr < 1 or sc < 1:
        raise InvalidShapeError("stride must be >= 1")
    rows = _axis_origins(H, pr, sr)
    cols = _axis_origins(W, pc, sc)
    return PatchGrid(pr, pc, sr, sc, tuple((r, c) for r in rows for c in cols))


class Accumulator:
    """Running sum and count of overlapping patch estimates."""

    def __init__(self, dims):
        self.sum = np.zeros(dims)
        self.count = np.zeros(dims[:2], dtype=np.int64)

    def add(self, origin, patch):
        r, c = origin
        h, w = patch.shape[:2]
        self.sum[r:r + h, c:c + w] += patch
        self.count[r:r + h, c:c + w] += 1

    def result(self) -> np.ndarray:
        if self.count.min() < 1:
            raise InvalidShapeError("some pixels are not covered by any patch")
        count = self.count if self.sum.ndim == 2 else self.count[..., None]
        return self.sum / count


@dataclass
class DenoiseResult:
    image: np.ndarray
    sparse: np.ndarray  # overlap-averaged sparse layer (zeros on the inpainting path)
    noise_mask: np.ndarray | None  # AMF detection for salt/pepper, else None
    iterations: int


def _normalize(image):
    lo, hi = float(image.min()), float(image.max())
    if lo >= 0.0 and hi <= 1.0:
        return image, None
    if hi == lo:
        return np.zeros_like(image), (lo, 1.0)
    return (image - lo) / (hi - lo), (lo, hi - lo)


def _to_stack(patch: np.ndarray) -> np.ndarray:
    return patch[None] if patch.ndim == 2 else np.moveaxis(patch, -1, 0)


def _from_stack(stack: np.ndarray, ndim: int) -> np.ndarray:
    return stack[0] if ndim == 2 else np.moveaxis(stack, 0, -1)


def _solve_task(task):
    """Solve one patch; returns ``(clean, sparse, iterations)`` in image layout."""
    origin, patch, known, cfg, per_channel = task
    with threadpool_limits(limits=1):
        try:
            if per_channel:
                outs = [_solve_one(patch[..., c], None if known is None else known[..., c], cfg)
                        for c in range(patch.shape[2])]
                clean = np.stack([o[0] for o in outs], axis=-1)
                sparse = np.stack([o[1] for o in outs], axis=-1)
                return clean, sparse, sum(o[2] for o in outs)
            clean, sparse, it = _solve_one(_to_stack(patch), None if known is None else _to_stack(known), cfg)
            return _from_stack(clean, patch.ndim), _from_stack(sparse, patch.ndim), it
        except RobustAlohaError as exc:
            raise NumericError(f"patch at origin {origin}: {exc}", sweep=getattr(exc, "sweep", None), origin=origin) from exc


def _solve_one(M, known, cfg):
    if known is None:
        res = robust_decompose(M, cfg)
    else:
        res = inpaint_decompose(M, known, cfg)
    return res.clean, res.sparse, res.iterations_run


def run_denoise(
    image,
    noise_kind: str = "rvin",
    cfg: SolverConfig | None = None,
    grid: PatchGrid | None = None,
    *,
    threads: int = 1,
    amf_window: int = 19,
    known_mask: np.ndarray | None = None,
) -> DenoiseResult:
    """Denoise a ``H x W`` or ``H x W x C`` image patch by patch.

    ``rvin`` runs the sparse + low-rank decomposition on every patch;
    ``salt_pepper`` detects impulses with the adaptive median filter (unless
    `known_mask` is supplied) and inpaints them. Multi-channel images use the
    concatenated lift unless ``cfg.channel_mode`` is ``single``, in which case
    every channel is solved on its own.
    """
    cfg = cfg or SolverConfig()
    image = np.asarray(image, dtype=float)
    if image.ndim not in (2, 3):
        raise InvalidShapeError(f"expected H x W or H x W x C image, got {image.shape}")
    if not np.all(np.isfinite(image)):
        raise NumericError("image contains non-finite values")
    if noise_kind not in ("rvin", "salt_pepper"):
        raise ValueError(f"unknown noise kind {noise_kind!r}")
    norm, transform = _normalize(image)
    pr, pc = cfg.filter.patch_dims
    if grid is None:
        grid = plan_grid(image.shape[:2], (pr, pc))
    elif (grid.patch_rows, grid.patch_cols) != (pr, pc):
        raise InvalidShapeError("grid patch size does not match the solver configuration")

    per_channel = image.ndim == 3 and cfg.channel_mode is ChannelMode.SINGLE
    if image.ndim == 2 and cfg.channel_mode is not ChannelMode.SINGLE:
        raise InvalidShapeError("multi-channel modes need an H x W x C image")

    noise_mask = None
    known = None
    if noise_kind == "salt_pepper":
        noise_mask = amf_detect(norm, amf_window) if known_mask is None else ~np.asarray(known_mask, dtype=bool)
        known = ~noise_mask

    tasks = []
    for r, c in grid.origins:
        patch = norm[r:r + pr, c:c + pc]
        kp = None if known is None else known[r:r + pr, c:c + pc]
        if kp is not None and not kp.any():
            raise EmptyInputError(f"patch at origin {(r, c)} has no clean pixels")
        tasks.append(((r, c), patch, kp, cfg, per_channel))

    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_solve_task, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = [_solve_task(t) for t in tasks]

    # single sequential fold in origin order keeps the sums reproducible
    acc_x = Accumulator(norm.shape)
    acc_e = Accumulator(norm.shape)
    iters = 0
    for (origin, *_), (clean, sparse, it) in zip(tasks, results):
        acc_x.add(origin, clean)
        acc_e.add(origin, sparse)
        iters += it
    out = np.clip(acc_x.result(), 0.0, 1.0)
    sparse = acc_e.result()
    if transform is not None:
        lo, span = transform
        out = out * span + lo
        sparse = sparse * span
    return DenoiseResult(out, sparse, noise_mask, iters)


def denoise_image(image, noise_kind="rvin", cfg=None, grid=None, **kwargs) -> np.ndarray:
    return run_denoise(image, noise_kind, cfg, grid, **kwargs).image
