"""Deterministic synthetic test images and patches.

None of the standard test photographs ship with the package, so experiments
and acceptance checks run on generated content with known ground truth.
"""

from __future__ import annotations

import numpy as np


def exponential_modes(k: int, size=(25, 25), rng=None, offset: float = 0.0) -> np.ndarray:
    """Sum of `k` separable real exponential modes ``c * z**i * w**j``.

    Every mode lifts to a rank-one block-Hankel matrix, so the lift of the sum
    has rank exactly `k` whenever the filter is at least ``k x k``. The modes
    have distinct bases and the result lies in [0, 1].
    """
    rng = np.random.default_rng(rng)
    i = np.arange(size[0])[:, None]
    j = np.arange(size[1])[None, :]
    bases_r = np.linspace(0.90, 1.0, k) + rng.uniform(-0.01, 0.0, k)
    bases_c = np.linspace(0.99, 0.91, k) + rng.uniform(-0.01, 0.0, k)
    weights = rng.uniform(0.5, 1.0, k)
    weights *= (1.0 - offset) / weights.sum()
    X = offset + sum(c * zr ** i * zc ** j for c, zr, zc in zip(weights, bases_r, bases_c))
    return X


def two_mode_patch(rng=None, size=(25, 25)) -> np.ndarray:
    """Constant plus a decaying exponential ramp: lifted rank 2, values in (0, 1)."""
    rng = np.random.default_rng(rng)
    i = np.arange(size[0])[:, None]
    j = np.arange(size[1])[None, :]
    z, w = rng.uniform(0.90, 0.97, 2)
    a = rng.uniform(0.2, 0.4)
    b = rng.uniform(0.3, 0.5)
    if rng.random() < 0.5:
        i = i[::-1]
    return a + b * z ** i * w ** j


def textured_image(size: int = 128, seed: int = 0) -> np.ndarray:
    """Strong oriented stripe textures in separate regions over a smooth shading."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size].astype(float)
    base = 0.5 + 0.15 * np.sin(2 * np.pi * (x + 0.5 * y) / (1.7 * size))
    img = base.copy()
    cells = 2
    step = size / cells
    for a in range(cells):
        for b in range(cells):
            theta = rng.uniform(0, np.pi)
            period = rng.uniform(4.0, 7.0)
            amp = rng.uniform(0.2, 0.3)
            region = (y >= a * step) & (y < (a + 1) * step) & (x >= b * step) & (x < (b + 1) * step)
            phase = 2 * np.pi * (x * np.cos(theta) + y * np.sin(theta)) / period
            img = np.where(region, base + amp * np.sin(phase + rng.uniform(0, 2 * np.pi)), img)
    return np.clip(img, 0.0, 1.0)


def piecewise_smooth_image(size: int = 128, seed: int = 0) -> np.ndarray:
    """Smooth gradients separated by a few straight and circular edges."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size].astype(float) / size
    img = 0.35 + 0.25 * x + 0.15 * y
    disk = (x - 0.35) ** 2 + (y - 0.4) ** 2 < 0.2 ** 2
    img = np.where(disk, 0.75 - 0.2 * y, img)
    band = y > 0.7 + 0.1 * x
    img = np.where(band, 0.2 + 0.1 * np.sin(3 * x + rng.uniform(0, 1)), img)
    return np.clip(img, 0.02, 0.98)


def modulated_channels(size: int = 64, channels: int = 3, seed: int = 0) -> np.ndarray:
    """``H x W x C`` image whose channels are filtered copies of one base texture."""
    base = textured_image(size, seed)
    rng = np.random.default_rng(seed + 1)
    out = []
    for _ in range(channels):
        gain = rng.uniform(0.6, 1.0)
        shift = rng.uniform(0.0, 1.0 - gain)
        # small separable smoothing as the channel-specific modulation
        h = np.array([rng.uniform(0, 0.25), 1.0, rng.uniform(0, 0.25)])
        h /= h.sum()
        ch = np.apply_along_axis(lambda v: np.convolve(v, h, mode="same"), 0, base)
        ch = np.apply_along_axis(lambda v: np.convolve(v, h, mode="same"), 1, ch)
        ch[0, :], ch[-1, :], ch[:, 0], ch[:, -1] = base[0, :], base[-1, :], base[:, 0], base[:, -1]
        out.append(shift + gain * ch)
    return np.clip(np.stack(out, axis=-1), 0.0, 1.0)
