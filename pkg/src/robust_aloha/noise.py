"""Impulse-noise models, adaptive median detection and the median-filter baseline.

Random streams come from NumPy's Philox4x32-10 counter-based generator seeded
with ``NoiseSpec.seed``. Draw order: one ``random()`` array over the image
shape (``H x W`` for shared channel locations, ``H x W x C`` otherwise) for
locations, then one ``random()`` array over the full image shape for values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InvalidConfigError

__all__ = ["NoiseSpec", "make_rng", "add_rvin", "add_salt_pepper", "add_noise", "amf_detect", "median_filter"]

KINDS = ("rvin", "salt_pepper")
CHANNEL_LOCATIONS = ("independent", "common")


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "rvin"
    density: float = 0.25
    d_min: float = 0.0
    d_max: float = 1.0
    seed: int = 0
    channel_locations: str = "independent"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfigError(f"unknown noise kind {self.kind!r}")
        if not (0.0 <= self.density <= 1.0):
            raise InvalidConfigError(f"noise density p must lie in [0, 1], got {self.density}")
        if not (self.d_min < self.d_max):
            raise InvalidConfigError("d_min must be smaller than d_max")
        if self.channel_locations not in CHANNEL_LOCATIONS:
            raise InvalidConfigError(f"unknown channel location mode {self.channel_locations!r}")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _draw_locations(image: np.ndarray, spec: NoiseSpec, rng) -> np.ndarray:
    # uniform draw u per site; callers compare u against p (or p/2)
    if image.ndim == 3 and spec.channel_locations == "common":
        u = rng.random(image.shape[:2])
        return np.broadcast_to(u[..., None], image.shape)
    return rng.random(image.shape)


def add_rvin(image, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Replace each pixel with probability p by a uniform value in [d_min, d_max]."""
    if spec.kind != "rvin":
        raise InvalidConfigError("add_rvin needs kind='rvin'")
    image = np.asarray(image, dtype=float)
    rng = make_rng(spec.seed)
    mask = _draw_locations(image, spec, rng) < spec.density
    values = spec.d_min + (spec.d_max - spec.d_min) * rng.random(image.shape)
    return np.where(mask, values, image), np.array(mask)


def add_salt_pepper(image, spec: NoiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Set pixels to d_min with probability p/2 and to d_max with probability p/2."""
    if spec.kind != "salt_pepper":
        raise InvalidConfigError("add_salt_pepper needs kind='salt_pepper'")
    image = np.asarray(image, dtype=float)
    rng = make_rng(spec.seed)
    u = _draw_locations(image, spec, rng)
    half = spec.density / 2
    pepper = u < half
    salt = (u >= half) & (u < spec.density)
    out = np.where(pepper, spec.d_min, np.where(salt, spec.d_max, image))
    return out, np.array(pepper | salt)


def add_noise(image, spec: NoiseSpec):
    if spec.kind == "rvin":
        return add_rvin(image, spec)
    return add_salt_pepper(image, spec)


def _check_window(window: int, name: str = "window") -> None:
    if int(window) != window or window < 1 or window % 2 == 0:
        raise InvalidConfigError(f"{name} must be an odd positive integer, got {window}")


def median_filter(image, window: int = 3) -> np.ndarray:
    """Per-pixel median over a square window, reflecting at the borders.

    Multi-channel images (``H x W x C``) are filtered channel by channel.
    """
    _check_window(window)
    image = np.asarray(image, dtype=float)
    size = (window, window) + (1,) * (image.ndim - 2)
    return ndimage.median_filter(image, size=size, mode="reflect")


def adaptive_median(image, max_window: int = 19, min_window: int = 3) -> np.ndarray:
    """Adaptive median filter output for a single-channel image.

    Stage A grows the window until ``min < median < max`` (or the window limit
    is reached, where the median is taken); stage B keeps the pixel when it is
    strictly between the local extremes and replaces it by the median otherwise.
    """
    _check_window(max_window, "max_window")
    _check_window(min_window, "min_window")
    if max_window < 3 or min_window > max_window:
        raise InvalidConfigError("need 3 <= min_window <= max_window")
    image = np.asarray(image, dtype=float)
    out = image.copy()
    pending = np.ones(image.shape, dtype=bool)
    for w in range(min_window, max_window + 1, 2):
        zmin = ndimage.minimum_filter(image, size=w, mode="reflect")
        zmax = ndimage.maximum_filter(image, size=w, mode="reflect")
        zmed = ndimage.median_filter(image, size=w, mode="reflect")
        stage_a = pending & (zmin < zmed) & (zmed < zmax)
        keep = (zmin < image) & (image < zmax)
        out[stage_a] = np.where(keep, image, zmed)[stage_a]
        pending &= ~stage_a
        if w == max_window:
            out[pending] = zmed[pending]
        if not pending.any():
            break
    return out


def amf_detect(image, max_window: int = 19, d_min: float = 0.0, d_max: float = 1.0) -> np.ndarray:
    """Flag salt/pepper pixels: extreme-valued pixels that the adaptive median changes.

    Multi-channel images are processed per channel.
    """
    image = np.asarray(image, dtype=float)
    if image.ndim == 3:
        return np.stack([amf_detect(image[..., c], max_window, d_min, d_max) for c in range(image.shape[2])], axis=-1)
    filtered = adaptive_median(image, max_window)
    extreme = (image == d_min) | (image == d_max)
    return extreme & (filtered != image)
