"""PSNR with the peak taken from the reference image."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidShapeError, NumericError

__all__ = ["MetricReport", "psnr", "rmse", "CSV_FIELDS", "csv_row"]

CSV_FIELDS = ("image", "noise_kind", "p", "seed", "method", "psnr_db", "seconds")


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float  # math.inf when the images are identical
    rmse: float
    linf: float

    def to_text(self) -> str:
        psnr = "inf" if math.isinf(self.psnr_db) else f"{self.psnr_db:.6f}"
        return f"psnr_db={psnr}\nrmse={self.rmse:.9g}\nlinf={self.linf:.9g}\n"


def _pair(reference, candidate):
    a = np.asarray(reference, dtype=float)
    b = np.asarray(candidate, dtype=float)
    if a.shape != b.shape:
        raise InvalidShapeError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rmse(reference, candidate) -> float:
    a, b = _pair(reference, candidate)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def psnr(reference, candidate) -> MetricReport:
    """``20 log10(max|y| / RMSE)`` pooled over all pixels and channels."""
    a, b = _pair(reference, candidate)
    peak = float(np.max(np.abs(a)))
    if peak == 0.0:
        raise NumericError("reference image is all zero; PSNR peak is undefined")
    diff = a - b
    err = float(np.linalg.norm(diff.ravel()) / math.sqrt(diff.size))
    linf = float(np.max(np.abs(diff)))
    value = math.inf if err == 0.0 else 20.0 * math.log10(peak / err)
    return MetricReport(value, err, linf)


def csv_row(image: str, noise_kind: str, p: float, seed: int, method: str, psnr_db: float, seconds: float) -> list[str]:
    return [image, noise_kind, f"{p:g}", str(seed), method, "inf" if math.isinf(psnr_db) else f"{psnr_db:.4f}", f"{seconds:.3f}"]
