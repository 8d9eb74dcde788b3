"""SVD-free low-rank fitting used to warm-start the ADMM factors.

Alternating least squares on ``min ||X Y - Z||_F`` with successive
over-relaxation of the residual (Wen, Yin & Zhang, 2012), an increasing rank
strategy, and rank detection from the diagonal of a column-pivoted QR.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericError


@dataclass
class LMaFitResult:
    U: np.ndarray
    V: np.ndarray
    rank: int
    relres: float
    iterations: int


def qr_rank_drop(X: np.ndarray, ratio: float) -> int | None:
    """Return the detected rank if the pivoted-QR diagonal of `X` has an abrupt drop.

    With ``d`` the sorted diagonal magnitudes, the largest jump
    ``d[i] / d[i + 1]`` is compared with the mean of the other jumps; a jump
    more than `ratio` times that mean detects rank ``i + 1``. ``None`` means
    no abrupt drop (every column looks significant).
    """
    k = X.shape[1]
    if k < 2:
        return None
    _, R, _ = sla.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d[0] == 0.0:
        return 0
    tiny = d[0] * np.finfo(float).eps
    jumps = d[:-1] / np.maximum(d[1:], tiny)
    i = int(np.argmax(jumps))
    others = np.delete(jumps, i)
    baseline = others.mean() if others.size else 1.0
    if jumps[i] > ratio * baseline:
        return i + 1
    return None


def lmafit(
    Z: np.ndarray,
    known: np.ndarray | None = None,
    *,
    tol: float = 0.2,
    init_rank: int = 1,
    max_rank: int | None = None,
    max_iters: int = 100,
    qr_ratio: float = 10.0,
    stall_tol: float = 1e-2,
    seed: int = 0,
) -> LMaFitResult:
    """Fit ``Z ~ U @ V.T`` on the entries flagged by `known` (all entries if None).

    Returns balanced factors (``U.T @ U == V.T @ V``).
    """
    Z = np.asarray(Z, dtype=float)
    if not np.all(np.isfinite(Z)):
        raise NumericError("lmafit target contains non-finite values")
    m, n = Z.shape
    kmax = min(m, n) if max_rank is None else max(1, min(max_rank, m, n))
    k = max(1, min(init_rank, kmax))
    if known is None:
        data = Z
    else:
        known = np.asarray(known, dtype=bool)
        data = np.where(known, Z, 0.0)
    datanrm = np.linalg.norm(data)
    if datanrm == 0.0:
        return LMaFitResult(np.zeros((m, k)), np.zeros((n, k)), k, 0.0, 0)

    rng = np.random.default_rng(seed)
    X = np.zeros((m, k))
    Y = np.eye(k, n)
    W = data.copy()
    res = datanrm
    alf, increment = 0.0, 1.0
    it = 0
    for it in range(1, max_iters + 1):
        X0, Y0, res0 = X, Y, res
        Xn = W @ Y.T
        X, _ = np.linalg.qr(Xn)
        Y = X.T @ W
        XY = X @ Y
        resid = data - XY if known is None else np.where(known, data - XY, 0.0)
        res = np.linalg.norm(resid)
        ratio = res / res0 if res0 > 0 else 0.0
        if ratio >= 1.0 and X0.shape == X.shape:
            increment = max(0.1 * alf, 0.1 * increment)
            X, Y, res, alf = X0, Y0, res0, 0.0
            XY = X @ Y
            resid = data - XY if known is None else np.where(known, data - XY, 0.0)
        elif ratio > 0.7:
            increment = max(increment, 0.25 * alf)
            alf += increment
        relres = res / datanrm
        if relres <= tol:
            break
        if k < kmax and abs(1.0 - ratio) < stall_tol:
            k += 1
            Y = np.vstack([Y, rng.standard_normal((1, n))])
            X = np.hstack([X, np.zeros((m, 1))])
            alf = 0.0
        W = XY + (1.0 + alf) * resid

    # balance the factors so that U.T @ U == V.T @ V, leading directions first
    A, s, Bt = np.linalg.svd(Y, full_matrices=False)
    root = np.sqrt(s)
    U = (X @ A) * root
    V = Bt.T * root
    r = qr_rank_drop(U, qr_ratio) if U.shape[1] > 2 else None
    if r is not None and r >= 1:
        U, V = U[:, :r], V[:, :r]
    return LMaFitResult(U, V, U.shape[1], float(res / datanrm), it)
