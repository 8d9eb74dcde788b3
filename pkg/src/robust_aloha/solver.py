"""Sparse + low-rank decomposition of lifted patches by factorized ADMM."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
import scipy.linalg as sla

from . import hankel
from .errors import EmptyInputError, InvalidConfigError, InvalidShapeError, NumericError
from .hankel import HankelShape, LiftedMatrix, MultiChannelLifted
from .lmafit import lmafit

log = logging.getLogger(__name__)

__all__ = [
    "ChannelMode",
    "SolverConfig",
    "FactorPair",
    "DecompositionResult",
    "soft_threshold",
    "group_soft_threshold",
    "lmafit_init",
    "robust_decompose",
    "inpaint",
]


class ChannelMode(str, Enum):
    SINGLE = "single"
    INDEPENDENT = "independent"
    COMMON_LOCATION = "common_location"


@dataclass(frozen=True)
class SolverConfig:
    """Hyper-parameters of the decomposition.

    ``filter`` carries both the patch and the annihilating-filter dimensions.
    ``lifting=False`` decomposes the raw patch matrix instead of its Hankel
    lift (ablation only). ``x_update="exact"`` replaces the averaged X-update
    by the exact minimizer that weights each pixel by its multiplicity.
    ``lmafit_tol`` is tied to the impulse density (0.2 at 25%, 0.3 at 40%);
    the inpainting path fits the clean pixels only and uses
    ``inpaint_lmafit_tol``.
    """

    filter: HankelShape = field(default_factory=lambda: HankelShape.square(25, 11))
    tau: float = 0.1
    mu: float = 1.0
    beta: float = 1.0
    max_admm_iters: int = 500
    admm_tol: float = 1e-4
    lmafit_tol: float = 0.2
    inpaint_lmafit_tol: float = 1e-3
    lmafit_init_rank: int = 1
    lmafit_max_rank: int | None = None
    lmafit_max_iters: int = 100
    lmafit_qr_ratio: float = 10.0
    lmafit_stall_tol: float = 1e-2
    channel_mode: ChannelMode = ChannelMode.SINGLE
    x_update: str = "scalar"
    lifting: bool = True
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channel_mode", ChannelMode(self.channel_mode))
        if not (self.tau >= 0):
            raise InvalidConfigError(f"tau must be >= 0, got {self.tau}")
        if not (self.mu > 0 and self.beta > 0):
            raise InvalidConfigError("mu and beta must be positive")
        if self.max_admm_iters < 1 or not (self.admm_tol > 0) or not (self.lmafit_tol > 0 and self.inpaint_lmafit_tol > 0):
            raise InvalidConfigError("iteration limits and tolerances must be positive")
        if self.lmafit_init_rank < 1:
            raise InvalidConfigError("lmafit_init_rank must be >= 1")
        if self.lmafit_max_rank is not None:
            # multi-channel lifts are C times wider; the cap is clipped to the actual width at solve time
            limit = self.shape.lifted_cols if self.channel_mode is ChannelMode.SINGLE else None
            if self.lmafit_max_rank < 1 or (limit is not None and self.lmafit_max_rank > limit):
                raise InvalidConfigError(f"lmafit_max_rank must lie in [1, {limit}], got {self.lmafit_max_rank}")
        if self.x_update not in ("scalar", "exact"):
            raise InvalidConfigError(f"x_update must be 'scalar' or 'exact', got {self.x_update!r}")

    @property
    def shape(self) -> HankelShape:
        """Lifting actually used by the solver."""
        if self.lifting:
            return self.filter
        # filter spanning the first axis: the lift is the transposed raw patch
        return HankelShape(self.filter.patch_rows, self.filter.patch_cols, self.filter.patch_rows, 1)

    def max_rank_for(self, lifted_dims: tuple[int, int]) -> int:
        if self.lmafit_max_rank is not None:
            return min(self.lmafit_max_rank, *lifted_dims)
        return max(1, min(lifted_dims) // 4)

    def with_patch(self, rows: int, cols: int) -> "SolverConfig":
        return replace(self, filter=self.filter.with_patch(rows, cols))


@dataclass
class FactorPair:
    U: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def product(self) -> np.ndarray:
        return self.U @ self.V.T


@dataclass
class DecompositionResult:
    clean: np.ndarray
    sparse: np.ndarray
    factors: FactorPair
    iterations_run: int
    converged: bool
    final_residual: float
    # ||H{X} - U V^T||_F after every sweep
    feasibility: list[float] = field(default_factory=list)


def soft_threshold(x, lam: float):
    """Elementwise ``sign(x) * max(|x| - lam, 0)``."""
    if lam < 0:
        raise InvalidConfigError("threshold must be non-negative")
    x = np.asarray(x, dtype=float)
    out = np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)
    return out if out.ndim else float(out)


def group_soft_threshold(stack, lam: float) -> np.ndarray:
    """Shrink the across-channel vector at every pixel by `lam` in Euclidean norm.

    `stack` is a sequence of C equally shaped patches (or a ``(C, ...)`` array).
    """
    if lam < 0:
        raise InvalidConfigError("threshold must be non-negative")
    if len(stack) == 0:
        raise EmptyInputError("empty channel stack")
    stack = np.asarray(stack, dtype=float)
    norm = np.sqrt(np.sum(stack * stack, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norm > lam, (norm - lam) / norm, 0.0)
    return stack * scale


def _as_stack(measurement) -> tuple[np.ndarray, bool]:
    if isinstance(measurement, (list, tuple)):
        if not measurement:
            raise EmptyInputError("no channels given")
        arr = np.stack([np.asarray(m, dtype=float) for m in measurement])
        return arr, True
    arr = np.asarray(measurement, dtype=float)
    if arr.ndim == 2:
        return arr[None], False
    if arr.ndim == 3:
        return arr, True
    raise InvalidShapeError(f"expected a patch or a channel stack, got shape {arr.shape}")


def _check_config(stack: np.ndarray, cfg: SolverConfig) -> HankelShape:
    if stack.shape[1:] != cfg.filter.patch_dims:
        raise InvalidShapeError(f"patch shape {stack.shape[1:]} does not match config {cfg.filter.patch_dims}")
    if cfg.channel_mode is ChannelMode.SINGLE and stack.shape[0] != 1:
        raise InvalidShapeError("channel_mode 'single' needs exactly one channel")
    if not np.all(np.isfinite(stack)):
        raise NumericError("measurement contains non-finite values")
    return cfg.shape


def lmafit_init(target, cfg: SolverConfig, known: np.ndarray | None = None, tol: float | None = None) -> FactorPair:
    """Initial factors fitted to a lifted measurement (plain array, single or multi-channel)."""
    data = target.data if isinstance(target, (LiftedMatrix, MultiChannelLifted)) else np.asarray(target, dtype=float)
    if not np.all(np.isfinite(data)):
        raise NumericError("lifted target contains non-finite values")
    fit = lmafit(
        data,
        known,
        tol=cfg.lmafit_tol if tol is None else tol,
        init_rank=cfg.lmafit_init_rank,
        max_rank=cfg.max_rank_for(data.shape),
        max_iters=cfg.lmafit_max_iters,
        qr_ratio=cfg.lmafit_qr_ratio,
        stall_tol=cfg.lmafit_stall_tol,
        seed=cfg.seed,
    )
    log.debug("lmafit rank=%d relres=%.3g iters=%d", fit.rank, fit.relres, fit.iterations)
    return FactorPair(fit.U, fit.V)


def _update_factors(T: np.ndarray, U: np.ndarray, V: np.ndarray, mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form U then V updates for ``1/2||U||^2 + mu/2||T - U V^T||^2``."""
    k = U.shape[1]
    eye = np.eye(k)
    G = sla.cho_factor(eye + mu * (V.T @ V))
    U = sla.cho_solve(G, mu * (V.T @ T.T)).T
    G = sla.cho_factor(eye + mu * (U.T @ U))
    V = sla.cho_solve(G, mu * (U.T @ T)).T
    return U, V


def _admm(M, known, cfg: SolverConfig, shape: HankelShape, sparse: bool) -> DecompositionResult:
    """Shared sweep loop. ``known`` restricts the data term (inpainting) and ``sparse`` enables E."""
    mu, beta = cfg.mu, cfg.beta
    mult = hankel._multiplicity(shape)
    HM = hankel.lift_stack(M, shape)
    lifted_known = None if known is None else hankel.lift_stack(known.astype(float), shape) > 0.5
    fp = lmafit_init(HM, cfg, lifted_known, cfg.lmafit_tol if sparse else cfg.inpaint_lmafit_tol)
    U, V = fp.U, fp.V

    X = M.copy()
    E = np.zeros_like(M)
    Theta = np.zeros_like(M)
    Lam = np.zeros_like(HM)
    lam = cfg.tau / beta
    feas = []
    converged = False
    sweep = 0
    for sweep in range(1, cfg.max_admm_iters + 1):
        if sparse:
            R = M - X - Theta
            if cfg.channel_mode is ChannelMode.COMMON_LOCATION:
                E = group_soft_threshold(R, lam)
            else:
                E = soft_threshold(R, lam)

        A = U @ V.T - Lam
        if cfg.x_update == "exact":
            adj = np.stack([hankel.adjoint_array(b, shape) for b in _blocks(A, shape)])
            data_w = beta if known is None else beta * known
            Xn = (mu * adj + data_w * (M - E - Theta)) / (mu * mult + data_w)
        else:
            avg = hankel.pseudo_inverse_stack(A, shape)
            if known is None:
                Xn = (mu * avg + beta * (M - E - Theta)) / (mu + beta)
            else:
                Xn = np.where(known, (mu * avg + beta * (M - Theta)) / (mu + beta), avg)

        HX = hankel.lift_stack(Xn, shape)
        T = HX + Lam
        U, V = _update_factors(T, U, V, mu)
        if known is None:
            Theta = Theta + Xn + E - M
        else:
            Theta = Theta + np.where(known, Xn - M, 0.0)
        UV = U @ V.T
        Lam = T - UV
        if not (np.all(np.isfinite(Xn)) and np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
            raise NumericError(f"ADMM diverged at sweep {sweep}", sweep=sweep)
        feas.append(float(np.linalg.norm(HX - UV)))

        change = np.linalg.norm(Xn - X) / max(np.linalg.norm(X), 1.0)
        X = Xn
        if change <= cfg.admm_tol:
            converged = True
            break

    resid = M - X - E
    if known is not None:
        resid = np.where(known, resid, 0.0)
        # observed pixels are kept as measured
        X = np.where(known, M, X)
    return DecompositionResult(
        clean=X,
        sparse=E,
        factors=FactorPair(U, V),
        iterations_run=sweep,
        converged=converged,
        final_residual=float(np.linalg.norm(resid)),
        feasibility=feas,
    )


def _blocks(A: np.ndarray, shape: HankelShape):
    w = shape.lifted_cols
    return [A[:, c * w:(c + 1) * w] for c in range(A.shape[1] // w)]


def _unstack(res: DecompositionResult, multi: bool) -> DecompositionResult:
    if not multi:
        res.clean = res.clean[0]
        res.sparse = res.sparse[0]
    return res


def robust_decompose(measurement, cfg: SolverConfig) -> DecompositionResult:
    """Split a noisy patch (or channel stack) into a Hankel-low-rank part and sparse impulses.

    A 2-D array is a single-channel patch; a list of patches or a ``(C, M, N)``
    array is a channel stack, whose lifts are concatenated side by side.
    """
    M, multi = _as_stack(measurement)
    shape = _check_config(M, cfg)
    return _unstack(_admm(M, None, cfg, shape, sparse=True), multi)


def inpaint_decompose(measurement, known_mask, cfg: SolverConfig) -> DecompositionResult:
    M, multi = _as_stack(measurement)
    known = np.asarray(known_mask, dtype=bool)
    if known.ndim == 2 and known.shape == M.shape[1:]:
        known = np.broadcast_to(known, M.shape)
    if known.shape != M.shape:
        raise InvalidShapeError(f"mask shape {known.shape} does not match measurement {M.shape}")
    if not known.any():
        raise EmptyInputError("mask has no known pixels")
    M = np.where(known, M, 0.0)
    shape = _check_config(M, cfg)
    return _unstack(_admm(M, known, cfg, shape, sparse=False), multi)


def inpaint(measurement, known_mask, cfg: SolverConfig) -> np.ndarray:
    """Complete the pixels where `known_mask` is false from the Hankel low-rank prior."""
    return inpaint_decompose(measurement, known_mask, cfg).clean
