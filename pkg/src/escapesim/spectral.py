"""Dominant eigendata of the second-block growth matrix, and matrix exponentials.

The growth matrix B0 (Metzler, irreducible) gets a dominant real eigenvalue
beta0 with positive eigenvectors.  Convention used throughout the package:

    B0 u = beta0 u        u > 0, sum(u) = 1      (direction of growth)
    B0^T v = beta0 v      v > 0, u . v = 1       (linear weights / thresholds)

With this normalization, v weights the second-block counts in all threshold
definitions and v . Z(t) e^{-beta0 t} is a martingale for the matching
branching process, while Z(t) e^{-beta0 t} converges to a multiple of u.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectralError",
    "SpectralData",
    "StabilityReport",
    "perron",
    "matrix_exp",
    "stability_check",
    "spectral_data",
]

_CONV_TOL = 1e-14
_MAX_ITER = 100_000


class SpectralError(ValueError):
    """Input matrix violates a required hypothesis (Metzler, irreducible, ...)."""


@dataclass(frozen=True)
class SpectralData:
    B0: np.ndarray
    beta0: float
    u: np.ndarray
    v: np.ndarray
    gap: float  # beta0 minus the next-largest real part; inf for 1x1

    def __post_init__(self):
        for name in ("B0", "u", "v"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def d2(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True)
class StabilityReport:
    max_real_part: float
    stable: bool
    kappa: float  # decay rate: -max_real_part when stable, else 0


def _check_metzler_irreducible(B0: np.ndarray) -> None:
    off = B0 - np.diag(np.diag(B0))
    if off.size and np.min(off) < -1e-13:
        i, j = np.unravel_index(np.argmin(off), off.shape)
        raise SpectralError(
            f"matrix is not Metzler: off-diagonal entry [{i},{j}] = {off[i, j]:g} < 0"
        )
    n = B0.shape[0]
    if n > 1:
        adj = np.abs(off) > 1e-14
        reach = adj.copy()
        np.fill_diagonal(reach, True)
        for _ in range(n):
            new = reach @ reach
            if np.array_equal(new, reach):
                break
            reach = new
        if not np.all(reach):
            raise SpectralError("matrix is reducible: adjacency graph not strongly connected")


def _power_dominant(M: np.ndarray) -> tuple[float, np.ndarray]:
    """Dominant eigenpair of a non-negative irreducible matrix by power iteration."""
    n = M.shape[0]
    w = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(_MAX_ITER):
        y = M @ w
        lam = float(np.sum(y))
        if lam <= 0:
            raise SpectralError("power iteration collapsed (non-positive iterate)")
        y /= lam
        if np.max(np.abs(y - w)) < _CONV_TOL:
            return lam, y
        w = y
    return lam, w


def perron(B0: np.ndarray) -> SpectralData:
    """Dominant eigenvalue and positive eigenvectors of a Metzler irreducible matrix.

    Uses power iteration on B0 + sigma*I with sigma = max_i |B0_ii| + 1, which
    is non-negative and primitive-like for irreducible Metzler input.  The
    eigenvalue applies to B0 itself (the shift is subtracted), so a negative
    dominant value signals the absorbing regime.
    """
    B0 = np.asarray(B0, dtype=float)
    if B0.ndim != 2 or B0.shape[0] != B0.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {B0.shape}")
    _check_metzler_irreducible(B0)

    n = B0.shape[0]
    sigma = float(np.max(np.abs(np.diag(B0)))) + 1.0
    M = B0 + sigma * np.eye(n)

    lam_u, u = _power_dominant(M)
    lam_v, v = _power_dominant(M.T)
    beta0 = 0.5 * (lam_u + lam_v) - sigma

    u = u / np.sum(u)
    v = v / float(u @ v)

    scale = max(1.0, float(np.linalg.norm(B0)))
    if np.linalg.norm(B0 @ u - beta0 * u) > 1e-10 * scale:
        raise SpectralError("power iteration failed to converge for the growth direction")
    if np.linalg.norm(B0.T @ v - beta0 * v) > 1e-10 * scale:
        raise SpectralError("power iteration failed to converge for the weight vector")

    if n == 1:
        gap = np.inf
    else:
        eig = np.linalg.eigvals(B0)
        rest = np.sort(eig.real)[::-1]
        # drop the entry matching beta0 (the dominant one)
        k = int(np.argmin(np.abs(rest - beta0)))
        gap = float(beta0 - np.max(np.delete(rest, k)))
        if gap <= 1e-10:
            warnings.warn(
                f"spectral gap {gap:g} is not resolvably positive; defective or "
                "near-defective dominant eigenvalue", stacklevel=2,
            )
    return SpectralData(B0=B0, beta0=float(beta0), u=u, v=v, gap=gap)


def spectral_data(model) -> SpectralData:
    """Perron data of B0 = B(x0) for a validated population model."""
    from .model import structure_at

    dec = structure_at(model, np.asarray(model.x0))
    return perron(dec.B0)


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring with the degree-13 Pade approximant
# ---------------------------------------------------------------------------

_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def matrix_exp(M: np.ndarray, t: float = 1.0) -> np.ndarray:
    """e^{M t} by scaling and squaring with the degree-13 Pade approximant."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.isfinite(t):
        raise ValueError("time argument must be finite")
    A = M * t
    n = A.shape[0]
    norm = float(np.linalg.norm(A, 1))
    if norm == 0.0:
        return np.eye(n)
    s = max(0, int(np.ceil(np.log2(norm / _THETA13))) if norm > _THETA13 else 0)
    A = A / (2.0 ** s)

    b = _PADE13
    I = np.eye(n)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I
    )
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


def stability_check(C: np.ndarray) -> StabilityReport:
    """Largest real part of the spectrum of C and the implied decay rate."""
    C = np.asarray(C, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {C.shape}")
    if C.size == 0:
        return StabilityReport(max_real_part=-np.inf, stable=True, kappa=np.inf)
    mrp = float(np.max(np.linalg.eigvals(C).real))
    stable = mrp < 0
    return StabilityReport(max_real_part=mrp, stable=stable, kappa=-mrp if stable else 0.0)
