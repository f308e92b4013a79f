"""Flat-array form of a model for the numba event kernels.

Rates are stored in count space: N * g(X / N) = sum_m c_m * N^(1-deg_m) * prod X,
so the kernels touch integer-valued float counts only.  Each monomial is a
coefficient times exactly four indexed factors, padded with a constant-1 slot
at index d; kernel state vectors therefore have length d + 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelError, PopulationModel

KERNEL_MAX_DEGREE = 4


@dataclass(frozen=True)
class CompiledModel:
    d: int
    d1: int
    N: float
    x0: np.ndarray        # (d,) equilibrium density
    jumps: np.ndarray     # (nj, d) float64
    mstart: np.ndarray    # (nj+1,) int64, monomial ranges per jump
    mcoeff: np.ndarray    # (nm,) float64, count-space coefficients
    mfac: np.ndarray      # (nm, 4) int64, factor indices (d = constant one)
    s_idx: np.ndarray     # (nj,) int64, distinguished coordinate or -1
    gstart: np.ndarray    # (nj+1,) int64, gbar monomial ranges (empty for non-J2)
    gcoeff: np.ndarray    # (ng,) float64, count-space gbar coefficients
    gfac: np.ndarray      # (ng, 4) int64
    gbar0: np.ndarray     # (nj,) float64, gbar evaluated at x0

    @property
    def d2(self) -> int:
        return self.d - self.d1


def _pack(polys, d: int, N: float, density_args: bool):
    """CSR pack a list of PolynomialRate; scale coefficients into count space.

    density_args=False applies the jump-rate scaling c * N^(1-deg); True is for
    gbar factors evaluated at densities, scaled as c * N^(-deg).
    """
    start = [0]
    coeff = []
    fac = []
    shift = 1.0 if not density_args else 0.0
    for poly in polys:
        for m in poly.monomials:
            deg = m.degree
            if deg > KERNEL_MAX_DEGREE:
                raise ModelError(
                    f"kernel supports monomial degree <= {KERNEL_MAX_DEGREE}, got {deg}"
                )
            coeff.append(m.coeff * N ** (shift - deg))
            idx = []
            for k, p in enumerate(m.powers):
                idx.extend([k] * p)
            idx.extend([d] * (KERNEL_MAX_DEGREE - len(idx)))
            fac.append(idx)
        start.append(len(coeff))
    return (
        np.asarray(start, dtype=np.int64),
        np.asarray(coeff, dtype=np.float64),
        np.asarray(fac, dtype=np.int64).reshape(len(coeff), KERNEL_MAX_DEGREE),
    )


def compile_model(model: PopulationModel) -> CompiledModel:
    d = model.d
    N = float(model.N)
    x0 = np.asarray(model.x0, dtype=float)

    jumps = np.asarray([j.J for j in model.jumps], dtype=np.float64).reshape(len(model.jumps), d)
    mstart, mcoeff, mfac = _pack([j.rate for j in model.jumps], d, N, density_args=False)

    nj = len(model.jumps)
    s_idx = np.full(nj, -1, dtype=np.int64)
    gbars = []
    gbar0 = np.zeros(nj)
    for k, j in enumerate(model.jumps):
        if model.is_j2(j):
            if j.s is None:
                raise ModelError(f"jump {k} changes the second block but has no s")
            s_idx[k] = j.s
            gb = j.gbar()
            gbars.append(gb)
            gbar0[k] = gb(x0)
        else:
            gbars.append(type(j.rate)(()))  # empty polynomial
    gstart, gcoeff, gfac = _pack(gbars, d, N, density_args=True)

    return CompiledModel(
        d=d, d1=model.d1, N=N, x0=x0, jumps=jumps,
        mstart=mstart, mcoeff=mcoeff, mfac=mfac,
        s_idx=s_idx, gstart=gstart, gcoeff=gcoeff, gfac=gfac, gbar0=gbar0,
    )
