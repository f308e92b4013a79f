"""Constructive coupling of the full chain with its branching companion,
likelihood-ratio computations, and total-variation estimators.

While the two second blocks agree, each second-block jump fires at the
larger of the true rate q_N and the frozen branching rate q; with
probability min/max both sides take the jump, otherwise only the
larger-rate side does, which is recorded as the first divergence.  The
branching marginal of this construction is exact, so the divergence
fraction upper-bounds the total variation distance between the two path
laws on the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._compile import compile_model
from .model import PopulationModel, validate_model
from .simulate import DEFAULT_EVENT_CAP, RngStream
from .spectral import spectral_data

__all__ = [
    "CoupledRun",
    "LRSample",
    "TVEstimate",
    "couple_run",
    "couple_batch",
    "logistic_lr",
    "tv_lower_from_lr",
    "divergence_curve",
    "divergence_curve_csv",
    "symmetric_gap_experiment",
]

_CAUSE_NAMES = {
    K.CAUSE_RATE_MISMATCH: "rate_mismatch_jump",
    K.CAUSE_EXTRA_X: "extra_jump_x",
    K.CAUSE_EXTRA_Z: "extra_jump_z",
}


@dataclass(frozen=True)
class CoupledRun:
    divergence_time: float | None
    divergence_cause: str | None   # rate_mismatch_jump | extra_jump_x | extra_jump_z
    tau_star: float | None         # joint weighted-level crossing time
    z_extinct_first: bool
    event_count: int
    terminal: str
    z_end: np.ndarray


@dataclass(frozen=True)
class LRSample:
    value: float
    m: int
    log_terms: float


@dataclass(frozen=True)
class TVEstimate:
    value: float
    stderr: float
    method: str                    # coupling_bound | lr_formula

    def __post_init__(self):
        if not (-3 * self.stderr <= self.value <= 1 + 3 * self.stderr):
            raise ValueError(f"total variation estimate {self.value} outside [0,1]")


_COUPLE_TERMINALS = {
    K.TERM_HORIZON: "horizon",
    K.TERM_CAP: "event_cap",
    K.TERM_LEVEL: "threshold",
    K.TERM_BLOCK2_ZERO: "joint_extinction",
    K.TERM_DIVERGED: "diverged",
    K.TERM_Z_DEAD: "z_extinct",
    K.TERM_ABSORBED: "absorbed",
}


def couple_batch(model: PopulationModel, Z0, alpha: float, horizon: float,
                 rng: RngStream, replicas: int, *, X0_first=None,
                 stop_at_divergence: bool = True,
                 level: float | None = None,
                 cap: int = DEFAULT_EVENT_CAP):
    """Raw arrays for a batch of coupled runs; see couple_run for semantics."""
    report = validate_model(model)
    if not report.passed:
        raise ValueError("coupling requires a valid model")
    sp = spectral_data(model)
    if sp.beta0 <= 0 and level is None:
        raise ValueError("coupling threshold needs the growth regime (beta0 > 0)")
    Z0 = np.asarray(Z0, dtype=float)
    cm = compile_model(model)
    d, d1, d2 = model.d, model.d1, model.d2
    X0 = np.empty(d)
    if X0_first is None:
        X0[:d1] = np.round(np.asarray(model.x0[:d1]) * model.N)
    else:
        X0[:d1] = np.asarray(X0_first, dtype=float)
    X0[d1:] = Z0
    if level is None:
        level = model.N ** (1.0 - alpha) + float(sp.v @ Z0)

    R = int(replicas)
    out_term = np.empty(R, np.int64)
    out_div_t = np.empty(R)
    out_cause = np.empty(R, np.int64)
    out_tau = np.empty(R)
    out_zext = np.empty(R, np.int64)
    out_nev = np.empty(R, np.int64)
    out_zT = np.empty((R, d2))
    K.batch_couple(rng.seed, rng.stream_id, R,
                   cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                   cm.gstart, cm.gcoeff, cm.gfac,
                   d1, 1.0 / cm.N, X0, Z0,
                   np.asarray(sp.v, dtype=float), float(level), float(horizon),
                   cap, 1 if stop_at_divergence else 0,
                   out_term, out_div_t, out_cause, out_tau, out_zext,
                   out_nev, out_zT)
    return out_term, out_div_t, out_cause, out_tau, out_zext, out_nev, out_zT


def couple_run(model: PopulationModel, Z0, alpha: float, horizon: float,
               rng: RngStream, **kwargs) -> CoupledRun:
    """One coupled realization; ends at divergence, the joint threshold
    v . z >= N^(1-alpha) + v . Z0, joint extinction, or the horizon."""
    term, div_t, cause, tau, zext, nev, zT = (
        arr[0] for arr in couple_batch(model, Z0, alpha, horizon, rng, 1, **kwargs))
    return CoupledRun(
        divergence_time=None if np.isnan(div_t) else float(div_t),
        divergence_cause=_CAUSE_NAMES.get(int(cause)),
        tau_star=None if np.isnan(tau) else float(tau),
        z_extinct_first=bool(zext),
        event_count=int(nev),
        terminal=_COUPLE_TERMINALS[int(term)],
        z_end=np.atleast_1d(zT),
    )


# ---------------------------------------------------------------------------
# Explicit likelihood ratio for the logistic model (no resident block)
# ---------------------------------------------------------------------------

def logistic_lr(N: int, m: int, rng: RngStream, replicas: int = 1,
                injected_times=None) -> list[LRSample]:
    """Likelihood ratio of the logistic chain against its linear companion.

    The pure-birth logistic chain started at 1 visits states 1..m; under the
    linear law the holding time in state i is Exp(i).  The ratio over the
    first m jumps is prod_i e^{i/N} (1 - i/N) exp((i^2 T_i - i)/N), evaluated
    in log space.  injected_times fixes the holding times (for exact checks).
    """
    if m >= N:
        raise ValueError(f"m={m} must be below N={N}: the ratio factor 1 - i/N vanishes")
    if m < 0:
        raise ValueError("m must be non-negative")
    out = []
    g = rng.numpy_rng()
    i = np.arange(1, m + 1, dtype=float)
    base = np.sum(i / N + np.log1p(-i / N)) if m else 0.0
    for _ in range(int(replicas)):
        if injected_times is not None:
            T = np.asarray(injected_times, dtype=float)
            if T.shape != (m,):
                raise ValueError(f"injected_times must have shape ({m},)")
        else:
            T = g.exponential(1.0 / i) if m else np.empty(0)
        log_terms = base + float(np.sum((i * i * T - i) / N)) if m else 0.0
        out.append(LRSample(value=math.exp(log_terms), m=m, log_terms=log_terms))
    return out


def lr_exponent_samples(N: int, m: int, rng: RngStream, replicas: int) -> np.ndarray:
    """Samples of the random exponent sum_i (i^2 T_i - i)/N under the linear law."""
    g = rng.numpy_rng()
    i = np.arange(1, m + 1, dtype=float)
    T = g.exponential(1.0 / i, size=(int(replicas), m))
    return np.sum((i * i * T - i) / N, axis=1)


def tv_lower_from_lr(samples: list[LRSample]) -> TVEstimate:
    """Total variation from likelihood-ratio samples: mean of max(0, 1 - R)."""
    if len(samples) < 100:
        raise ValueError("at least 100 samples are required")
    vals = np.array([max(0.0, 1.0 - s.value) for s in samples])
    return TVEstimate(value=float(vals.mean()),
                      stderr=float(vals.std(ddof=1) / math.sqrt(len(vals))),
                      method="lr_formula")


# ---------------------------------------------------------------------------
# Divergence trend across population scales
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergencePoint:
    N: int
    fraction: float
    ci_low: float
    ci_high: float
    n: int


def divergence_curve(model: PopulationModel, N_list, alpha: float,
                     replicas: int, rng: RngStream,
                     horizon: float = np.inf) -> list[DivergencePoint]:
    """Fraction of replicas whose coupling breaks before min(threshold,
    extinction), per population scale, with 95% Wilson intervals."""
    out = []
    for k, N in enumerate(N_list):
        mN = model.with_scale(int(N))
        term, div_t, *_ = couple_batch(
            mN, Z0=_default_z0(mN), alpha=alpha, horizon=horizon,
            rng=RngStream(rng.seed, rng.stream_id + k * 1_000_000),
            replicas=replicas)
        frac = float(np.mean(~np.isnan(div_t)))
        lo, hi = _wilson(frac, replicas)
        out.append(DivergencePoint(N=int(N), fraction=frac, ci_low=lo, ci_high=hi,
                                   n=replicas))
    return out


def _default_z0(model: PopulationModel) -> np.ndarray:
    return np.ones(model.d2)


def _wilson(p: float, n: int, z: float = 1.96) -> tuple[float, float]:
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    return mid - half, mid + half


def divergence_curve_csv(points: list[DivergencePoint], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("N,divergence_fraction,ci_low,ci_high\n")
        for p in points:
            fh.write(f"{p.N},{p.fraction!r},{p.ci_low!r},{p.ci_high!r}\n")


# ---------------------------------------------------------------------------
# Two-type symmetric gap experiment
# ---------------------------------------------------------------------------

def symmetric_gap_experiment(eta: float, N: int, replicas: int,
                             rng: RngStream) -> np.ndarray:
    """Rescaled coordinate gap N^(2 eta) (x_1 - x_2) of the two-type model.

    Both types start at one individual; each replica runs to the weighted
    threshold crossing plus an extra (5/12) log N of growth, where the gap
    settles around its scale-free limit.
    """
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    from .model import two_type_symmetric

    model = two_type_symmetric(eta, N=int(N))
    cm = compile_model(model)
    sp = spectral_data(model)
    alpha = 5.0 / 12.0
    Z0 = np.ones(2)
    level = N ** (1 - alpha) + float(sp.v @ Z0)
    extra = (5.0 / 12.0) * math.log(N)

    R = int(replicas)
    win = np.array([0.0, extra])
    out_term = np.empty(R, np.int64)
    out_t = np.empty(R)
    out_nev = np.empty(R, np.int64)
    out_tau = np.empty(R)
    out_tau0 = np.empty(R)
    out_nu = np.empty(R, np.int64)
    out_end = np.empty((R, 2))
    out_win = np.empty((R, 2, 2))
    K.batch_escape(rng.seed, rng.stream_id, R,
                   cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                   cm.d1, 1.0 / cm.N, cm.x0, np.inf,
                   Z0, np.asarray(sp.v, dtype=float), level, 1, np.inf,
                   DEFAULT_EVENT_CAP, win,
                   out_term, out_t, out_nev, out_tau, out_tau0, out_nu,
                   out_end, out_win)
    crossed = out_term == K.TERM_LEVEL
    gaps = (out_win[crossed, 1, 0] - out_win[crossed, 1, 1]) / N  # densities
    return N ** (2 * eta) * gaps
