"""Multitype Markov branching companion of a population model near x0.

Freezing the per-capita factors gbar_J at the boundary equilibrium turns the
second block into a linear branching chain: an individual of type s(J)
triggers a J2 change at per-capita rate gbar_J(x0).  Simulation reuses the
exact event engine with scale 1 and the linearized rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._compile import compile_model
from .model import JumpSpec, PolynomialRate, PopulationModel, validate_model
from .simulate import (RngStream, StopSpec, TrajectoryRecord, simulate,
                       DEFAULT_EVENT_CAP)
from .spectral import SpectralData, spectral_data

__all__ = [
    "BranchingEvent",
    "BranchingSpec",
    "WEstimate",
    "ExtinctionRecord",
    "MCProbability",
    "DiagnosticTable",
    "from_model",
    "birth_death_spec",
    "simulate_z",
    "estimate_W",
    "extinction_record",
    "survival_probability",
    "convergence_diagnostics",
    "diagnostics_csv",
]

SURVIVAL_GROWTH_FACTOR = 1000.0


@dataclass(frozen=True)
class BranchingEvent:
    J2: tuple[int, ...]
    s: int                     # type index within the branching block, 0-based
    per_capita_rate: float


@dataclass(frozen=True)
class BranchingSpec:
    d2: int
    events: tuple[BranchingEvent, ...]
    mean_matrix: np.ndarray    # (i,j): net rate at which type i creates type j
    spectral: SpectralData

    def __post_init__(self):
        mm = np.array(self.mean_matrix, dtype=float)
        mm.setflags(write=False)
        object.__setattr__(self, "mean_matrix", mm)
        for ev in self.events:
            if ev.per_capita_rate <= 0:
                raise ValueError(f"per-capita rate {ev.per_capita_rate} must be positive")
            if any(j < 0 for i, j in enumerate(ev.J2) if i != ev.s):
                raise ValueError(f"offspring change {ev.J2} negative off the parent type")
            if ev.J2[ev.s] < -1:
                raise ValueError(f"parent-type change {ev.J2[ev.s]} below -1")

    def to_model(self) -> PopulationModel:
        """Equivalent population model at scale 1 with linear rates."""
        jumps = []
        for ev in self.events:
            powers = tuple(1 if i == ev.s else 0 for i in range(self.d2))
            jumps.append(JumpSpec(
                ev.J2, PolynomialRate.from_terms([(ev.per_capita_rate, powers)]), s=ev.s))
        return PopulationModel(
            name=f"branching(d2={self.d2})", d1=0, N=1,
            x0=tuple(0.0 for _ in range(self.d2)),
            jumps=tuple(jumps),
        )


def from_model(model: PopulationModel) -> BranchingSpec:
    """Branching companion of a validated model with a nonempty second block."""
    report = validate_model(model)
    if not report.passed:
        raise ValueError(
            "branching spec requires a valid model; violations: "
            + "; ".join(v.assumption for v in report.violations))
    j2 = model.j2_jumps
    if not j2:
        raise ValueError("model has no second-block jumps")
    d1, d2 = model.d1, model.d2
    x0 = np.asarray(model.x0)
    events = []
    for jump in j2:
        rate = jump.gbar()(x0)
        if rate <= 0:
            raise ValueError(f"gbar(x0) = {rate:g} not positive for jump {jump.J}")
        events.append(BranchingEvent(
            J2=tuple(jump.J[d1:]), s=jump.s - d1, per_capita_rate=float(rate)))
    sp = spectral_data(model)
    mean = np.zeros((d2, d2))
    for ev in events:
        for j, dj in enumerate(ev.J2):
            mean[ev.s, j] += ev.per_capita_rate * dj
    if np.max(np.abs(mean - sp.B0.T)) > 1e-10:
        raise AssertionError("mean growth matrix inconsistent with the transposed B0")
    return BranchingSpec(d2=d2, events=tuple(events), mean_matrix=mean, spectral=sp)


def birth_death_spec(lam: float, mu: float) -> BranchingSpec:
    """Single-type linear birth-death branching chain."""
    from .model import linear_birth_death

    return from_model(linear_birth_death(lam, mu, N=1))


@dataclass(frozen=True)
class WEstimate:
    value: float               # v . Z(T) e^{-beta0 T}
    T: float
    extinct: bool


@dataclass(frozen=True)
class ExtinctionRecord:
    tau0: float | None
    total_jumps: int


@dataclass(frozen=True)
class MCProbability:
    estimate: float
    stderr: float
    ci_low: float              # 95% normal-approximation interval
    ci_high: float
    n: int


def simulate_z(spec: BranchingSpec, Z0, horizon: float,
               cap: int = DEFAULT_EVENT_CAP, rng: RngStream = RngStream(0),
               **kwargs) -> TrajectoryRecord:
    """Exact jump-chain simulation of the branching process."""
    Z0 = np.asarray(Z0, dtype=float)
    if np.any(Z0 < 0):
        raise ValueError("Z0 must be non-negative")
    stops = [StopSpec("time_horizon", level=horizon), StopSpec("event_cap", level=cap)]
    return simulate(spec.to_model(), Z0, stops, rng, **kwargs)


def estimate_W(traj: TrajectoryRecord, spectral: SpectralData, T: float) -> WEstimate:
    """Scaled weighted mass v . Z(T) e^{-beta0 T}; mean-one for v-weighted unit start."""
    if spectral.beta0 <= 0:
        raise ValueError("W is defined through growth; requires beta0 > 0")
    span_end = np.inf if traj.terminal == "absorbed" else traj.t_end
    if T < 0 or T > span_end + 1e-12:
        raise ValueError(f"T={T} outside trajectory span [0, {traj.t_end}]")
    from .simulate import state_at

    Z = state_at(traj, min(T, traj.t_end))
    value = float(spectral.v @ Z) * math.exp(-spectral.beta0 * T)
    return WEstimate(value=value, T=T, extinct=bool(np.sum(Z) == 0))


def extinction_record(traj: TrajectoryRecord) -> ExtinctionRecord:
    return ExtinctionRecord(tau0=traj.stopping.tau_x0, total_jumps=traj.n_events)


def _batch_run(spec_or_model, Z0, rng: RngStream, replicas: int, level: float,
               horizon: float = np.inf, cap: int = DEFAULT_EVENT_CAP,
               stop_block2_zero: int = 1):
    """Vector of (terminal, t_end, tau_level, tau_zero) over replicas."""
    model = spec_or_model.to_model() if isinstance(spec_or_model, BranchingSpec) else spec_or_model
    cm = compile_model(model)
    sp = spec_or_model.spectral if isinstance(spec_or_model, BranchingSpec) else spectral_data(model)
    X0 = np.zeros(model.d)
    X0[model.d1:] = Z0
    R = int(replicas)
    out_term = np.empty(R, np.int64)
    out_t = np.empty(R)
    out_nev = np.empty(R, np.int64)
    out_tau = np.empty(R)
    out_tau0 = np.empty(R)
    out_nu = np.empty(R, np.int64)
    out_end = np.empty((R, model.d))
    out_win = np.empty((R, 0, model.d))
    K.batch_escape(rng.seed, rng.stream_id, R,
                   cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                   cm.d1, 1.0 / cm.N, cm.x0, np.inf,
                   X0, np.asarray(sp.v, dtype=float), level, stop_block2_zero,
                   horizon, cap, np.empty(0),
                   out_term, out_t, out_nev, out_tau, out_tau0, out_nu,
                   out_end, out_win)
    return out_term, out_t, out_nev, out_tau, out_tau0, sp


def survival_probability(spec: BranchingSpec, Z0, replicas: int,
                         rng: RngStream) -> MCProbability:
    """Monte Carlo non-extinction estimate with a binomial interval.

    Non-extinction is operationalized as the weighted mass v . Z growing by a
    factor of 1000 before absorption; revival after that is negligible for
    any meaningfully supercritical chain.
    """
    if replicas < 100:
        raise ValueError("at least 100 replicas are required")
    Z0 = np.asarray(Z0, dtype=float)
    w0 = float(spec.spectral.v @ Z0)
    if w0 <= 0:
        raise ValueError("Z0 must carry positive weighted mass")
    level = SURVIVAL_GROWTH_FACTOR * w0
    out_term, _, _, _, _, _ = _batch_run(spec, Z0, rng, replicas, level)
    surv = np.count_nonzero(out_term == K.TERM_LEVEL)
    p = surv / replicas
    se = math.sqrt(max(p * (1 - p), 1e-12) / replicas)
    return MCProbability(estimate=p, stderr=se,
                         ci_low=max(0.0, p - 1.96 * se),
                         ci_high=min(1.0, p + 1.96 * se), n=replicas)


@dataclass(frozen=True)
class DiagnosticTable:
    """Convergence diagnostics of the growth martingales on a time grid."""

    t: np.ndarray
    e1_fail_rate: np.ndarray   # P[sup_{u>=t} |v.Z e^{-b u} - W| > a e^{-b t/2}]
    e2_fail_rate: np.ndarray   # P[sup_{u>=t} |Z e^{-b u} - W u| > K e^{-chi t}, W > 0]
    mart_mean_dev: np.ndarray  # max_i |mean N_i(t) - N_i(0)|
    mart_mean_se: np.ndarray   # max_i stderr of mean N_i(t)
    mart_mean: np.ndarray      # (G, d2)
    W_values: np.ndarray       # per-replica horizon estimates of W
    T_max: float
    n: int


def convergence_diagnostics(spec: BranchingSpec, Z0, t_grid, replicas: int,
                            rng: RngStream, a: float = 1.0, K_const: float = 1.0,
                            chi: float | None = None, T_max: float | None = None,
                            cap: int = DEFAULT_EVENT_CAP) -> DiagnosticTable:
    """Empirical frequencies of the martingale-convergence failure events.

    W is proxied by the horizon value v . Z(T_max) e^{-beta0 T_max}; the
    default horizon makes e^{-beta0 T_max} at most 1e-4 relative to the
    initial weighted mass, so the proxy bias is negligible next to the
    thresholds tested.
    """
    sp = spec.spectral
    if sp.beta0 <= 0:
        raise ValueError("diagnostics require a supercritical spec")
    Z0 = np.asarray(Z0, dtype=float)
    w0 = float(sp.v @ Z0)
    if T_max is None:
        T_max = (4 * math.log(10.0) + max(0.0, math.log(w0))) / sp.beta0
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be nonempty and strictly increasing")
    if t_grid[-1] > T_max:
        raise ValueError(f"grid extends past the W horizon T_max={T_max:g}")
    if chi is None:
        chi = sp.beta0 / 4.0

    model = spec.to_model()
    cm = compile_model(model)
    R = int(replicas)
    G = t_grid.shape[0]
    d2 = spec.d2
    out_W = np.empty(R)
    out_ext = np.empty(R, np.int64)
    out_sup1 = np.empty((R, G))
    out_sup2 = np.empty((R, G))
    out_mart = np.empty((R, G, d2))
    out_nev = np.empty(R, np.int64)
    K.batch_branch_diag(rng.seed, rng.stream_id, R,
                        cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                        1.0, Z0, np.asarray(sp.B0, dtype=float), sp.beta0,
                        np.asarray(sp.u, dtype=float), np.asarray(sp.v, dtype=float),
                        float(T_max), cap, t_grid,
                        out_W, out_ext, out_sup1, out_sup2, out_mart, out_nev)

    thresh1 = a * np.exp(-sp.beta0 * t_grid / 2.0)
    thresh2 = K_const * np.exp(-chi * t_grid)
    e1 = np.mean(out_sup1 > thresh1[None, :], axis=0)
    pos = out_W > 0
    if np.any(pos):
        e2 = np.mean(out_sup2[pos] > thresh2[None, :], axis=0)
    else:
        e2 = np.zeros(G)
    mart_mean = out_mart.mean(axis=0)
    mart_se = out_mart.std(axis=0, ddof=1) / math.sqrt(R)
    N0 = Z0  # N(0) = W(0) = Z0
    dev = np.max(np.abs(mart_mean - N0[None, :]), axis=1)
    return DiagnosticTable(
        t=t_grid, e1_fail_rate=e1, e2_fail_rate=e2,
        mart_mean_dev=dev, mart_mean_se=np.max(mart_se, axis=1),
        mart_mean=mart_mean, W_values=out_W, T_max=float(T_max), n=R,
    )


def diagnostics_csv(table: DiagnosticTable, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,e1_fail_rate,e2_fail_rate,mart_mean_dev\n")
        for i, t in enumerate(table.t):
            fh.write(f"{t!r},{table.e1_fail_rate[i]!r},"
                     f"{table.e2_fail_rate[i]!r},{table.mart_mean_dev[i]!r}\n")
