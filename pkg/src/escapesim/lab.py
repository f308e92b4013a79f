"""End-to-end replica experiments: escape delays, extinction times, phase
decompositions, and path-closeness scans across population scales.

Every experiment is a pure function of (model parameters, N, replicas, master
seed); replica r always uses stream_id = base + r, so reruns reproduce every
summary number exactly under any parallelism degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._compile import compile_model
from .branching import BranchingSpec, from_model
from .flow import integrate, timescales
from .model import PopulationModel, barebones
from .simulate import DEFAULT_EVENT_CAP, RngStream
from .spectral import SpectralData, spectral_data
from .stats import FitError, GumbelFit, KSResult, fit_gumbel, gumbel_cdf, ks_statistic

__all__ = [
    "ReplicaSummary",
    "EscapeDelayResult",
    "ExtinctionResult",
    "ThreePhaseResult",
    "PathClosenessPoint",
    "escape_batch",
    "escape_delay_experiment",
    "extinction_experiment",
    "three_phase_run",
    "three_phase_batch",
    "path_closeness_experiment",
    "w_samples",
    "replica_csv",
    "log_slope",
]


@dataclass(frozen=True)
class ReplicaSummary:
    seed: int
    stream_id: int
    survived: bool
    tau_star: float | None = None
    delay: float | None = None
    W_est: float | None = None
    sup_path_error: float | None = None
    extinction_time: float | None = None

    def __post_init__(self):
        if self.survived and self.tau_star is None:
            raise ValueError("surviving replica must carry its crossing time")


def replica_csv(summaries, path: str) -> None:
    cols = ("seed", "stream_id", "survived", "tau_star", "delay", "W_est",
            "sup_path_error", "extinction_time")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for s in summaries:
            row = []
            for c in cols:
                v = getattr(s, c)
                if v is None:
                    row.append("")
                elif isinstance(v, bool):
                    row.append("1" if v else "0")
                elif isinstance(v, float):
                    row.append(repr(v))
                else:
                    row.append(str(v))
            fh.write(",".join(row) + "\n")


def _initial_counts(model: PopulationModel, Z0) -> np.ndarray:
    X0 = np.empty(model.d)
    X0[:model.d1] = np.round(np.asarray(model.x0[:model.d1]) * model.N)
    X0[model.d1:] = np.asarray(Z0, dtype=float)
    return X0


def escape_batch(model: PopulationModel, Z0, rng: RngStream, replicas: int,
                 alpha: float = 5 / 12, window_offsets=None,
                 cap: int = DEFAULT_EVENT_CAP):
    """Replicas to the weighted threshold N^(1-alpha) + v.Z0 or extinction.

    Returns (spectral, level, tau, survived, window) where window is the
    (R, G, d) count snapshots after the crossing (None without offsets).
    """
    sp = spectral_data(model)
    if sp.beta0 <= 0:
        raise ValueError("escape requires the growth regime (beta0 > 0)")
    Z0 = np.asarray(Z0, dtype=float)
    level = model.N ** (1 - alpha) + float(sp.v @ Z0)
    cm = compile_model(model)
    X0 = _initial_counts(model, Z0)
    R = int(replicas)
    offs = (np.asarray(window_offsets, dtype=float)
            if window_offsets is not None else np.empty(0))
    G = offs.shape[0]
    out_term = np.empty(R, np.int64)
    out_t = np.empty(R)
    out_nev = np.empty(R, np.int64)
    out_tau = np.empty(R)
    out_tau0 = np.empty(R)
    out_nu = np.empty(R, np.int64)
    out_end = np.empty((R, model.d))
    out_win = np.empty((R, G, model.d))
    K.batch_escape(rng.seed, rng.stream_id, R,
                   cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                   cm.d1, 1.0 / cm.N, cm.x0, np.inf,
                   X0, np.asarray(sp.v, dtype=float), level, 1, np.inf, cap,
                   offs,
                   out_term, out_t, out_nev, out_tau, out_tau0, out_nu,
                   out_end, out_win)
    survived = out_term == K.TERM_LEVEL
    return sp, level, out_tau, out_tau0, survived, (out_win if G else None)


@dataclass(frozen=True)
class EscapeDelayResult:
    model_name: str
    N: int
    alpha: float
    beta0: float
    u: np.ndarray
    v: np.ndarray
    t_xi_formula: float
    t_xi_flow: float          # root-find on the integrated flow (cross-check)
    survival_fraction: float
    survival_stderr: float
    delays: np.ndarray        # beta0 * (tau - t_xi) over surviving replicas
    fit: GumbelFit            # free location and scale
    fit_fixed_scale: GumbelFit  # location-only fit at scale 1
    summaries: tuple[ReplicaSummary, ...]
    seed: int


def _flow_crossing_time(model: PopulationModel, sp: SpectralData, Z0,
                        alpha: float) -> float:
    """Time at which the deterministic flow crosses the weighted threshold."""
    Z0 = np.asarray(Z0, dtype=float)
    xi0 = np.asarray(model.x0, dtype=float).copy()
    xi0[model.d1:] += Z0 / model.N
    target = model.N ** (-alpha) + float(sp.v @ Z0) / model.N
    t_guess = timescales(sp, model.N, alpha=alpha, Z0=Z0).t_xi_alpha
    traj = integrate(model, xi0, 2.0 * t_guess + 1.0, tol=1e-10)

    def f(t):
        return float(sp.v @ traj.at(t)[model.d1:]) - target

    lo, hi = 0.0, traj.t_end
    if f(hi) < 0:
        raise RuntimeError("flow did not reach the threshold in the probed window")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _fit_gumbel_fixed_scale(x: np.ndarray) -> GumbelFit:
    loc = -math.log(float(np.mean(np.exp(-(x - x.min()))))) + x.min()
    ks = ks_statistic(x, lambda v: gumbel_cdf(v, loc, 1.0)).statistic
    return GumbelFit(location=float(loc), scale=1.0, ks_stat=ks, n=x.shape[0])


def escape_delay_experiment(model: PopulationModel, N: int, Z0, replicas: int,
                            rng: RngStream, alpha: float = 5 / 12) -> EscapeDelayResult:
    """Distribution of the random time shift between the chain and the flow.

    Each surviving replica contributes beta0 * (tau - t_xi), where tau is its
    threshold crossing and t_xi the deterministic crossing formula; the
    samples are fitted against the extreme-value law with a free location
    (which absorbs the unknown mean of the growth limit) and a scale that
    should sit near one.
    """
    model = model.with_scale(int(N))
    Z0 = np.asarray(Z0, dtype=float)
    sp, level, tau, tau0, survived, _ = escape_batch(model, Z0, rng, replicas, alpha)
    n_surv = int(np.count_nonzero(survived))
    if n_surv < 200:
        raise FitError(f"only {n_surv} surviving replicas; need at least 200 for a fit")
    t_xi = timescales(sp, model.N, alpha=alpha, Z0=Z0).t_xi_alpha
    t_xi_flow = _flow_crossing_time(model, sp, Z0, alpha)
    delays = sp.beta0 * (tau[survived] - t_xi)
    fit = fit_gumbel(delays)
    fit1 = _fit_gumbel_fixed_scale(delays)
    p = n_surv / replicas
    summaries = tuple(
        ReplicaSummary(seed=rng.seed, stream_id=rng.stream_id + r,
                       survived=bool(survived[r]),
                       tau_star=float(tau[r]) if survived[r] else None,
                       delay=float(sp.beta0 * (tau[r] - t_xi)) if survived[r] else None,
                       extinction_time=None if np.isnan(tau0[r]) else float(tau0[r]))
        for r in range(replicas))
    return EscapeDelayResult(
        model_name=model.name, N=model.N, alpha=alpha, beta0=sp.beta0,
        u=sp.u, v=sp.v,
        t_xi_formula=t_xi, t_xi_flow=t_xi_flow,
        survival_fraction=p,
        survival_stderr=math.sqrt(max(p * (1 - p), 1e-12) / replicas),
        delays=delays, fit=fit, fit_fixed_scale=fit1,
        summaries=summaries, seed=rng.seed,
    )


# ---------------------------------------------------------------------------
# Extinction times of the subcritical phase
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtinctionResult:
    beta1: float
    h_star: float
    n0: int
    times: np.ndarray
    centered: np.ndarray       # beta1 T - log n0 - log h_star
    fit: GumbelFit
    ks_standard_gumbel: KSResult
    exact_cdf_distance: float | None  # sup |F_emp - p0(t)^n0| (birth-death only)
    summaries: tuple[ReplicaSummary, ...]
    seed: int


def _bd_rates(spec: BranchingSpec) -> tuple[float, float] | None:
    """(lam, mu) if the spec is a single-type birth-death chain."""
    if spec.d2 != 1:
        return None
    lam = mu = 0.0
    for ev in spec.events:
        if ev.J2 == (1,):
            lam += ev.per_capita_rate
        elif ev.J2 == (-1,):
            mu += ev.per_capita_rate
        else:
            return None
    return (lam, mu) if lam > 0 and mu > 0 else None


def bd_extinction_cdf(lam: float, mu: float, t, n0: int = 1):
    """Closed-form P(T <= t) for n0 independent lines of a birth-death chain."""
    t = np.asarray(t, dtype=float)
    b = mu - lam
    e = np.exp(b * t)
    p0 = mu * (e - 1.0) / (mu * e - lam)
    return p0 ** n0


def extinction_experiment(spec, n0: int, replicas: int,
                          rng: RngStream) -> ExtinctionResult:
    """Extinction time of n0 lines of a subcritical single-type chain.

    The absorption time is centered as beta1 T - log n0 - log h*, with h* the
    single-line survival-tail constant (1 - lam/mu for birth-death), and
    compared against the standard extreme-value law; for birth-death chains
    the empirical law is also checked against the exact closed form.
    """
    if isinstance(spec, PopulationModel):
        spec = from_model(spec)
    if spec.spectral.beta0 >= 0:
        raise ValueError("extinction experiment requires a subcritical chain")
    if n0 < 1000:
        raise ValueError("n0 must be at least 1000 for the extreme-value regime")
    if spec.d2 != 1:
        raise NotImplementedError("extinction experiment supports single-type chains")
    beta1 = -spec.spectral.beta0
    bd = _bd_rates(spec)
    if bd is None:
        raise NotImplementedError("tail constant is evaluated for birth-death chains")
    lam, mu = bd
    h_star = 1.0 - lam / mu

    model = spec.to_model()
    cm = compile_model(model)
    R = int(replicas)
    X0 = np.array([float(n0)])
    out_term = np.empty(R, np.int64)
    out_t = np.empty(R)
    out_nev = np.empty(R, np.int64)
    out_tau = np.empty(R)
    out_tau0 = np.empty(R)
    out_nu = np.empty(R, np.int64)
    out_end = np.empty((R, 1))
    out_win = np.empty((R, 0, 1))
    K.batch_escape(rng.seed, rng.stream_id, R,
                   cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                   cm.d1, 1.0, cm.x0, np.inf,
                   X0, np.ones(1), np.inf, 1, np.inf, DEFAULT_EVENT_CAP,
                   np.empty(0),
                   out_term, out_t, out_nev, out_tau, out_tau0, out_nu,
                   out_end, out_win)
    if not np.all(out_term == K.TERM_BLOCK2_ZERO):
        raise RuntimeError("a replica failed to reach absorption")
    T = out_tau0.copy()
    centered = beta1 * T - math.log(n0) - math.log(h_star)
    fit = fit_gumbel(centered)
    ks_std = ks_statistic(centered, gumbel_cdf)
    exact = float(ks_statistic(T, lambda t: bd_extinction_cdf(lam, mu, t, n0)).statistic)
    summaries = tuple(
        ReplicaSummary(seed=rng.seed, stream_id=rng.stream_id + r, survived=False,
                       extinction_time=float(T[r]))
        for r in range(R))
    return ExtinctionResult(
        beta1=beta1, h_star=h_star, n0=int(n0), times=T, centered=centered,
        fit=fit, ks_standard_gumbel=ks_std, exact_cdf_distance=exact,
        summaries=summaries, seed=rng.seed,
    )


# ---------------------------------------------------------------------------
# Three-phase decomposition of a full invasion-to-substitution run
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThreePhaseResult:
    survived: bool
    tau_escape: float | None       # weighted threshold crossing (phase 1 end)
    t_delta: float | None          # resident density first below delta (phase 2 end)
    t_absorbed: float | None       # resident count hits zero
    extinction_time: float | None  # invader died in phase 1
    total: float | None
    n_events: int

    @property
    def phase_durations(self) -> tuple[float, float, float] | None:
        if not self.survived or self.t_absorbed is None:
            return None
        return (self.tau_escape, self.t_delta - self.tau_escape,
                self.t_absorbed - self.t_delta)


def three_phase_batch(a1: float, a2: float, gamma: float, N: int,
                      rng: RngStream, replicas: int, Z0: int = 1,
                      delta: float = 0.1, alpha: float = 5 / 12,
                      cap: int = DEFAULT_EVENT_CAP) -> list[ThreePhaseResult]:
    """Replicated full runs from (N a1, Z0) to resident extinction."""
    if not (a2 > gamma * a1 and a1 < gamma * a2):
        raise ValueError("need a2 > gamma*a1 (escape) and a1 < gamma*a2 (substitution)")
    model = barebones(a1, a2, gamma, "invasion", N=int(N))
    sp = spectral_data(model)
    cm = compile_model(model)
    Z0v = np.array([float(Z0)])
    X0 = _initial_counts(model, Z0v)
    level = N ** (1 - alpha) + float(sp.v @ Z0v)
    R = int(replicas)
    out_surv = np.empty(R, np.int64)
    out_tau1 = np.empty(R)
    out_tau2 = np.empty(R)
    out_tau3 = np.empty(R)
    out_nev = np.empty(R, np.int64)
    out_term = np.empty(R, np.int64)
    K.batch_three_phase(rng.seed, rng.stream_id, R,
                        cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                        cm.d1, 1.0 / cm.N, cm.x0,
                        X0, np.asarray(sp.v, dtype=float), level,
                        delta * N, np.inf, cap,
                        out_surv, out_tau1, out_tau2, out_tau3, out_nev, out_term)
    out = []
    for r in range(R):
        surv = bool(out_surv[r])
        t3 = None if np.isnan(out_tau3[r]) else float(out_tau3[r])
        out.append(ThreePhaseResult(
            survived=surv,
            tau_escape=float(out_tau1[r]) if surv else None,
            t_delta=None if np.isnan(out_tau2[r]) else float(out_tau2[r]),
            t_absorbed=t3,
            extinction_time=None if surv else (
                None if np.isnan(out_tau1[r]) else float(out_tau1[r])),
            total=t3 if surv else None,
            n_events=int(out_nev[r]),
        ))
    return out


def three_phase_run(a1: float, a2: float, gamma: float, N: int,
                    rng: RngStream, **kwargs) -> ThreePhaseResult:
    """One full trajectory decomposition; see three_phase_batch."""
    return three_phase_batch(a1, a2, gamma, N, rng, 1, **kwargs)[0]


# ---------------------------------------------------------------------------
# Path closeness across population scales
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PathClosenessPoint:
    N: int
    median: float
    q90: float
    median_ci: tuple[float, float]  # bootstrap 95%
    n_surviving: int
    sup_errors: np.ndarray


def path_closeness_experiment(model: PopulationModel, N_list, replicas: int,
                              rng: RngStream, Z0=None, alpha: float = 5 / 12,
                              T_extra: float = 1.0, grid_points: int = 200,
                              n_boot: int = 400) -> list[PathClosenessPoint]:
    """Sup-distance between the chain after its crossing and the flow after
    its deterministic crossing time, over the escape window, per scale."""
    out = []
    for k, N in enumerate(N_list):
        mN = model.with_scale(int(N))
        sp = spectral_data(mN)
        Z0v = np.ones(mN.d2) if Z0 is None else np.asarray(Z0, dtype=float)
        Tw = (alpha / sp.beta0) * math.log(N) + T_extra
        offs = np.linspace(0.0, Tw, grid_points)
        sub_rng = RngStream(rng.seed, rng.stream_id + k * 1_000_000)
        _, _, tau, _, survived, win = escape_batch(
            mN, Z0v, sub_rng, replicas, alpha, window_offsets=offs)
        t_xi = timescales(sp, mN.N, alpha=alpha, Z0=Z0v).t_xi_alpha
        xi0 = np.asarray(mN.x0, dtype=float).copy()
        xi0[mN.d1:] += Z0v / mN.N
        traj = integrate(mN, xi0, t_xi + Tw + 1e-9, tol=1e-10)
        ref = traj.at(t_xi + offs)                      # (G, d)
        dens = win[survived] / mN.N                     # (n, G, d)
        sup_err = np.max(np.linalg.norm(dens - ref[None], axis=2), axis=1)
        med = float(np.median(sup_err))
        g = np.random.default_rng([rng.seed, rng.stream_id, k, 77])
        boots = np.median(
            sup_err[g.integers(0, sup_err.shape[0], size=(n_boot, sup_err.shape[0]))],
            axis=1)
        out.append(PathClosenessPoint(
            N=int(N), median=med, q90=float(np.quantile(sup_err, 0.9)),
            median_ci=(float(np.quantile(boots, 0.025)),
                       float(np.quantile(boots, 0.975))),
            n_surviving=int(sup_err.shape[0]), sup_errors=sup_err))
    return out


def log_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


# ---------------------------------------------------------------------------
# Growth-limit samples (for the conditional shape analysis)
# ---------------------------------------------------------------------------

def w_samples(spec: BranchingSpec, Z0, replicas: int, rng: RngStream,
              T_max: float | None = None) -> np.ndarray:
    """Horizon estimates of the growth limit W = lim v.Z(t) e^{-beta0 t}."""
    sp = spec.spectral
    if sp.beta0 <= 0:
        raise ValueError("W sampling requires a supercritical spec")
    Z0 = np.asarray(Z0, dtype=float)
    w0 = float(sp.v @ Z0)
    if T_max is None:
        T_max = (4 * math.log(10.0) + max(0.0, math.log(w0))) / sp.beta0
    model = spec.to_model()
    cm = compile_model(model)
    R = int(replicas)
    grid = np.array([T_max])
    out_states = np.empty((R, 1, spec.d2))
    out_intf = np.empty((R, 0, spec.d2))
    out_term = np.empty(R, np.int64)
    out_nev = np.empty(R, np.int64)
    K.batch_grid(rng.seed, rng.stream_id, R,
                 cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                 cm.d1, 1.0, cm.x0, np.inf,
                 Z0, grid, 0, DEFAULT_EVENT_CAP,
                 out_states, out_intf, out_term, out_nev)
    return (out_states[:, 0, :] @ np.asarray(sp.v)) * math.exp(-sp.beta0 * T_max)
