"""Exact event-driven simulation of the population chain.

The direct method is used throughout: one exponential waiting time from the
total rate, then a categorical draw proportional to the individual rates,
with all rates re-evaluated from the current state at every event.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from ._compile import CompiledModel, compile_model
from .model import PopulationModel

__all__ = [
    "RngStream",
    "StopSpec",
    "StoppingTimes",
    "TrajectoryRecord",
    "SimulationError",
    "simulate",
    "simulate_truncated",
    "martingale_path",
    "first_crossing",
    "state_at",
    "trajectory_csv",
    "event_log_csv",
]

DEFAULT_EVENT_CAP = 100_000_000


class SimulationError(RuntimeError):
    """Run aborted in an invalid region (negative rate or negative state)."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream key: (seed, stream_id) pins the whole event sequence."""

    seed: int
    stream_id: int = 0

    def numpy_rng(self) -> np.random.Generator:
        return np.random.default_rng([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream_id])


@dataclass(frozen=True)
class StopSpec:
    """Stopping condition for a run.

    kind "weighted_level" needs v (weights on the second-block counts) and
    level; "time_horizon" and "event_cap" carry their bound in level;
    "second_block_zero" has no parameters.
    """

    kind: str
    v: tuple[float, ...] | None = None
    level: float | None = None

    def __post_init__(self):
        kinds = {"second_block_zero", "weighted_level", "time_horizon", "event_cap"}
        if self.kind not in kinds:
            raise ValueError(f"unknown stop kind {self.kind!r}")
        if self.kind == "weighted_level" and (self.v is None or self.level is None):
            raise ValueError("weighted_level requires both v and level")
        if self.kind in ("time_horizon", "event_cap") and self.level is None:
            raise ValueError(f"{self.kind} requires level")


@dataclass(frozen=True)
class StoppingTimes:
    tau_x0: float | None = None       # absorption time of the second block
    tau_alpha: float | None = None    # first weighted-level crossing
    jump_count_at_tau: int | None = None


@dataclass(frozen=True)
class TrajectoryRecord:
    model: PopulationModel
    X0: np.ndarray                    # integer counts at time 0
    times: np.ndarray                 # event times (empty when not recorded)
    jump_indices: np.ndarray
    terminal: str                     # horizon | absorbed | event_cap | stop_hit
    t_end: float
    X_end: np.ndarray
    n_events: int
    stopping: StoppingTimes
    snapshot_times: np.ndarray | None = None
    snapshot_states: np.ndarray | None = None  # counts, (G, d)

    @property
    def recorded(self) -> bool:
        return self.times.shape[0] == self.n_events


_TERMINAL_NAMES = {
    K.TERM_HORIZON: "horizon",
    K.TERM_ABSORBED: "absorbed",
    K.TERM_CAP: "event_cap",
    K.TERM_LEVEL: "stop_hit",
    K.TERM_BLOCK2_ZERO: "stop_hit",
    K.TERM_COORD_LOW: "stop_hit",
}


def _parse_stops(model: PopulationModel, stops) -> tuple[np.ndarray, float, int, float, int]:
    vlev = np.empty(0)
    level = np.inf
    stop_b2z = 0
    horizon = np.inf
    cap = DEFAULT_EVENT_CAP
    has_terminating = False
    for s in stops:
        if s.kind == "time_horizon":
            horizon = float(s.level)
            has_terminating = True
        elif s.kind == "event_cap":
            cap = int(s.level)
            has_terminating = True
        elif s.kind == "second_block_zero":
            stop_b2z = 1
        elif s.kind == "weighted_level":
            vlev = np.asarray(s.v, dtype=float)
            if vlev.shape != (model.d2,):
                raise ValueError(f"weight vector must have length d2={model.d2}")
            if np.any(vlev <= 0):
                raise ValueError("weight vector must be strictly positive")
            level = float(s.level)
    if not has_terminating:
        raise ValueError("at least one terminating stop (time_horizon or event_cap) is required")
    return vlev, level, stop_b2z, horizon, cap


def _run(cm: CompiledModel, X0: np.ndarray, rng: RngStream, theta: float,
         vlev, level, stop_b2z, horizon, cap, record_events: bool,
         snapshot_grid: np.ndarray | None):
    d = cm.d
    rs = np.empty(4, np.uint64)
    grid = np.asarray(snapshot_grid, dtype=float) if snapshot_grid is not None else np.empty(0)
    if grid.size and (np.any(np.diff(grid) < 0) or grid[-1] > horizon):
        raise ValueError("snapshot grid must be sorted and contained in [0, horizon]")
    snap = np.empty((grid.shape[0], d))
    no_intf = np.empty((0, d))
    rates = np.empty(cm.jumps.shape[0])
    empty_t = np.empty(0)
    empty_j = np.empty(0, np.int64)

    def one_pass(ev_t, ev_j, rec_on):
        K._rng_init(rng.seed, rng.stream_id, rs)
        Xe = np.empty(d + 1)
        Xe[:d] = X0
        Xe[d] = 1.0
        res = K.sim_core(rs, Xe, 0.0,
                         cm.jumps, cm.mstart, cm.mcoeff, cm.mfac, cm.s_idx, cm.gbar0,
                         cm.d1, 1.0 / cm.N, cm.x0, theta,
                         vlev, level, stop_b2z, -1, 0.0,
                         horizon, cap, ev_t, ev_j, rec_on,
                         grid, snap, no_intf, 0, rates)
        return res, Xe[:d].copy()

    (term, t_end, nev, tau_lvl, tau_z0, nu, _), X_end = one_pass(empty_t, empty_j, 0)
    if term == K.TERM_INVALID:
        raise SimulationError(
            f"run left the valid region near t={t_end:.6g} (negative rate or state)",
            t=t_end, state=X_end)
    if record_events:
        ev_t = np.empty(nev)
        ev_j = np.empty(nev, np.int64)
        one_pass(ev_t, ev_j, 1)  # identical path: same stream replayed
    else:
        ev_t, ev_j = empty_t, empty_j.copy()
    return term, t_end, nev, tau_lvl, tau_z0, nu, X_end, ev_t, ev_j, grid, snap


def simulate(model: PopulationModel, X0, stops, rng: RngStream, *,
             record_events: bool = True,
             snapshot_grid=None) -> TrajectoryRecord:
    """Exact simulation from integer counts X0 until the first listed stop.

    Event logs are recorded by default (two deterministic passes: count, then
    store); pass record_events=False and a snapshot_grid for long runs.
    """
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (model.d,):
        raise ValueError(f"X0 must have shape ({model.d},)")
    if np.any(X0 < 0) or np.any(X0 != np.floor(X0)):
        raise ValueError("X0 must be non-negative integer counts")
    return _simulate_impl(model, X0, stops, rng, np.inf, record_events, snapshot_grid)


def simulate_truncated(model: PopulationModel, theta: float, X0, stops,
                       rng: RngStream, *, record_events: bool = True,
                       snapshot_grid=None) -> TrajectoryRecord:
    """Like simulate, but second-block rates are frozen at their x0 values
    whenever |x - x0| > theta (Euclidean distance between densities)."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    X0 = np.asarray(X0, dtype=float)
    return _simulate_impl(model, X0, stops, rng, float(theta), record_events, snapshot_grid)


def _simulate_impl(model, X0, stops, rng, theta, record_events, snapshot_grid):
    cm = compile_model(model)
    vlev, level, stop_b2z, horizon, cap = _parse_stops(model, stops)
    term, t_end, nev, tau_lvl, tau_z0, nu, X_end, ev_t, ev_j, grid, snap = _run(
        cm, X0, rng, theta, vlev, level, stop_b2z, horizon, cap,
        record_events, snapshot_grid)
    stopping = StoppingTimes(
        tau_x0=None if np.isnan(tau_z0) else float(tau_z0),
        tau_alpha=None if np.isnan(tau_lvl) else float(tau_lvl),
        jump_count_at_tau=None if nu < 0 else int(nu),
    )
    return TrajectoryRecord(
        model=model, X0=X0.copy(), times=ev_t, jump_indices=ev_j,
        terminal=_TERMINAL_NAMES[term], t_end=float(t_end), X_end=X_end,
        n_events=int(nev), stopping=stopping,
        snapshot_times=grid if grid.size else None,
        snapshot_states=snap if grid.size else None,
    )


def _states_along(traj: TrajectoryRecord) -> np.ndarray:
    """Counts after each recorded event, shape (n_events + 1, d); row 0 is X0."""
    if not traj.recorded:
        raise ValueError("trajectory was run without event recording")
    jumps = np.asarray([j.J for j in traj.model.jumps], dtype=float)
    out = np.empty((traj.n_events + 1, traj.model.d))
    out[0] = traj.X0
    if traj.n_events:
        out[1:] = traj.X0 + np.cumsum(jumps[traj.jump_indices], axis=0)
    return out


def state_at(traj: TrajectoryRecord, t: float) -> np.ndarray:
    """Counts at time t, reconstructed from the event log (right-continuous)."""
    if t < 0 or t > traj.t_end:
        raise ValueError(f"t={t} outside the trajectory span [0, {traj.t_end}]")
    k = int(np.searchsorted(traj.times, t, side="right"))
    return _states_along(traj)[k]


def _drift_many(model: PopulationModel, dens: np.ndarray) -> np.ndarray:
    """Drift at many density points, shape (n, d) -> (n, d)."""
    F = np.zeros_like(dens)
    for jump in model.jumps:
        g = np.zeros(dens.shape[0])
        for m in jump.rate.monomials:
            g += m.coeff * np.prod(dens ** np.asarray(m.powers), axis=1)
        F += np.outer(g, np.asarray(jump.J, dtype=float))
    return F


def martingale_path(traj: TrajectoryRecord, grid) -> np.ndarray:
    """Fluctuation path m(t) = x(t) - x(0) - int_0^t F(x(u)) du on the grid.

    The integral is exact over the piecewise-constant trajectory; densities
    x = X / N.  Requires a recorded event log.
    """
    grid = np.asarray(grid, dtype=float)
    span_end = np.inf if traj.terminal == "absorbed" else traj.t_end
    if grid.size and (grid.min() < 0 or grid.max() > span_end):
        raise ValueError("grid must lie within the trajectory span")
    N = traj.model.N
    states = _states_along(traj)
    dens = states / N
    F = _drift_many(traj.model, dens)
    times = np.concatenate([[0.0], traj.times])
    hold = np.diff(np.concatenate([times, [traj.t_end]]))
    int_cum = np.vstack([np.zeros(traj.model.d), np.cumsum(F * hold[:, None], axis=0)])

    out = np.empty((grid.shape[0], traj.model.d))
    idx = np.searchsorted(traj.times, grid, side="right")
    for i, (t, k) in enumerate(zip(grid, idx)):
        intF = int_cum[k] + F[k] * (t - times[k])
        out[i] = dens[k] - dens[0] - intF
    return out


def first_crossing(traj: TrajectoryRecord, v, level: float) -> float | None:
    """First event time with v . (second-block counts) >= level; None if never.

    The crossing is evaluated on post-jump states, and at time 0 if the
    initial state already satisfies it.
    """
    v = np.asarray(v, dtype=float)
    if np.any(v <= 0):
        raise ValueError("weight vector must be strictly positive")
    d1 = traj.model.d1
    states = _states_along(traj)
    w = states[:, d1:] @ v
    if w[0] >= level:
        return 0.0
    hits = np.nonzero(w[1:] >= level)[0]
    if hits.size == 0:
        return None
    return float(traj.times[hits[0]])


def trajectory_csv(traj: TrajectoryRecord, path: str) -> None:
    """Snapshot grid as CSV with header t,comp_0,...,comp_{d-1} (densities)."""
    if traj.snapshot_times is None:
        raise ValueError("trajectory has no snapshot grid")
    d = traj.model.d
    header = "t," + ",".join(f"comp_{i}" for i in range(d))
    dens = traj.snapshot_states / traj.model.N
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for t, row in zip(traj.snapshot_times, dens):
            fh.write(f"{t!r}," + ",".join(repr(x) for x in row) + "\n")


def event_log_csv(traj: TrajectoryRecord, path: str) -> None:
    """Event log as CSV with header t,jump_index."""
    if not traj.recorded:
        raise ValueError("trajectory was run without event recording")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,jump_index\n")
        for t, j in zip(traj.times, traj.jump_indices):
            fh.write(f"{t!r},{j}\n")
