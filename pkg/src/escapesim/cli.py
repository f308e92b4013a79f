"""Command-line surface: model validation, simulation, experiments, presets.

Every command writes deterministic artifacts (CSV tables, pretty-printed JSON
summaries keyed by the seed) into the output directory; wall-clock timestamps
go only to the sidecar runinfo.log so reruns with the same seed are
byte-identical.  ESCAPE_SEED overrides --seed when set.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import subprocess
import sys

import numpy as np

from . import __version__
from . import branching as br
from . import coupling as cp
from . import lab
from .flow import escape_point, integrate, lemma_envelopes, timescales, voc_residual
from .model import (ModelError, barebones, linear_birth_death, load_model,
                    stochastic_logistic, two_type_symmetric, validate_model)
from .simulate import (RngStream, StopSpec, event_log_csv, simulate,
                       trajectory_csv)
from .spectral import spectral_data

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)))
        if out.returncode == 0:
            return out.stdout.strip()
    except Exception:
        pass
    return f"escapesim-{__version__}"


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _log(args, message: str) -> None:
    stamp = datetime.datetime.now().isoformat(timespec="seconds")
    with open(os.path.join(_outdir(args), "runinfo.log"), "a", encoding="utf-8") as fh:
        fh.write(f"{stamp} {message}\n")


def _write_json(args, name: str, payload: dict) -> str:
    payload = dict(payload)
    payload["build"] = _git_describe()
    path = os.path.join(_outdir(args), name)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonify)
        fh.write("\n")
    return path


def _jsonify(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _seed(args) -> int:
    env = os.environ.get("ESCAPE_SEED")
    return int(env) if env else args.seed


def _threads(args) -> None:
    if args.threads:
        import numba

        numba.set_num_threads(args.threads)


def _model_from_args(args):
    if getattr(args, "model", None):
        return load_model(args.model)
    name = args.builtin
    if name == "barebones":
        return barebones(args.a1, args.a2, args.gamma, "invasion", N=args.N)
    if name == "barebones-extinction":
        return barebones(args.a1, args.a2, args.gamma, "extinction", N=args.N)
    if name == "linear-bd":
        return linear_birth_death(args.lam, args.mu, N=args.N)
    if name == "two-type":
        return two_type_symmetric(args.eta, N=args.N)
    if name == "logistic":
        return stochastic_logistic(N=args.N)
    raise ModelError(f"unknown builtin {name!r}")


def _add_model_args(p: argparse.ArgumentParser):
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--builtin", default="barebones",
                   choices=["barebones", "barebones-extinction", "linear-bd",
                            "two-type", "logistic"],
                   help="built-in model family (ignored with --model)")
    p.add_argument("--a1", type=float, default=1.0, help="resident birth rate")
    p.add_argument("--a2", type=float, default=3.0, help="invader birth rate")
    p.add_argument("--gamma", type=float, default=0.6, help="cross-mortality coefficient")
    p.add_argument("--lam", type=float, default=3.0, help="linear birth rate")
    p.add_argument("--mu", type=float, default=0.6, help="linear death rate")
    p.add_argument("--eta", type=float, default=0.25, help="two-type mixing rate")
    p.add_argument("--N", type=int, default=10_000, help="population scale")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0, help="master seed (ESCAPE_SEED overrides)")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--threads", type=int, default=0,
                   help="replica parallelism degree (0 = all hardware threads)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="escapesim",
        description="Exact simulation and analysis of boundary escape and "
                    "extinction in density-dependent population chains.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the structural assumptions of a model")
    _add_model_args(p)
    _add_common(p)

    p = sub.add_parser("simulate", help="one exact trajectory with event/snapshot export")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--x0-counts", default=None,
                   help="comma-separated initial counts (default: N*x0 with one invader)")
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--grid-points", type=int, default=200)

    p = sub.add_parser("branching", help="branching companion: survival probability and W")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--z0", type=int, default=1)
    p.add_argument("--replicas", type=int, default=10_000)

    p = sub.add_parser("flow", help="deterministic flow: integrate and report timescales")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--grid-points", type=int, default=200)

    p = sub.add_parser("couple", help="coupled chain/branching divergence fractions")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--alpha", type=float, default=5 / 12)
    p.add_argument("--replicas", type=int, default=5000)
    p.add_argument("--N-list", default=None,
                   help="comma-separated scales (default: the single --N)")

    p = sub.add_parser("tv", help="total variation of the logistic chain against its linear law")
    _add_common(p)
    p.add_argument("--N", type=int, default=10_000)
    p.add_argument("--m", type=int, default=None,
                   help="jump count (default: floor(N^(2/3)))")
    p.add_argument("--replicas", type=int, default=10_000)

    p = sub.add_parser("escape", help="escape-delay experiment with extreme-value fit")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--z0", type=int, default=1)
    p.add_argument("--alpha", type=float, default=5 / 12)
    p.add_argument("--replicas", type=int, default=5000)

    p = sub.add_parser("extinction", help="extinction-time experiment for a subcritical chain")
    _add_common(p)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=1.8)
    p.add_argument("--n0", type=int, default=100_000)
    p.add_argument("--replicas", type=int, default=5000)

    p = sub.add_parser("three-phase", help="full invasion-to-substitution decomposition")
    _add_common(p)
    p.add_argument("--a1", type=float, default=1.0)
    p.add_argument("--a2", type=float, default=3.0)
    p.add_argument("--gamma", type=float, default=0.6)
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--delta", type=float, default=0.1)

    p = sub.add_parser("closeness", help="chain/flow sup-distance over the escape window")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--N-list", default="10000,100000")
    p.add_argument("--replicas", type=int, default=400)

    p = sub.add_parser("envelopes", help="empirical constants of the flow bounds")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--eps-grid", default="1e-3,1e-4,1e-5")
    p.add_argument("--delta", type=float, default=0.1)

    p = sub.add_parser("reproduce", help="named presets mirroring the acceptance checks")
    _add_common(p)
    p.add_argument("--experiment", required=True,
                   choices=["spectral-exactness", "survival", "coupling-fidelity",
                            "tv-breakdown", "escape-scaling", "escape-delay",
                            "extinction-gumbel", "path-closeness",
                            "infrastructure", "w-shape"])
    p.add_argument("--N", type=int, default=None, help="override the preset scale")
    p.add_argument("--replicas", type=int, default=None, help="override replica count")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ModelError, ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


def _dispatch(args) -> int:
    _threads(args)
    seed = _seed(args)
    cmd = args.command
    _log(args, f"start {cmd} seed={seed}")

    if cmd == "validate":
        model = _model_from_args(args)
        report = validate_model(model)
        print(f"model: {model.name}")
        if report.passed:
            sp = spectral_data(model)
            print(f"valid: growth value {sp.beta0:.6g}, weights u={sp.u}, v={sp.v}")
            return EXIT_OK
        for v in report.violations:
            print(f"violation [{v.assumption}] at {v.where}: {v.message}")
        return EXIT_FAILURE

    if cmd == "simulate":
        model = _model_from_args(args)
        if args.x0_counts:
            X0 = [float(v) for v in args.x0_counts.split(",")]
        else:
            X0 = np.round(np.asarray(model.x0) * model.N)
            X0[model.d1:] = np.maximum(X0[model.d1:], 1.0)
        grid = np.linspace(0.0, args.horizon, args.grid_points)
        traj = simulate(model, X0, [StopSpec("time_horizon", level=args.horizon)],
                        RngStream(seed), record_events=True, snapshot_grid=grid)
        trajectory_csv(traj, os.path.join(_outdir(args), "trajectory.csv"))
        event_log_csv(traj, os.path.join(_outdir(args), "events.csv"))
        _write_json(args, "simulate.json", {
            "model": model.name, "seed": seed, "terminal": traj.terminal,
            "n_events": traj.n_events, "t_end": traj.t_end,
            "X_end": traj.X_end,
        })
        print(f"{traj.n_events} events to t={traj.t_end:g}; terminal={traj.terminal}")
        return EXIT_OK

    if cmd == "branching":
        model = _model_from_args(args)
        spec = br.from_model(model)
        Z0 = np.zeros(spec.d2)
        Z0[0] = args.z0
        prob = br.survival_probability(spec, Z0, args.replicas, RngStream(seed))
        _write_json(args, "branching.json", {
            "model": model.name, "seed": seed, "Z0": Z0,
            "survival": prob.estimate, "stderr": prob.stderr,
            "ci": [prob.ci_low, prob.ci_high], "replicas": prob.n,
            "growth_value": spec.spectral.beta0,
        })
        print(f"survival {prob.estimate:.4f} +- {prob.stderr:.4f} "
              f"(95% CI [{prob.ci_low:.4f}, {prob.ci_high:.4f}])")
        return EXIT_OK

    if cmd == "flow":
        model = _model_from_args(args)
        xi0 = np.asarray(model.x0, dtype=float).copy()
        xi0[model.d1:] += 1.0 / model.N
        traj = integrate(model, xi0, args.T, args.tol)
        grid = np.linspace(0.0, args.T, args.grid_points)
        states = traj.at(grid)
        with open(os.path.join(_outdir(args), "flow.csv"), "w", encoding="utf-8") as fh:
            fh.write("t," + ",".join(f"comp_{i}" for i in range(model.d)) + "\n")
            for t, row in zip(grid, states):
                fh.write(f"{t!r}," + ",".join(repr(v) for v in row) + "\n")
        resid = voc_residual(model, traj, grid[1::max(1, args.grid_points // 8)])
        sp = spectral_data(model)
        ts = timescales(sp, model.N, Z0=np.ones(model.d2), delta=0.1,
                        eps=model.N ** (-5 / 12))
        payload = {
            "model": model.name, "final_state": states[-1],
            "max_voc_residual": float(resid.max()),
            "steps_accepted": traj.n_accepted, "steps_rejected": traj.n_rejected,
            "timescales": {k: v for k, v in ts.__dict__.items() if v is not None},
        }
        if sp.beta0 > 0:
            ep = escape_point(model, model.N, 0.05)
            payload["escape_point"] = {
                "t": ep.t, "state": ep.state,
                "min_component": ep.min_component, "positive": ep.positive,
            }
        _write_json(args, "flow.json", payload)
        print(f"flow to T={args.T:g}: final {states[-1]}, "
              f"max integral-identity residual {resid.max():.3g}")
        return EXIT_OK

    if cmd == "couple":
        model = _model_from_args(args)
        N_list = ([int(float(v)) for v in args.N_list.split(",")]
                  if args.N_list else [model.N])
        points = cp.divergence_curve(model, N_list, args.alpha, args.replicas,
                                     RngStream(seed))
        cp.divergence_curve_csv(points, os.path.join(_outdir(args), "divergence.csv"))
        _write_json(args, "couple.json", {
            "model": model.name, "seed": seed, "alpha": args.alpha,
            "points": [p.__dict__ for p in points],
        })
        for p in points:
            print(f"N={p.N}: divergence fraction {p.fraction:.4f} "
                  f"[{p.ci_low:.4f}, {p.ci_high:.4f}]")
        return EXIT_OK

    if cmd == "tv":
        m = args.m if args.m is not None else int(args.N ** (2 / 3))
        samples = cp.logistic_lr(args.N, m, RngStream(seed), replicas=args.replicas)
        est = cp.tv_lower_from_lr(samples)
        exps = cp.lr_exponent_samples(args.N, m, RngStream(seed, 1), args.replicas)
        _write_json(args, "tv.json", {
            "N": args.N, "m": m, "seed": seed, "replicas": args.replicas,
            "tv_lower": est.value, "stderr": est.stderr,
            "exponent_variance": float(np.var(exps, ddof=1)),
            "expected_exponent_variance": (m / args.N ** (2 / 3)) ** 3 / 3,
        })
        print(f"TV lower bound {est.value:.4f} +- {est.stderr:.4f} at m={m}")
        return EXIT_OK

    if cmd == "escape":
        model = _model_from_args(args)
        Z0 = np.zeros(model.d2)
        Z0[0] = args.z0
        res = lab.escape_delay_experiment(model, args.N, Z0, args.replicas,
                                          RngStream(seed), alpha=args.alpha)
        lab.replica_csv(res.summaries, os.path.join(_outdir(args), "escape_replicas.csv"))
        _write_json(args, "escape.json", _escape_summary(res))
        print(f"survival {res.survival_fraction:.4f}; delay fit: "
              f"location {res.fit.location:.4f}, scale {res.fit.scale:.4f}, "
              f"KS {res.fit.ks_stat:.4f} (n={res.fit.n})")
        return EXIT_OK

    if cmd == "extinction":
        spec = br.birth_death_spec(args.lam, args.mu)
        res = lab.extinction_experiment(spec, args.n0, args.replicas, RngStream(seed))
        lab.replica_csv(res.summaries, os.path.join(_outdir(args), "extinction_replicas.csv"))
        _write_json(args, "extinction.json", _extinction_summary(res))
        print(f"centered extinction times: KS vs standard extreme-value law "
              f"{res.ks_standard_gumbel.statistic:.4f}; exact-law distance "
              f"{res.exact_cdf_distance:.4f}")
        return EXIT_OK

    if cmd == "three-phase":
        results = lab.three_phase_batch(args.a1, args.a2, args.gamma, args.N,
                                        RngStream(seed), args.replicas,
                                        delta=args.delta)
        rows = []
        for r in results:
            rows.append({
                "survived": r.survived, "tau_escape": r.tau_escape,
                "t_delta": r.t_delta, "t_absorbed": r.t_absorbed,
                "extinction_time": r.extinction_time, "total": r.total,
                "n_events": r.n_events,
            })
        with open(os.path.join(_outdir(args), "three_phase_replicas.csv"),
                  "w", encoding="utf-8") as fh:
            cols = ("survived", "tau_escape", "t_delta", "t_absorbed",
                    "extinction_time", "total", "n_events")
            fh.write(",".join(cols) + "\n")
            for row in rows:
                fh.write(",".join(
                    "" if row[c] is None else
                    ("1" if row[c] is True else "0" if row[c] is False else repr(row[c]))
                    for c in cols) + "\n")
        beta0 = args.a2 - args.gamma * args.a1
        beta1 = args.gamma * args.a2 - args.a1
        _write_json(args, "three_phase.json", {
            "seed": seed, "N": args.N, "replicas": args.replicas,
            "deterministic_total": (1 / beta0 + 1 / beta1) * math.log(args.N),
            "runs": rows,
        })
        surv = [r for r in results if r.survived and r.total is not None]
        if surv:
            tot = np.array([r.total for r in surv])
            print(f"{len(surv)}/{len(results)} surviving; mean total {tot.mean():.3f} "
                  f"vs deterministic {(1 / beta0 + 1 / beta1) * math.log(args.N):.3f}")
        else:
            print("no surviving replicas")
        return EXIT_OK

    if cmd == "closeness":
        model = _model_from_args(args)
        N_list = [int(float(v)) for v in args.N_list.split(",")]
        pts = lab.path_closeness_experiment(model, N_list, args.replicas,
                                            RngStream(seed))
        with open(os.path.join(_outdir(args), "closeness.csv"), "w", encoding="utf-8") as fh:
            fh.write("N,median_sup_error,q90,ci_low,ci_high,n_surviving\n")
            for p in pts:
                fh.write(f"{p.N},{p.median!r},{p.q90!r},{p.median_ci[0]!r},"
                         f"{p.median_ci[1]!r},{p.n_surviving}\n")
        slope = lab.log_slope([p.N for p in pts], [p.median for p in pts])
        _write_json(args, "closeness.json", {
            "seed": seed, "model": model.name,
            "points": [{"N": p.N, "median": p.median, "q90": p.q90,
                        "ci": list(p.median_ci), "n": p.n_surviving} for p in pts],
            "log_slope": slope,
        })
        for p in pts:
            print(f"N={p.N}: median sup-error {p.median:.5f} "
                  f"[{p.median_ci[0]:.5f}, {p.median_ci[1]:.5f}]")
        print(f"log-log slope {slope:.3f}")
        return EXIT_OK

    if cmd == "envelopes":
        model = _model_from_args(args)
        grid = [float(v) for v in args.eps_grid.split(",")]
        fits = lemma_envelopes(model, grid, delta=args.delta)
        path = os.path.join(_outdir(args), "envelopes.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("bound_id,eps,delta,fitted_constant,pass\n")
            for f in fits:
                for e, r in zip(grid, f.ratios):
                    fh.write(f"{f.bound_id},{e!r},{args.delta!r},{r!r},"
                             f"{int(f.passed)}\n")
        for f in fits:
            print(f"{f.bound_id}: constant {f.fitted_constant:.4g} "
                  f"({'stable' if f.passed else 'UNSTABLE'} across grid)")
        return EXIT_OK

    if cmd == "reproduce":
        return _reproduce(args, seed)

    raise ModelError(f"unhandled command {cmd}")


def _escape_summary(res: lab.EscapeDelayResult) -> dict:
    return {
        "model": res.model_name, "N": res.N, "alpha": res.alpha,
        "seed": res.seed,
        "spectral": {"growth_value": res.beta0, "u": list(res.u), "v": list(res.v)},
        "t_xi_formula": res.t_xi_formula, "t_xi_flow": res.t_xi_flow,
        "t_xi_discrepancy": res.t_xi_flow - res.t_xi_formula,
        "survival_fraction": res.survival_fraction,
        "survival_stderr": res.survival_stderr,
        "fit": {"location": res.fit.location, "scale": res.fit.scale,
                "ks": res.fit.ks_stat, "n": res.fit.n},
        "fit_fixed_scale": {"location": res.fit_fixed_scale.location,
                            "ks": res.fit_fixed_scale.ks_stat},
    }


def _extinction_summary(res: lab.ExtinctionResult) -> dict:
    return {
        "decay_value": res.beta1, "tail_constant": res.h_star, "n0": res.n0,
        "seed": res.seed, "replicas": len(res.times),
        "fit": {"location": res.fit.location, "scale": res.fit.scale,
                "ks": res.fit.ks_stat},
        "ks_standard": res.ks_standard_gumbel.statistic,
        "exact_cdf_distance": res.exact_cdf_distance,
    }


def _reproduce(args, seed: int) -> int:
    """Presets mirroring the acceptance checks, runnable as a CI script."""
    name = args.experiment
    rng = RngStream(seed)

    if name == "spectral-exactness":
        from .spectral import perron

        eta = 0.25
        sd = perron(np.array([[1 - eta, eta], [eta, 1 - eta]]))
        ok = (abs(sd.beta0 - 1) < 1e-12
              and np.allclose(sd.u, [0.5, 0.5], atol=1e-12)
              and np.allclose(sd.v, [1.0, 1.0], atol=1e-12))
        _write_json(args, "reproduce_spectral.json", {
            "seed": seed, "beta0": sd.beta0, "u": sd.u, "v": sd.v, "gap": sd.gap,
            "pass": bool(ok),
        })
        print(f"spectral exactness: {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "survival":
        reps = args.replicas or 10_000
        model = barebones(1, 3, 0.6, "invasion", N=args.N or 10_000)
        rows = []
        ok = True
        for k, z0 in enumerate((1, 2)):
            _, _, _, _, survived, _ = lab.escape_batch(
                model, [z0], RngStream(seed, k * 1_000_000), reps)
            p = float(np.mean(survived))
            target = 1 - 0.2 ** z0
            se = math.sqrt(target * (1 - target) / reps)
            rows.append({"Z0": z0, "estimate": p, "target": target, "se": se})
            ok = ok and abs(p - target) <= 3 * se
        _write_json(args, "reproduce_survival.json",
                    {"seed": seed, "replicas": reps, "rows": rows, "pass": ok})
        for r in rows:
            print(f"Z0={r['Z0']}: {r['estimate']:.4f} vs {r['target']:.4f} "
                  f"(3SE = {3 * r['se']:.4f})")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "coupling-fidelity":
        reps = args.replicas or 5000
        model = barebones(1, 3, 0.6, "invasion")
        pts = cp.divergence_curve(model, [1000, 10_000, 100_000, 1_000_000],
                                  5 / 12, reps, rng)
        cp.divergence_curve_csv(pts, os.path.join(_outdir(args), "reproduce_divergence.csv"))
        dec = all(pts[i].ci_low > pts[i + 1].ci_high for i in range(len(pts) - 1))
        _write_json(args, "reproduce_coupling.json", {
            "seed": seed, "replicas": reps,
            "points": [p.__dict__ for p in pts], "strictly_decreasing": dec,
        })
        for p in pts:
            print(f"N={p.N}: {p.fraction:.4f} [{p.ci_low:.4f}, {p.ci_high:.4f}]")
        print(f"strictly decreasing: {dec}")
        return EXIT_OK if dec else EXIT_FAILURE

    if name == "tv-breakdown":
        reps = args.replicas or 10_000
        N = args.N or 10_000
        m_big = int(N ** (2 / 3))
        m_small = int(N ** 0.25)
        big = cp.tv_lower_from_lr(cp.logistic_lr(N, m_big, rng, replicas=reps))
        small = cp.tv_lower_from_lr(
            cp.logistic_lr(N, m_small, RngStream(seed, 1), replicas=reps))
        var = float(np.var(cp.lr_exponent_samples(N, m_big, RngStream(seed, 2), reps),
                           ddof=1))
        target_var = (m_big / N ** (2 / 3)) ** 3 / 3
        ok = (big.value > 0.05 and big.stderr < 0.01
              and abs(var - target_var) < 0.1 * target_var
              and small.value < 0.02)
        _write_json(args, "reproduce_tv.json", {
            "seed": seed, "N": N, "replicas": reps,
            "tv_at_m23": big.value, "stderr_at_m23": big.stderr,
            "tv_at_m14": small.value, "exponent_variance": var,
            "target_variance": target_var, "pass": ok,
        })
        print(f"TV at m=N^(2/3): {big.value:.4f} (+-{big.stderr:.4f}); "
              f"at m=N^(1/4): {small.value:.5f}; exponent variance {var:.4f} "
              f"vs {target_var:.4f} -> {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "escape-delay":
        reps = args.replicas or 5000
        N = args.N or 1_000_000
        model = barebones(1, 3, 0.6, "invasion")
        res = lab.escape_delay_experiment(model, N, [1], reps, rng)
        lab.replica_csv(res.summaries,
                        os.path.join(_outdir(args), "reproduce_escape_replicas.csv"))
        ok = 0.9 <= res.fit.scale <= 1.1 and res.fit.ks_stat <= 0.03
        payload = _escape_summary(res)
        payload["pass"] = ok
        _write_json(args, "reproduce_escape.json", payload)
        print(f"delay fit scale {res.fit.scale:.4f}, KS {res.fit.ks_stat:.4f} "
              f"-> {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "escape-scaling":
        reps = args.replicas or 3000
        model = barebones(1, 3, 0.6, "invasion")
        means = []
        Ns = [10_000, 100_000, 1_000_000]
        for k, N in enumerate(Ns):
            _, _, tau, _, survived, _ = lab.escape_batch(
                model.with_scale(N), [1], RngStream(seed, k * 1_000_000), reps)
            means.append(float(np.mean(tau[survived])))
        slope = float(np.polyfit(np.log(Ns), means, 1)[0])
        target = (7 / 12) / 2.4
        ok = abs(slope - target) <= 0.1 * target
        _write_json(args, "reproduce_escape_scaling.json", {
            "seed": seed, "replicas": reps, "N": Ns, "means": means,
            "slope": slope, "target": target, "pass": ok,
        })
        print(f"slope {slope:.4f} vs {target:.4f} -> {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "extinction-gumbel":
        reps = args.replicas or 5000
        res = lab.extinction_experiment(br.birth_death_spec(1.0, 1.8),
                                        args.N or 100_000, reps, rng)
        ok = (res.exact_cdf_distance <= 0.02
              and res.ks_standard_gumbel.statistic <= 0.03)
        payload = _extinction_summary(res)
        payload["pass"] = ok
        _write_json(args, "reproduce_extinction.json", payload)
        print(f"exact-law distance {res.exact_cdf_distance:.4f}, "
              f"KS {res.ks_standard_gumbel.statistic:.4f} -> {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "path-closeness":
        reps = args.replicas or 400
        model = barebones(1, 3, 0.6, "invasion")
        pts = lab.path_closeness_experiment(model, [10_000, 100_000, 1_000_000],
                                            reps, rng)
        slope = lab.log_slope([p.N for p in pts], [p.median for p in pts])
        dec = pts[0].median_ci[0] > pts[-1].median_ci[1]
        ok = dec and slope < -0.05
        _write_json(args, "reproduce_closeness.json", {
            "seed": seed, "replicas": reps,
            "points": [{"N": p.N, "median": p.median, "ci": list(p.median_ci)}
                       for p in pts],
            "slope": slope, "pass": ok,
        })
        print(f"medians {[round(p.median, 5) for p in pts]}, slope {slope:.3f} "
              f"-> {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "infrastructure":
        model = barebones(1, 3, 0.6, "invasion", N=args.N or 10_000)
        reps = args.replicas or 10_000
        from ._compile import compile_model
        from . import _kernels as Kk

        cm = compile_model(model)
        X0 = np.array([float(model.N), 1.0])
        grid = np.array([1.0])
        states = np.empty((reps, 1, 2))
        intf = np.empty((reps, 1, 2))
        term = np.empty(reps, np.int64)
        nev = np.empty(reps, np.int64)
        Kk.batch_grid(seed, 0, reps, cm.jumps, cm.mstart, cm.mcoeff, cm.mfac,
                      cm.s_idx, cm.gbar0, cm.d1, 1.0 / cm.N, cm.x0, np.inf,
                      X0, grid, 1, 10**8, states, intf, term, nev)
        m = states[:, 0, :] / model.N - X0 / model.N - intf[:, 0, :]
        se = m.std(axis=0, ddof=1) / math.sqrt(reps)
        ok = bool(np.all(np.abs(m.mean(axis=0)) <= 4 * se))
        xi0 = np.array([0.01])
        from .flow import integrate_field
        tol = 1e-9
        ltraj = integrate_field(lambda y: y * (1 - y), xi0, 5.0, tol)
        err = abs(ltraj.states[-1, 0] - 1 / (1 + 99 * math.exp(-5)))
        resid = voc_residual(model, integrate(model, np.array([1.0, 1e-4]), 2.0),
                             np.linspace(0.2, 2.0, 5))
        ok = ok and err <= tol and float(resid.max()) <= 1e-6
        _write_json(args, "reproduce_infrastructure.json", {
            "seed": seed, "fluctuation_mean": m.mean(axis=0), "se": se,
            "logistic_error": err, "max_voc_residual": float(resid.max()),
            "pass": ok,
        })
        print(f"fluctuation mean {m.mean(axis=0)}, logistic error {err:.2e}, "
              f"integral residual {resid.max():.2e} -> {'PASS' if ok else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    if name == "w-shape":
        reps = args.replicas or 100_000
        spec = br.birth_death_spec(3.0, 0.6)
        rows = []
        ok = True
        for k, z0 in enumerate((1, 2, 3)):
            W = lab.w_samples(spec, [z0], reps, RngStream(seed, k * 1_000_000))
            pos = W[W > 1e-6]
            fit = None
            from .stats import fit_gamma

            fit = fit_gamma(pos)
            within = abs(fit.shape - z0) <= 0.1 * z0
            ok = ok and within
            rows.append({"Z0": z0, "shape": fit.shape, "scale": fit.scale,
                         "scale_candidates": [1.0, 3.0 / 2.4], "within_10pct": within})
        _write_json(args, "reproduce_w_shape.json",
                    {"seed": seed, "replicas": reps, "rows": rows, "pass": ok})
        for r in rows:
            print(f"Z0={r['Z0']}: shape {r['shape']:.3f}, scale {r['scale']:.3f} "
                  f"-> {'PASS' if r['within_10pct'] else 'FAIL'}")
        return EXIT_OK if ok else EXIT_FAILURE

    raise ModelError(f"unknown experiment {name!r}")


if __name__ == "__main__":
    sys.exit(main())
