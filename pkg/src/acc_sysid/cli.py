"""Command-line front end: ``acc-sysid {simulate,estimate,stability,observability}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error. Failures
print one JSON object on a single stderr line (see ``schemas.ERROR_LINE``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as config_mod
from .config import DEFAULTS
from .errors import AccSysidError
from .experiment import METHODS, average_summaries, estimate, monte_carlo
from .lsq import LsConfig
from .model import CthpParams, PlatoonState
from .observability import classify_observability
from .simulator import STEP, LeaderProfile, SimConfig, leader_series, pe_profile, simulate_platoon
from .stability import stability_report
from .trajectory import CsvSchema, load_segments, write_csv
from .ukf import GaussianBelief, NoiseConfig, UtConfig

log = logging.getLogger("acc_sysid")

PROFILES = ("constant", "pe", "step")


class UsageError(AccSysidError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(count=None):
    def parse(text):
        try:
            vals = [float(x) for x in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
        if count is not None and len(vals) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated values, got {len(vals)}")
        if not all(np.isfinite(vals)):
            raise argparse.ArgumentTypeError("values must be finite")
        return vals
    parse.__name__ = f"{count or 'n'} floats"
    return parse


def _d(table, key):
    val = DEFAULTS[table][key]
    if isinstance(val, list):
        return ",".join(f"{x:g}" for x in val)
    return "derived" if val is None else val


# (table, key) <- argparse dest; used to layer flags over the config file
SIM_FLAGS = {
    ("simulation", "params"): "params",
    ("simulation", "profile"): "profile",
    ("simulation", "base_speed"): "base_speed",
    ("simulation", "step_time"): "step_time",
    ("simulation", "step_size"): "step_size",
    ("simulation", "duration"): "duration",
    ("simulation", "dt"): "dt",
    ("simulation", "seed"): "seed",
    ("simulation", "initial"): "initial",
    ("simulation", "process_std"): "process_std",
    ("simulation", "measurement_std"): "meas_std",
}

EST_FLAGS = {
    ("ukf", "a"): "a",
    ("ukf", "b"): "b",
    ("ukf", "eps"): "eps",
    ("ukf", "redraw"): "redraw",
    ("ukf", "x0"): "x0",
    ("ukf", "p0"): "p0",
    ("noise", "q"): "q",
    ("noise", "r"): "r",
    ("ls", "sigma"): "sigma",
    ("ls", "mu"): "mu",
    ("ls", "x0"): "ls_x0",
    ("ls", "p0"): "ls_p0",
    ("ls", "init"): "rls_init",
    ("ls", "warmup_rows"): "warmup_rows",
    ("schema", "time"): "col_time",
    ("schema", "u"): "col_u",
    ("schema", "v"): "col_v",
    ("schema", "gap"): "col_gap",
    ("schema", "leader_pos"): "col_pl",
    ("schema", "follower_pos"): "col_pf",
    ("schema", "lead_length"): "lead_length",
    ("schema", "engaged"): "col_engaged",
    ("schema", "dt_target"): "dt_target",
    **SIM_FLAGS,
}


def _resolve(args, flags) -> dict:
    cfg = config_mod.load_config(args.config) if args.config else config_mod.default_config()
    overrides = {}
    for (table, key), dest in flags.items():
        val = getattr(args, dest, None)
        if val is not None:
            overrides.setdefault(table, {})[key] = val
    return config_mod.merge(cfg, overrides)


def _add_config(p):
    p.add_argument("--config", metavar="FILE", help="TOML run configuration; flags override its values")


def _add_format(p):
    p.add_argument("--format", choices=("text", "json"), default="text", help="stdout format (default text)")


def _add_sim_flags(p):
    g = p.add_argument_group("simulation")
    g.add_argument("--params", type=_floats(3), metavar="A,B,TAU",
                   help=f"true alpha [1/s^2], beta [1/s], tau [s] (default {_d('simulation', 'params')})")
    g.add_argument("--profile", choices=PROFILES,
                   help=f"leader speed profile (default {_d('simulation', 'profile')})")
    g.add_argument("--base-speed", type=float, metavar="MPS",
                   help=f"leader base speed [m/s] (default {_d('simulation', 'base_speed')})")
    g.add_argument("--step-time", type=float, metavar="S",
                   help=f"step profile switch time [s] (default {_d('simulation', 'step_time')})")
    g.add_argument("--step-size", type=float, metavar="MPS",
                   help=f"step profile speed change [m/s] (default {_d('simulation', 'step_size')})")
    g.add_argument("--duration", type=float, metavar="S",
                   help=f"simulated time [s] (default {_d('simulation', 'duration')})")
    g.add_argument("--dt", type=float, metavar="S",
                   help=f"sample period T [s] (default {_d('simulation', 'dt')})")
    g.add_argument("--seed", type=int, help=f"RNG seed (default {_d('simulation', 'seed')})")
    g.add_argument("--initial", type=_floats(2), metavar="P,V",
                   help=f"initial gap [m] and follower speed [m/s] (default {_d('simulation', 'initial')})")
    g.add_argument("--process-std", type=_floats(2), metavar="SP,SV",
                   help=f"process noise std on gap [m] and speed [m/s] per step "
                        f"(default {_d('simulation', 'process_std')})")
    g.add_argument("--meas-std", type=_floats(2), metavar="SP,SV",
                   help=f"measurement noise std on gap [m] and speed [m/s] "
                        f"(default {_d('simulation', 'measurement_std')})")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="acc-sysid", description="CTHP car-following identification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write clean and noisy synthetic trajectories")
    _add_config(p)
    _add_sim_flags(p)
    p.add_argument("--out", required=True, metavar="CSV",
                   help="output stem; writes <stem>_clean.csv and <stem>_noisy.csv (columns t [s], u [m/s], v [m/s], p [m])")

    p = sub.add_parser("estimate", help="identify (alpha, beta, tau) from a trajectory")
    _add_config(p)
    p.add_argument("--method", choices=METHODS, required=True,
                   help="ukf: joint sigma-point filter; ls-be/ls-re/ls-rexp: batch, recursive, "
                        "recursive with forgetting")
    p.add_argument("--in", dest="input", metavar="CSV", help="input trajectory CSV")
    p.add_argument("--trace-out", metavar="CSV", help="per-step estimate trace CSV")
    p.add_argument("--summary-out", metavar="JSON", help="also write the summary JSON here")
    p.add_argument("--format", choices=("text", "json"), default="json", help="stdout format (default json)")
    g = p.add_argument_group("input schema")
    g.add_argument("--col-time", help=f"time column [s] (default {_d('schema', 'time')})")
    g.add_argument("--col-u", help=f"leader speed column [m/s] (default {_d('schema', 'u')})")
    g.add_argument("--col-v", help=f"follower speed column [m/s] (default {_d('schema', 'v')})")
    g.add_argument("--col-gap", help=f"space gap column [m] (default {_d('schema', 'gap')})")
    g.add_argument("--col-pl", help="leader position column [m]; use with --col-pf and --lead-length")
    g.add_argument("--col-pf", help="follower position column [m]")
    g.add_argument("--lead-length", type=float, metavar="M", help="leader vehicle length [m]")
    g.add_argument("--col-engaged", help="nonzero while ACC is engaged; data is split at disengagements")
    g.add_argument("--dt-target", type=float, metavar="S",
                   help="resampling period [s] for non-uniform input (default 0.1)")
    g = p.add_argument_group("filter (ukf)")
    g.add_argument("--a", type=float, help=f"sigma-point spread in [1e-4, 1] (default {_d('ukf', 'a')})")
    g.add_argument("--b", type=float, help="secondary scaling (default 3 - n)")
    g.add_argument("--eps", type=float, help=f"prior-distribution constant (default {_d('ukf', 'eps')})")
    g.add_argument("--no-redraw", dest="redraw", action="store_const", const=False,
                   help="draw update sigma points from Q instead of the predicted covariance")
    g.add_argument("--x0", type=_floats(5), metavar="P,V,A,B,TAU",
                   help=f"initial mean: gap [m], speed [m/s], alpha, beta, tau (default {_d('ukf', 'x0')})")
    g.add_argument("--p0", type=_floats(5), metavar="D1,...,D5",
                   help=f"initial covariance diagonal, same units squared (default {_d('ukf', 'p0')})")
    g.add_argument("--q", type=_floats(5), metavar="D1,...,D5",
                   help=f"process covariance diagonal (default {_d('noise', 'q')})")
    g.add_argument("--r", type=_floats(2), metavar="RP,RV",
                   help=f"measurement covariance diagonal [m^2, (m/s)^2] (default {_d('noise', 'r')})")
    g = p.add_argument_group("least squares (ls-*)")
    g.add_argument("--sigma", type=float, help=f"ridge parameter (default {_d('ls', 'sigma')})")
    g.add_argument("--mu", type=float, help=f"forgetting factor for ls-rexp (default {_d('ls', 'mu')})")
    g.add_argument("--ls-x0", type=_floats(3), metavar="X1,X2,X3",
                   help=f"recursive prior coefficients (default {_d('ls', 'x0')})")
    g.add_argument("--ls-p0", type=float, help=f"recursive prior covariance scale (default {_d('ls', 'p0')})")
    g.add_argument("--rls-init", choices=("prior", "warmup"),
                   help=f"recursive initialization (default {_d('ls', 'init')})")
    g.add_argument("--warmup-rows", type=int,
                   help=f"rows fitted in batch for --rls-init warmup (default {_d('ls', 'warmup_rows')})")
    g = p.add_argument_group("synthetic repeats")
    g.add_argument("--synthetic", action="store_true",
                   help="simulate the input from the simulation settings instead of reading --in")
    g.add_argument("--repeat", type=int, default=1, help="number of seeds (seed, seed+1, ...) to average (default 1)")
    g.add_argument("--parallel", action="store_true", help="run repeats in worker processes")
    g.add_argument("--workers", type=int, help="worker processes for --parallel (default CPU count)")
    _add_sim_flags(p)

    p = sub.add_parser("stability", help="string-stability margins and verdicts")
    p.add_argument("--params", type=_floats(3), required=True, metavar="A,B,TAU",
                   help="alpha [1/s^2], beta [1/s], tau [s]")
    p.add_argument("--omega-min", type=float, default=1e-3, help="lowest grid frequency [rad/s] (default 1e-3)")
    p.add_argument("--omega-max", type=float, default=1e3, help="highest grid frequency [rad/s] (default 1e3)")
    p.add_argument("--omega-n", type=int, default=4096, help="log-spaced grid points (default 4096)")
    _add_format(p)

    p = sub.add_parser("observability", help="rank test of the two-step observability matrix")
    p.add_argument("--state", type=_floats(5), required=True, metavar="P,V,A,B,TAU",
                   help="gap [m], speed [m/s], alpha [1/s^2], beta [1/s], tau [s]")
    p.add_argument("--u", type=float, required=True, help="leader speed [m/s]")
    p.add_argument("--dt", type=float, default=0.1, help="sample period T [s] (default 0.1)")
    p.add_argument("--eq-tol", type=float, default=1e-6,
                   help="equilibrium tolerance on |u - v| [m/s] and |p - tau v| [m] (default 1e-6)")
    p.add_argument("--tol", type=float, help="singular-value rank threshold (default max(m,n) eps s_max)")
    _add_format(p)
    return parser


def _params(values, source) -> CthpParams:
    params = CthpParams.from_array(values)
    problems = params.validate_physical()
    if problems:
        raise UsageError(f"{source}: non-physical parameters ({', '.join(problems)})")
    return params


def _sim_config(sim: dict, source: str) -> tuple[SimConfig, LeaderProfile]:
    params = _params(sim["params"], source)
    kind = sim["profile"]
    if kind == "pe":
        profile = pe_profile(sim["base_speed"])
    elif kind == "step":
        profile = LeaderProfile(STEP, sim["base_speed"], steps=((sim["step_time"], sim["step_size"]),))
    elif kind == "constant":
        profile = LeaderProfile("constant", sim["base_speed"])
    else:
        raise UsageError(f"unknown profile {kind!r}; choose from {PROFILES}")
    cfg = SimConfig(params, float(sim["dt"]), float(sim["duration"]), PlatoonState(*sim["initial"]),
                    tuple(sim["process_std"]), tuple(sim["measurement_std"]), int(sim["seed"]))
    return cfg, profile


@dataclass(frozen=True)
class ConfiguredSource:
    """Seeded synthetic trajectory source for repeated estimation."""

    sim: SimConfig
    profile: LeaderProfile

    def simulate(self, seed: int):
        cfg = SimConfig(self.sim.params, self.sim.T, self.sim.duration, self.sim.initial,
                        self.sim.process_std, self.sim.measurement_std, seed)
        return simulate_platoon(cfg, leader_series(self.profile, cfg.duration, cfg.T))


def _stem_paths(out) -> tuple[Path, Path]:
    out = Path(out)
    stem = out.with_suffix("") if out.suffix.lower() == ".csv" else out
    return stem.with_name(stem.name + "_clean.csv"), stem.with_name(stem.name + "_noisy.csv")


def cmd_simulate(args) -> dict:
    cfg = _resolve(args, SIM_FLAGS)
    source = "--params" if args.params is not None else "[simulation] params"
    sim, profile = _sim_config(cfg["simulation"], source)
    clean, noisy = simulate_platoon(sim, leader_series(profile, sim.duration, sim.T))
    clean_path, noisy_path = _stem_paths(args.out)
    clean_path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(clean, clean_path)
    write_csv(noisy, noisy_path)
    return {"clean": str(clean_path), "noisy": str(noisy_path), "rows": len(clean), "seed": sim.seed}


def _estimator_kwargs(cfg: dict) -> dict:
    u, nz, ls = cfg["ukf"], cfg["noise"], cfg["ls"]
    return {
        "init": GaussianBelief(np.array(u["x0"], dtype=float), np.diag(np.array(u["p0"], dtype=float))),
        "noise": NoiseConfig(np.diag(nz["q"]), np.diag(nz["r"])),
        "ut": UtConfig(float(u["a"]), None if u["b"] is None else float(u["b"]), float(u["eps"])),
        "redraw": bool(u["redraw"]),
        "ls": LsConfig(float(ls["sigma"]), tuple(ls["x0"]), float(ls["p0"]), float(ls["mu"]),
                       ls["init"], int(ls["warmup_rows"])),
    }


def _schema(sc: dict) -> CsvSchema:
    positions = sc["leader_pos"] is not None or sc["follower_pos"] is not None
    return CsvSchema(sc["time"], sc["u"], sc["v"], None if positions else sc["gap"],
                     sc["leader_pos"], sc["follower_pos"], sc["lead_length"], sc["engaged"])


def _write_trace(result, traj, path):
    if hasattr(result, "coeffs"):
        result.to_csv(traj, path)
    else:
        result.to_csv(path)


def cmd_estimate(args) -> dict:
    cfg = _resolve(args, EST_FLAGS)
    kwargs = _estimator_kwargs(cfg)
    if args.repeat < 1:
        raise UsageError("--repeat must be >= 1")
    if args.synthetic:
        if args.input:
            raise UsageError("--in and --synthetic are mutually exclusive")
        source = "--params" if args.params is not None else "[simulation] params"
        sim, profile = _sim_config(cfg["simulation"], source)
        src = ConfiguredSource(sim, profile)
        if args.repeat == 1:
            _, traj = src.simulate(sim.seed)
            summary, result = estimate(traj, args.method, **kwargs)
            summary["seed"] = sim.seed
            if args.trace_out:
                _write_trace(result, traj, args.trace_out)
        else:
            seeds = range(sim.seed, sim.seed + args.repeat)
            runs = monte_carlo(src, seeds, args.method, args.parallel, args.workers, **kwargs)
            summary = average_summaries(runs)
            summary["runs"] = runs
        summary["source"] = "synthetic"
        return summary

    if not args.input:
        raise UsageError("--in is required unless --synthetic is given")
    if args.repeat != 1 or args.parallel:
        raise UsageError("--repeat and --parallel need --synthetic (file input is deterministic)")
    dt_target = cfg["schema"]["dt_target"]
    segments = load_segments(args.input, _schema(cfg["schema"]),
                             None if dt_target is None else float(dt_target))
    results = []
    for i, traj in enumerate(segments):
        summary, result = estimate(traj, args.method, **kwargs)
        summary.update(segment=i, t_start=float(traj.t[0]), t_end=float(traj.t[-1]))
        results.append((summary, result, traj))
    if args.trace_out:
        for summary, result, traj in results:
            path = Path(args.trace_out)
            if len(results) > 1:
                path = path.with_name(f"{path.stem}_seg{summary['segment']}{path.suffix}")
            _write_trace(result, traj, path)
    longest = max(results, key=lambda r: r[0]["n_samples"])[0]
    summary = {k: v for k, v in longest.items() if k not in ("segment", "t_start", "t_end")}
    if len(results) > 1:
        summary["segments"] = [r[0] for r in results]
    summary["source"] = str(args.input)
    return summary


def cmd_stability(args) -> dict:
    if not (0 < args.omega_min < args.omega_max and args.omega_n >= 2):
        raise UsageError("--omega-min/--omega-max/--omega-n: need 0 < min < max and n >= 2")
    params = CthpParams.from_array(args.params)
    grid = np.logspace(np.log10(args.omega_min), np.log10(args.omega_max), args.omega_n)
    rep = stability_report(params, grid)
    return {"alpha": params.alpha, "beta": params.beta, "tau": params.tau,
            **rep.to_dict(), "physical": params.is_physical}


def cmd_observability(args) -> dict:
    if not args.dt > 0:
        raise UsageError(f"--dt must be positive, got {args.dt}")
    rep = classify_observability(args.state, args.u, args.dt, eq_tol=args.eq_tol, tol=args.tol)
    return {"state": list(args.state), "u": args.u, "dt": args.dt, **rep.to_dict()}


def _yes(flag):
    return "YES" if flag else "NO"


def _text(command, out) -> str:
    if command == "stability":
        return "\n".join([
            f"alpha={out['alpha']:g} beta={out['beta']:g} tau={out['tau']:g}",
            f"L2   margin  {out['l2_margin']: .6g}  stable: {_yes(out['l2_stable'])}",
            f"Linf margin  {out['linf_margin']: .6g}  stable: {_yes(out['linf_stable'])}",
            f"beta^2 - 2 alpha  {out['beta_sq_minus_2alpha']: .6g}",
            f"peak |H(jw)| {out['peak_gain']:.6g} at w={out['peak_omega']:.4g} rad/s",
        ])
    if command == "observability":
        rows = "\n".join("  [" + " ".join(f"{x: .6g}" for x in row) + "]" for row in out["matrix"])
        basis = "\n".join("  [" + " ".join(f"{x: .6g}" for x in v) + "]" for v in out["null_basis"])
        return (f"O2 =\n{rows}\nrank {out['rank']}  nullity {out['nullity']}  regime {out['regime']}\n"
                f"kernel basis:\n{basis or '  (empty)'}")
    lines = [f"method {out['method']}  samples {out['n_samples']}",
             f"alpha {out['alpha']:.6g}  beta {out['beta']:.6g}  tau {out['tau']:.6g}",
             f"MAE gap {out['mae_gap_m']:.4g} m  MAE speed {out['mae_velocity_mps']:.4g} m/s",
             f"L2 stable {_yes(out['l2_stable'])}  Linf stable {_yes(out['linf_stable'])}"]
    return "\n".join(lines)


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "stability": cmd_stability,
    "observability": cmd_observability,
}


def _emit_error(exc, code) -> int:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    step = getattr(exc, "step", None)
    if step is not None:
        rec["step"] = int(step)
    sys.stderr.write(json.dumps(rec) + "\n")
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="warning: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        out = COMMANDS[args.command](args)
        if args.command == "estimate" and args.summary_out:
            Path(args.summary_out).write_text(json.dumps(out, indent=2) + "\n")
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        return _emit_error(exc, 1)
    except (ValueError, OSError, AccSysidError) as exc:
        return _emit_error(exc, 2)
    fmt = getattr(args, "format", "json")
    sys.stdout.write((json.dumps(out, indent=2) if fmt == "json" else _text(args.command, out)) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
