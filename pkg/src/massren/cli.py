"""Command-line front end.

Exit codes: 0 ok, 2 configuration error, 3 numerical tolerance failure,
4 admissibility failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ModelConfig, load_config, load_pulse
from .io import dumps, manifest_path, write_csv, write_json

EXIT_OK, EXIT_CONFIG, EXIT_TOL, EXIT_ADMISSIBILITY = 0, 2, 3, 4


class ToleranceFailure(RuntimeError):
    pass


class AdmissibilityFailure(RuntimeError):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(f"bad number list {text!r}") from exc
    if not vals:
        raise ConfigError("empty number list")
    return vals


def _config(args) -> ModelConfig:
    cfg = load_config(args.config) if args.config else ModelConfig()
    over = {}
    for key in ("dim", "alpha", "charge", "omega0", "mass", "eta"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    if over:
        try:
            cfg = dataclasses.replace(cfg, **over)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


def _file_sets(path, key: str) -> bool:
    if not path:
        return False
    return re.search(rf"^\s*{key}\s*[=:]", Path(path).read_text(), re.M | re.I) is not None


def _spectrum(cfg: ModelConfig, jmax: int):
    from .atom import solve_spectrum
    pot = cfg.potential_spec()
    if pot.kind == "harmonic":
        return solve_spectrum(pot, jmax)
    return solve_spectrum(pot, jmax, method="grid", grid_n=max(cfg.grid_n, 96),
                          grid_L=cfg.grid_L or 8.0, fd_order=8, conv_tol=1e-5)


# ------------------------------------------------------------- commands

def cmd_eig(args, cfg):
    spec = _spectrum(cfg, args.jmax)
    out = {"energies": spec.energies, "p_abs2": [spec.p_abs2(j) for j in range(spec.J_max)],
           "p2": spec.p2, "sum_rule_deficit": [spec.sum_rule_deficit(j) for j in range(spec.J_max)]}
    write_json(args.out, out)
    return [args.out]


def _shift_record(spec, cfg, j, alpha, eps_mode):
    from .rspt import (cancellation_report, renorm_shift_d2, renorm_shift_d2_closed,
                       renorm_shift_d3)
    ctx = cfg.kernel_context(alpha)
    if cfg.dim == 2:
        sh = renorm_shift_d2(spec, ctx, j, cfg.charge, eps_mode=eps_mode)
        extra = {"alpha_free": renorm_shift_d2_closed(spec, ctx.K_scale, j, cfg.charge)}
    else:
        sh = renorm_shift_d3(spec, alpha, j, cfg.charge, eps_mode=eps_mode)
        extra = {"dE_dlnalpha": sh.dE_dlnalpha}
    row = cancellation_report(spec, cfg.dim, j, [alpha], cfg.charge, ctx)[0]
    rec = sh.to_dict()
    rec["pieces"] = {"raw": row["raw"], "subtraction": row["subtraction"],
                     "counterterm": row["counterterm"],
                     "divergent_residual": row["divergent_residual"], **extra}
    return rec


def cmd_shift(args, cfg):
    spec = _spectrum(cfg, args.jmax)
    if not 0 <= args.level < spec.J_max:
        raise ConfigError(f"level {args.level} outside 0..{spec.J_max - 1}")
    if args.alpha_scan:
        alphas = _floats(args.alpha_scan)
    elif args.alpha is not None or _file_sets(args.config, "alpha") or cfg.dim == 2:
        alphas = [cfg.alpha]
    else:
        # d=3 stays log-sensitive to alpha: default to the inverse squared Compton length
        alphas = [cfg.mass**2]
    recs = [_shift_record(spec, cfg, args.level, al, args.eps_mode) for al in alphas]
    if args.check:
        other = "extrapolate" if args.eps_mode == "pole" else "pole"
        for rec, al in zip(recs, alphas):
            alt = _shift_record(spec, cfg, args.level, al, other)
            diff = abs(complex(rec["re"], rec["im"]) - complex(alt["re"], alt["im"]))
            scale = max(abs(complex(rec["re"], rec["im"])), 1e-300)
            rec["dual_oracle_rel_diff"] = diff / scale
    write_json(args.out, recs[0] if len(recs) == 1 else recs)
    if args.check and any(r["dual_oracle_rel_diff"] > 1e-7 for r in recs):
        raise ToleranceFailure("pole and eps-extrapolated shifts disagree beyond 1e-7")
    if args.level == 0 and any(abs(r["im"]) > 1e-10 for r in recs):
        raise ToleranceFailure("ground level acquired an imaginary part")
    return [args.out]


def cmd_rr_scan(args, cfg):
    from .meanfield import demo_trajectory
    from .rrforce import divergence_scan
    alphas = _floats(args.alphas)
    traj, t_eval = demo_trajectory(cfg)
    fit = divergence_scan(cfg.kernel_context(), traj, cfg.dim, alphas, t_eval, method=args.method)
    x = np.sqrt(fit.alphas) if cfg.dim == 3 else np.log(fit.alphas)
    write_csv(args.out, ["alpha", "law_variable", "force_projection", "fitted"],
              zip(fit.alphas, x, fit.projected, fit.fitted))
    summary = {"law": fit.law, "coefficient": fit.coefficient, "expected": fit.expected,
               "rel_error": fit.rel_error, "one_minus_r2": fit.residual}
    print(dumps(summary), end="")
    if fit.rel_error > 0.01:
        raise ToleranceFailure(f"fitted coefficient off by {fit.rel_error:.3%}")
    return [args.out]


def cmd_ledger(args, cfg):
    from .renorm import MassLedger, sign_flip_alpha
    alphas = _floats(args.alphas) if args.alphas else list(np.geomspace(1e2, 1e8, 7))
    a0 = cfg.kernel_context().alpha0
    rows = []
    for al in alphas:
        r = MassLedger(cfg.dim, cfg.mass, cfg.charge, al, a0, L=args.L).row()
        rows.append([r["alpha"], r["m_bare"], r["counterterm_q2"], r["counterterm_L"],
                     r["formal_series"], r["discarded_constant"]])
    write_csv(args.out, ["alpha", "m_bare", "counterterm_q2", "counterterm_L", "formal_series",
                         "discarded_constant"], rows)
    if cfg.charge != 0:
        root, closed = sign_flip_alpha(cfg.dim, cfg.mass, cfg.charge, a0)
        print(dumps({"sign_flip_alpha": root, "closed_form": closed}), end="")
    return [args.out]


def _kernel_signal(cfg, kind):
    from .memconv import SampledSignal
    from .rrforce import Trajectory
    w0 = cfg.omega0
    dt = 2 * math.pi / w0 / 400
    if kind == "harmonic":
        T_sw = 20.0 / w0
        traj = Trajectory.harmonic([1e-3], w0, cfg.charge or 1.0, t_start=-30 * T_sw, t_end=0.0,
                                   dt=dt, T_sw=T_sw, t_on=-12 * T_sw)
        f = (traj.q * traj.deriv_at(2, traj.t)[:, 0])[::-1]
    elif kind == "constant":
        f = np.ones(20000)
    elif kind == "slow-tail":
        # tau^{-1/2} e^{-a tau}: transform ~ Omega^{-1/2} at high Omega
        dt = 2 * math.pi / w0 / 4000
        a = w0 / 5
        tau = dt * np.arange(int(40 / a / dt) + 1)
        f = np.exp(-a * tau) / np.sqrt(np.maximum(tau, dt))
        f[0] = 2.0 / math.sqrt(dt)
    else:
        raise ConfigError(f"unknown signal {kind!r}")
    return SampledSignal(f, dt)


def cmd_kernel_check(args, cfg):
    from .memconv import admissibility_check
    outs = []
    if args.table:
        from .kernels import kernel_table
        rows = kernel_table(_floats(args.table_alphas), np.linspace(0, 3, 31), which=args.table,
                            m=cfg.mass, eta=cfg.eta)
        path = Path(str(args.out) + f".{args.table}.csv")
        write_csv(path, ["alpha", "s", "value"], rows)
        outs.append(path)
    sig = _kernel_signal(cfg, args.signal)
    rep = admissibility_check(sig, omega_ref=cfg.omega0)
    write_json(args.out, {"signal": args.signal, **rep})
    outs.insert(0, args.out)
    failed = [k for k, v in rep.items() if not v["pass"]]
    if failed:
        raise AdmissibilityFailure("inadmissible signal: " + ", ".join(failed))
    return outs


def cmd_propagate(args, cfg):
    from .meanfield import (PulseSpec, default_k_grid, naive_breakdown_demo, propagate,
                            reconstruct_modes)
    if args.pulse:
        pc = load_pulse(args.pulse, cfg.dim)
        pulse = PulseSpec(pc.amplitude, pc.center, pc.width, pc.omega, pc.polarization, pc.phase)
    else:
        pulse = PulseSpec.off(cfg.dim)
    res = propagate(cfg, pulse, args.T, args.dt, mode=args.mode)
    prefix = args.out_prefix
    d = cfg.dim
    hdr = ["t"] + [f"v{i}" for i in range(d)] + [f"x{i}" for i in range(d)] + ["norm"]
    rows = (np.concatenate([[t], v, x, [n]]) for t, v, x, n in zip(res.t, res.v, res.x_mean, res.norm))
    outs = [write_csv(Path(f"{prefix}_trajectory.csv"), hdr, rows)]
    modes = reconstruct_modes(cfg, res.t, res.v, res.charge, default_k_grid(cfg, n_k=24, n_dir=8))
    outs.append(write_json(Path(f"{prefix}_modes.json"), modes.to_dict()))
    if args.demo:
        rep = naive_breakdown_demo(cfg, _floats(args.alphas))
        outs.append(_write_breakdown(Path(f"{prefix}_breakdown.csv"), rep))
    return outs


def _write_breakdown(path, rep):
    return write_csv(path, ["alpha", "delta_m", "coeff_naive", "coeff_renorm", "A_RR"],
                     ([r["alpha"], r["delta_m"], r["coeff_naive"], r["coeff_renorm"], r["A_RR"]]
                      for r in rep.rows()))


def cmd_demo_naive(args, cfg):
    from .meanfield import naive_breakdown_demo
    rep = naive_breakdown_demo(cfg, _floats(args.alphas))
    _write_breakdown(args.out, rep)
    summary = {"law": rep.law, "fitted_slope": rep.fitted_slope, "expected_slope": rep.expected_slope,
               "slope_rel_error": rep.slope_rel_error, "renorm_max_dev": rep.renorm_max_dev(cfg.mass)}
    print(dumps(summary), end="")
    if cfg.charge != 0 and (rep.slope_rel_error > 0.01 or rep.renorm_max_dev(cfg.mass) > 0.01):
        raise ToleranceFailure("breakdown demo outside 1% tolerance")
    return [args.out]


COMMANDS = {"eig": cmd_eig, "shift": cmd_shift, "rr-scan": cmd_rr_scan, "ledger": cmd_ledger,
            "kernel-check": cmd_kernel_check, "propagate": cmd_propagate, "demo-naive": cmd_demo_naive}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="massren", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--dim", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--charge", type=float)
    common.add_argument("--omega0", type=float)
    common.add_argument("--mass", type=float)
    common.add_argument("--eta", type=float)
    common.add_argument("--seed", type=int, default=None, help="recorded in the manifest")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("eig", parents=[common], help="atomic spectrum and momentum matrix")
    s.add_argument("--jmax", type=int, default=6)
    s.add_argument("--out", default="eig.json")

    s = sub.add_parser("shift", parents=[common], help="renormalized second-order level shift")
    s.add_argument("--level", type=int, default=0)
    s.add_argument("--alpha-scan")
    s.add_argument("--jmax", type=int, default=10)
    s.add_argument("--eps-mode", choices=["pole", "extrapolate"], default="pole")
    s.add_argument("--check", action="store_true", help="cross-check against the other eps mode")
    s.add_argument("--out", default="shift.json")

    s = sub.add_parser("rr-scan", parents=[common], help="RR force divergence law fit")
    s.add_argument("--alphas", default="1e3 3e3 1e4 3e4 1e5 3e5 1e6")
    s.add_argument("--method", default="kernel", choices=["kernel", "nested", "raw"])
    s.add_argument("--out", default="rr_scan.csv")

    s = sub.add_parser("ledger", parents=[common], help="bare mass and counterterm table")
    s.add_argument("--alphas")
    s.add_argument("--L", type=int, default=1)
    s.add_argument("--out", default="ledger.csv")

    s = sub.add_parser("kernel-check", parents=[common], help="memory-kernel admissibility report")
    s.add_argument("--signal", default="harmonic", choices=["harmonic", "constant", "slow-tail"])
    s.add_argument("--table", choices=["rho", "xi", "f"])
    s.add_argument("--table-alphas", default="1 10 1000")
    s.add_argument("--out", default="kernel_check.json")

    s = sub.add_parser("propagate", parents=[common], help="renormalized mean-field propagation")
    s.add_argument("--pulse")
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--dt", type=float, required=True)
    s.add_argument("--mode", choices=["comoving", "spectral"], default="comoving")
    s.add_argument("--demo", action="store_true", help="also write the breakdown table")
    s.add_argument("--alphas", default="1e3 1e4 1e5 1e6")
    s.add_argument("--out-prefix", default="run")

    s = sub.add_parser("demo-naive", parents=[common], help="naive vs renormalized mass coefficient")
    s.add_argument("--alphas", default="1e3 3e3 1e4 3e4 1e5 3e5 1e6")
    s.add_argument("--out", default="breakdown.csv")
    return p


def main(argv=None) -> int:
    from .memconv import InadmissibleSignal
    from .meanfield import PropagationError
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.time()
    try:
        cfg = _config(args)
        outputs = COMMANDS[args.command](args, cfg)
        code, error = EXIT_OK, None
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AdmissibilityFailure, InadmissibleSignal) as exc:
        print(f"admissibility failure: {exc}", file=sys.stderr)
        code, error, outputs = EXIT_ADMISSIBILITY, str(exc), _declared_outputs(args)
    except (ToleranceFailure, PropagationError) as exc:
        print(f"tolerance failure: {exc}", file=sys.stderr)
        code, error, outputs = EXIT_TOL, str(exc), _declared_outputs(args)
    manifest = {
        "command": args.command,
        "argv": list(sys.argv[1:] if argv is None else argv),
        "config": dataclasses.asdict(cfg),
        "config_hash": cfg.digest(),
        "code_version": __version__,
        "seed": args.seed if args.seed is not None else cfg.seed,
        "outputs": [str(o) for o in outputs],
        "exit_code": code,
        "error": error,
        "wall_time_s": time.time() - t0,
    }
    anchor = outputs[0] if outputs else Path(getattr(args, "out", None) or f"{args.out_prefix}_trajectory.csv")
    write_json(manifest_path(anchor), manifest)
    return code


def _declared_outputs(args) -> list:
    out = getattr(args, "out", None)
    return [out] if out and Path(out).exists() else []


if __name__ == "__main__":
    sys.exit(main())
