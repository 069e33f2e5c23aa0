"""Command line: ``sdgrav {evolve,verify,metric} --config run.cfg``.

Exit codes: 0 when every check passes, 1 when a check or run monitor fails,
2 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import fixtures as fx
from . import verify as vf
from .calculus import Grid3
from .config import ConfigError, RunConfig, load_config, parse_config
from .flow import FilterSpec, GrowthBudgetExceeded, evolve, evolve_with_monitor
from .hamiltonians import CollarSpec, CollarViolation, all_density_ids
from .io import SnapshotError, read_snapshot, write_csv, write_snapshot
from .metric import ricci_convergence, ricci_report, signature_census, determinant_field
from .state import DegenerateState, FieldState

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def _density_table():
    table = {d.label.lower(): d for d in all_density_ids() + vf.conserved_ids()}
    return table


def parse_densities(spec: str):
    table = _density_table()
    out = []
    for name in (p.strip() for p in spec.split(",")):
        if not name:
            continue
        d = table.get(name.lower())
        if d is None:
            raise UsageError(f"unknown density {name!r}; known: {', '.join(sorted(table))}")
        out.append(d)
    if not out:
        raise UsageError("no densities given")
    return out


def resolve_state(cfg: RunConfig) -> tuple[str, FieldState]:
    st = cfg["state"]
    if st["snapshot"]:
        try:
            return "snapshot", read_snapshot(st["snapshot"], st["delta_a"])
        except (OSError, SnapshotError) as exc:
            raise UsageError(f"cannot load snapshot: {exc}") from None
    name = st["fixture"]
    try:
        s = fx.by_name(name, cfg.grid, st["seed"])
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    return name.upper(), s


def exact_solution(name: str, s0: FieldState, t: float) -> FieldState | None:
    """Closed form at time t for fixtures that have one."""
    g = s0.grid
    if name == "WAVE_F":
        return fx.wave_fluct(g, t)
    if name in ("QS", "QSM", "WAVE"):
        return s0.replace(t=t)
    return None


def _out_dir(cfg: RunConfig) -> Path:
    return Path(cfg["output"]["dir"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_evolve(cfg: RunConfig) -> int:
    name, s0 = resolve_state(cfg)
    ev = cfg["evolve"]
    dens = parse_densities(ev["densities"])
    collar = CollarSpec(ev["collar_width"], ev["collar_tol"]) if ev["collar_width"] > 0 else None
    filt = FilterSpec(ev["filter_strength"], ev["filter_order"], ev["filter_cutoff"]) if ev["filter"] else None
    out = _out_dir(cfg)
    tol = cfg.tolerances
    try:
        traj, rep = evolve_with_monitor(s0, ev["t"], ev["dt"], dens, filt, collar, ev["budget"])
    except (GrowthBudgetExceeded, DegenerateState, CollarViolation) as exc:
        msg = f"{type(exc).__name__}: {exc}"
        write_csv(out / "evolve_summary.csv", ["key", "value"], [["status", "failed"], ["error", msg]])
        print(msg, file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    every = ev["snapshot_every"]
    for n, st in enumerate(traj.states):
        if (every and n % every == 0) or n == len(traj.states) - 1:
            write_snapshot(out / f"snap_{n:05d}.cmaf", st)
    write_csv(out / "conservation.csv", ["step", "t", "density", "relative_functional", "drift"], rep.rows())
    growth = [[n + 1, traj.states[n + 1].t, g, traj.collar_monitor[n + 1] if collar else ""]
              for n, g in enumerate(traj.growth)]
    write_csv(out / "growth.csv", ["step", "t", "high_band_ratio", "collar_max"], growth)

    failures = []
    summary = [["fixture", name], ["steps", len(traj.states) - 1], ["t_final", traj.states[-1].t]]
    final = traj.states[-1]
    exact = exact_solution(name, s0, final.t)
    if exact is not None:
        err = float(max(np.max(np.abs(final.u_fluct - exact.u_fluct)), np.max(np.abs(final.v_fluct - exact.v_fluct))))
        summary.append(["final_error_vs_exact", err])
        if err > tol["exact"]:
            failures.append(f"final error vs exact {err:.3e} > {tol['exact']:g}")
    if collar is not None:
        for d in dens:
            drift = rep.drift(d.label)
            summary.append([f"drift[{d.label}]", drift])
            if drift > tol["conservation"]:
                failures.append(f"drift of {d.label} {drift:.3e} > {tol['conservation']:g}")
    summary.append(["status", "failed" if failures else "ok"])
    write_csv(out / "evolve_summary.csv", ["key", "value"], summary)
    for f in failures:
        print(f, file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


def cmd_verify(cfg: RunConfig, suite: str) -> int:
    if suite not in vf.SUITES:
        raise UsageError(f"unknown suite {suite!r}; choose from {', '.join(vf.SUITES)}")
    v = cfg["verify"]
    rows = vf.run_suite(suite, cfg.grid, seed=cfg["state"]["seed"], n=v["samples"], tol=cfg.tolerances,
                        corrupt=v["corrupt_psi"], fd_grid=Grid3.cube(v["fd_n"]))
    write_csv(_out_dir(cfg) / f"verify_{suite}.csv", ["check", "fixture", "residual", "tolerance", "pass"],
              (r.csv() for r in rows))
    bad = [r for r in rows if not r.passed]
    for r in bad:
        print(f"FAIL {r.check} [{r.fixture}] residual {r.residual:.3e} > {r.tol:g}", file=sys.stderr)
    return EXIT_FAIL if bad else EXIT_OK


def cmd_metric(cfg: RunConfig) -> int:
    name, s0 = resolve_state(cfg)
    m = cfg["metric"]
    tol = cfg.tolerances
    rows, failures = [], []
    expected = "++++" if s0.epsilon == 1 else "++--"
    census = signature_census(s0)
    det_err = float(np.max(np.abs(determinant_field(s0) - 1 / 256)))
    rows.append(["det_max_error", "", det_err, tol["det"], int(det_err <= tol["det"])])
    if det_err > tol["det"]:
        failures.append(f"det error {det_err:.3e}")
    for pattern, frac in census.items():
        ok = pattern == expected and frac == 1.0
        rows.append([f"signature[{pattern}]", "", frac, "", int(ok)])
        if not ok:
            failures.append(f"signature {pattern} at {frac:.3%} of nodes (expected {expected} everywhere)")
    spacings = [int(k) for k in m["spacings"].split(",") if k.strip()]
    if exact_solution(name, s0, 0.0) is not None and name != "WAVE_F":
        stack = [s0.replace(t=s0.t + j * m["dt"]) for j in range(5)]
        rep = ricci_report(stack, m["node_stride"])
        ok = rep.max_ricci <= tol["ricci"]
        rows.append(["ricci_max", m["dt"], rep.max_ricci, tol["ricci"], int(ok)])
        if not ok:
            failures.append(f"Ricci {rep.max_ricci:.3e} on a closed-form stack")
    else:
        try:
            traj = evolve(s0, m["t"], m["dt"])
        except (GrowthBudgetExceeded, DegenerateState) as exc:
            print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_FAIL
        table = ricci_convergence(traj.states, m["dt"], spacings, m["node_stride"])
        prev = None
        for dt, r in table:
            rows.append(["ricci_max", dt, r, "", ""])
            if prev is not None:
                factor = prev / r if r > 0 else float("inf")
                ok = factor >= tol["ricci_factor"]
                rows.append(["convergence_factor", dt, factor, tol["ricci_factor"], int(ok)])
                if not ok:
                    failures.append(f"Ricci convergence factor {factor:.2f} at dt={dt:g}")
            prev = r
    write_csv(_out_dir(cfg) / "metric.csv", ["quantity", "dt", "value", "tolerance", "pass"], rows)
    for f in failures:
        print(f, file=sys.stderr)
    return EXIT_FAIL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sdgrav", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("evolve", "verify", "metric"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH", help="sectioned key = value run file")
        sp.add_argument("--fixture", metavar="NAME", help=f"one of {', '.join(fx.FIXTURES)}")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--dt", type=float, metavar="F")
        sp.add_argument("--T", type=float, metavar="F", dest="T")
        if name == "verify":
            sp.add_argument("--suite", required=True, choices=vf.SUITES)
    return p


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else parse_config("", "<no config>")
    cfg.override("state", "fixture", args.fixture)
    cfg.override("state", "seed", args.seed)
    cfg.override("output", "dir", args.out)
    section = "metric" if args.command == "metric" else "evolve"
    cfg.override(section, "dt", args.dt)
    cfg.override(section, "t", args.T)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "evolve":
            return cmd_evolve(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        return cmd_metric(cfg)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
