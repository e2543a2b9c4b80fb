"""Command line front end.

Subcommands:

* ``design <file>``          run the gain design and write gains + summary
* ``simulate <file>``        design, simulate, write CSVs and figures
* ``check <file>``           validation and observability tests only
* ``reproduce-fig1``         run the bundled reference experiment end to end
* ``sweep <dir>``            simulate every scenario in a directory

Exit codes: 0 success, 1 reference-threshold failure (reproduce-fig1),
2 input/validation error, 3 design infeasibility.  The output directory
can be forced with the ``CASCOBS_OUTDIR`` environment variable or the
``--outdir`` flag (flag wins).
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import engine, heat, runner
from .exceptions import (CascobsError, ConfigurationError, DesignError,
                         NumericalError, ScenarioError, UnsolvableError)
from .scenario import Scenario, load_scenario
from .engine import CSV_FMT

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_INPUT = 2
EXIT_DESIGN = 3

OUTDIR_ENV = "CASCOBS_OUTDIR"

#: reference benchmark: unstable heat plant mu = 4 behind a two-state sensor
REFERENCE_SYSTEM = {
    "mu": 4.0,
    "A1": [[0.0, -1.0], [1.0, 0.0]],
    "B1": [[1.0], [1.0]],
    "C1": [[1.0, 1.0]],
}
REFERENCE_F0 = [[-1.0], [-1.0]]
REFERENCE_MODAL_POLES = [-2.0]
#: reference gain values this benchmark is checked against
REFERENCE_L1 = 5.0978
REFERENCE_F1 = np.array([-1.5847, -3.9479])
GAIN_TOL = 1e-3
SPECTRUM_MODES = 200
FINAL_RATIO_LIMIT = 0.02
RATE_BAND = (0.8, 1.2)


def _resolve_outdir(args, sc: Scenario | None, fallback: str) -> str:
    if getattr(args, "outdir", None):
        out = args.outdir
    elif os.environ.get(OUTDIR_ENV):
        out = os.environ[OUTDIR_ENV]
    elif sc is not None and sc.outputs.get("directory"):
        out = sc.outputs["directory"]
    else:
        out = fallback
    os.makedirs(out, exist_ok=True)
    return out


def _write_gain_csv(dr: runner.DesignResult, outdir: str) -> None:
    path = os.path.join(outdir, "gains.csv")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("name,row,col,value\n")
        for name, m in dr.matrices.items():
            m = np.atleast_2d(np.asarray(m, dtype=float))
            for i in range(m.shape[0]):
                for j in range(m.shape[1]):
                    fh.write(f"{name},{i},{j},{CSV_FMT % m[i, j]}\n")
    for name, sf in dr.spatial.items():
        spath = os.path.join(outdir, f"{name.lower()}_samples.csv")
        samples = np.atleast_2d(sf.samples.T).T
        cols = [name] if samples.shape[1] == 1 else [
            f"{name}{i + 1}" for i in range(samples.shape[1])]
        with open(spath, "w", encoding="ascii") as fh:
            fh.write(",".join(["x"] + cols) + "\n")
            for x, row in zip(sf.x, samples):
                vals = [CSV_FMT % v for v in np.atleast_1d(row)]
                fh.write(",".join([CSV_FMT % x] + vals) + "\n")


def _write_summary(lines: list[str], outdir: str) -> None:
    with open(os.path.join(outdir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    for line in lines:
        print(line)


def _simulate_scenario(sc: Scenario, outdir: str, figures: bool) -> list[str]:
    dr = runner.run_design(sc)
    traj = runner.run_simulation(sc, dr)
    selected = sc.outputs.get("series")
    if selected:
        missing = [s for s in selected if s not in traj.series]
        if missing:
            raise ScenarioError(f"outputs.series names unknown series {missing}")
        traj.series = {k: traj.series[k] for k in selected}
    engine.write_trajectory_csv(traj, os.path.join(outdir, "trajectory.csv"))
    if traj.snapshots:
        engine.write_snapshot_csv(traj, os.path.join(outdir, "snapshots"))
    _write_gain_csv(dr, outdir)
    lines = dr.summary_lines()
    err_series = next((n for n in traj.series if n.startswith("err_total")),
                      next(iter(traj.series)))
    lines.append(f"final {err_series}: {traj.value_at_end(err_series):.6g}")
    window = (sc.sim.T / 2.0, sc.sim.T)
    try:
        rate = engine.fit_decay_rate(traj, err_series, window)
        lines.append(f"fitted decay rate of {err_series} over "
                     f"[{window[0]:g}, {window[1]:g}]: {rate:.4f}")
    except CascobsError as exc:
        lines.append(f"decay fit skipped: {exc}")
    if figures:
        from . import plotting
        plotting.plot_error_series(
            traj, os.path.join(outdir, "error_series.png"), title=sc.name)
        if traj.snapshots:
            plotting.plot_error_surface(
                traj, os.path.join(outdir, "error_surface.png"),
                title=sc.name or "observation error")
        for name, sf in dr.spatial.items():
            plotting.plot_spatial_gain(
                sf, os.path.join(outdir, f"{name.lower()}.png"), name=name)
    return lines


def cmd_design(args) -> int:
    sc = load_scenario(args.scenario)
    outdir = _resolve_outdir(args, sc, "cascobs_out")
    dr = runner.run_design(sc)
    _write_gain_csv(dr, outdir)
    _write_summary(dr.summary_lines(), outdir)
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    outdir = _resolve_outdir(args, sc, "cascobs_out")
    lines = _simulate_scenario(sc, outdir, figures=not args.no_figures)
    _write_summary(lines, outdir)
    return EXIT_OK


def cmd_check(args) -> int:
    sc = load_scenario(args.scenario)
    ok, lines = runner.observability_report(sc)
    for line in lines:
        print(line)
    print(f"scenario valid, design feasible: {ok}")
    return EXIT_OK if ok else EXIT_DESIGN


def _reference_scenario(dt: float, dx: float, horizon: float) -> Scenario:
    from .scenario import parse_scenario
    n_snap = 25
    return parse_scenario({
        "kind": "heat",
        "name": "reference-unstable-heat",
        "system": dict(REFERENCE_SYSTEM),
        "design": {"F0": REFERENCE_F0, "modal_poles": list(REFERENCE_MODAL_POLES)},
        "sim": {"dt": dt, "dx": dx, "T": horizon,
                "record_every": max(1, round(0.01 / dt))},
        "initial": {"v": [1.0, 1.0], "w": "sin(pi*x)",
                    "vhat": [0.0, 0.0], "what": "0"},
        "input": "0",
        "outputs": {"snapshot_times":
                    [horizon * k / (n_snap - 1) for k in range(n_snap)]},
    }, source="<reference>")


def cmd_reproduce_fig1(args) -> int:
    sc = _reference_scenario(args.dt, args.dx, args.T)
    outdir = _resolve_outdir(args, None, "cascobs_out/reference")
    dr = runner.run_design(sc)
    gains: heat.HeatObserverGains = dr.gains
    l1 = float(gains.mt.L[0, 0])
    f1 = gains.F1
    plant = heat.HeatPlant(REFERENCE_SYSTEM["mu"], REFERENCE_SYSTEM["A1"],
                           REFERENCE_SYSTEM["B1"], REFERENCE_SYSTEM["C1"])
    spectrum = heat.truncated_closed_loop_spectrum(plant, gains.mt,
                                                   SPECTRUM_MODES)
    eigs = spectrum.eigenvalues
    top_dev = float(np.min(np.abs(eigs - (-2.0))))
    tail_dev = 0.0
    for j in range(2, SPECTRUM_MODES + 1):
        target = -heat.mode_frequency(j) + plant.mu
        tail_dev = max(tail_dev, float(np.min(np.abs(eigs - target))))

    lines = ["reference experiment: unstable heat plant (mu = 4) behind a "
             "two-state sensor",
             f"dt = {args.dt:g}, dx = {args.dx:g}, T = {args.T:g}", ""]
    comp_rows = [
        ("l1", l1, REFERENCE_L1),
        ("F1[0]", float(f1[0]), REFERENCE_F1[0]),
        ("F1[1]", float(f1[1]), REFERENCE_F1[1]),
    ]
    with open(os.path.join(outdir, "gain_comparison.csv"), "w",
              encoding="ascii") as fh:
        fh.write("quantity,computed,reference,abs_diff\n")
        for name, got, ref in comp_rows:
            fh.write(f"{name},{CSV_FMT % got},{CSV_FMT % ref},"
                     f"{CSV_FMT % abs(got - ref)}\n")
    lines.append("gain comparison (computed vs reference):")
    for name, got, ref in comp_rows:
        lines.append(f"  {name}: computed {got:.6f}, reference {ref:.6f}, "
                     f"|diff| = {abs(got - ref):.2e}")

    traj = runner.run_simulation(sc, dr)
    engine.write_trajectory_csv(traj, os.path.join(outdir, "trajectory.csv"))
    engine.write_snapshot_csv(traj, os.path.join(outdir, "snapshots"))
    _write_gain_csv(dr, outdir)
    if not args.no_figures:
        from . import plotting
        plotting.plot_error_series(
            traj, os.path.join(outdir, "error_series.png"),
            title="observation error norms")
        plotting.plot_error_surface(
            traj, os.path.join(outdir, "error_surface.png"),
            title="w - what")
        plotting.plot_spatial_gain(
            gains.F2, os.path.join(outdir, "f2.png"), name="F2")

    e0 = float(traj.series["err_total"][0])
    eT = traj.value_at_end("err_total")
    ratio = eT / e0
    margin = abs(spectrum.stability_margin)
    window = (args.T / 2.0, args.T)
    rate = engine.fit_decay_rate(traj, "err_total", window)

    checks = [
        ("gain l1 within 1e-3 of reference",
         abs(l1 - REFERENCE_L1) <= GAIN_TOL,
         f"|{l1:.4f} - {REFERENCE_L1}| = {abs(l1 - REFERENCE_L1):.2e}"),
        ("gain F1 within 1e-3 of reference",
         float(np.max(np.abs(f1 - REFERENCE_F1))) <= GAIN_TOL,
         f"max diff = {float(np.max(np.abs(f1 - REFERENCE_F1))):.2e}"),
        (f"truncated spectrum contains -2 (within 1e-6, {SPECTRUM_MODES} modes)",
         top_dev <= 1e-6, f"deviation = {top_dev:.2e}"),
        ("truncated spectrum tail matches -lambda_j + mu (within 1e-8)",
         tail_dev <= 1e-8, f"worst deviation = {tail_dev:.2e}"),
        (f"final combined error <= {FINAL_RATIO_LIMIT:.0%} of initial",
         ratio <= FINAL_RATIO_LIMIT, f"ratio = {ratio:.4f}"),
        (f"late-window decay rate within [{RATE_BAND[0]}, {RATE_BAND[1]}] "
         f"of spectrum margin {margin:g}",
         RATE_BAND[0] * margin <= rate <= RATE_BAND[1] * margin,
         f"fitted rate = {rate:.4f} over [{window[0]:g}, {window[1]:g}]"),
    ]
    lines.append("")
    failed = []
    for name, ok, detail in checks:
        lines.append(f"  [{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        if not ok:
            failed.append(name)
    lines.append("")
    lines.append(f"verdict: {'all checks passed' if not failed else 'FAILED: ' + '; '.join(failed)}")
    _write_summary(lines, outdir)
    return EXIT_OK if not failed else EXIT_THRESHOLD


def _sweep_one(item: tuple[str, str, bool]) -> tuple[str, int, str]:
    path, outdir, figures = item
    try:
        sc = load_scenario(path)
        lines = _simulate_scenario(sc, outdir, figures)
        return path, EXIT_OK, lines[-1] if lines else ""
    except CascobsError as exc:
        return path, _code_for(exc), str(exc)


def cmd_sweep(args) -> int:
    files = sorted(
        os.path.join(args.directory, f) for f in os.listdir(args.directory)
        if f.endswith((".yaml", ".yml")))
    if not files:
        print(f"no scenario files in {args.directory}", file=sys.stderr)
        return EXIT_INPUT
    base = _resolve_outdir(args, None, "cascobs_out/sweep")
    items = []
    for f in files:
        stem = os.path.splitext(os.path.basename(f))[0]
        rundir = os.path.join(base, stem)
        os.makedirs(rundir, exist_ok=True)
        items.append((f, rundir, not args.no_figures))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_one, items))
    else:
        results = [_sweep_one(item) for item in items]
    worst = EXIT_OK
    for path, code, note in results:
        status = "ok" if code == EXIT_OK else f"exit {code}"
        print(f"{path}: {status}  {note}")
        worst = max(worst, code)
    return worst


def _code_for(exc: CascobsError) -> int:
    if isinstance(exc, (ScenarioError, ConfigurationError)):
        return EXIT_INPUT
    if isinstance(exc, (DesignError, UnsolvableError, NumericalError)):
        return EXIT_DESIGN
    return EXIT_DESIGN


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascobs",
        description="Observer design and simulation for cascade systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design gains from a scenario file")
    p.add_argument("scenario")
    p.add_argument("--outdir", default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="design gains and run the simulation")
    p.add_argument("scenario")
    p.add_argument("--outdir", default=None)
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering, write CSVs only")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="validate a scenario and run the "
                                     "observability tests only")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("reproduce-fig1",
                       help="run the bundled reference experiment and check "
                            "gains and convergence against reference values")
    p.add_argument("--dx", type=float, default=0.01)
    p.add_argument("--dt", type=float, default=4e-5)
    p.add_argument("--T", type=float, default=3.0)
    p.add_argument("--outdir", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_reproduce_fig1)

    p = sub.add_parser("sweep", help="simulate every scenario in a directory")
    p.add_argument("directory")
    p.add_argument("--outdir", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CascobsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
