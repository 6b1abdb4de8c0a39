"""Command-line entry points.

    cdsysid gen-system      --config scenario.json --out out/
    cdsysid gen-disturbance --config scenario.json --out out/
    cdsysid open-loop       --config scenario.json --out out/
    cdsysid bounds          --config scenario.json --out out/ [--modes 1-20]
    cdsysid identify        --config scenario.json --out out/ [--modes 1-20]
    cdsysid report          --out out/

Mode numbers on the command line and in every output file are 1-based.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .disturbance import load_timeseries, save_timeseries, synth_disturbance, synth_noise
from .dynamics import log_grid
from .identify import BOUNDS_REALIZATION, identify_all, open_loop_spectrum, write_estimates, write_summary
from .loop import open_loop_modal
from .modal import save_model
from .refdesign import ModalSpectrum, compute_bounds, modal_asd, read_spectrum, write_spectrum
from .scenario import Scenario

log = logging.getLogger("cdsysid")

ASD_FILE = "open_loop_asd.csv"


class CLIError(Exception):
    pass


def parse_modes(text: str | None, n_modes: int):
    """``"1-8,12"`` -> 0-based indices ``[0..7, 11]``."""
    if not text:
        return None
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    bad = [m for m in out if not 1 <= m <= n_modes]
    if bad:
        raise CLIError(f"modes out of range 1..{n_modes}: {bad}")
    return np.array(sorted(set(out))) - 1


def _scenario(args) -> Scenario:
    if not args.config:
        scen = Scenario()
    else:
        path = Path(args.config)
        if not path.exists():
            raise CLIError(f"config file {path} not found")
        scen = Scenario.load(path)
    if args.seed is not None:
        scen.seed = args.seed
    if args.out:
        scen.out_dir = args.out
    return scen


def cmd_gen_system(scen: Scenario, args) -> int:
    model = scen.synthetic_model()
    path = save_model(model, scen.out_dir)
    print(f"wrote {path}: {model.n_y}x{model.n_u}, kappa={model.kappa:.6g}")
    return 0


def cmd_gen_disturbance(scen: Scenario, args) -> int:
    model = scen.load_model()
    dist = scen.dist_spec(model)
    N = scen.openloop_samples
    out = Path(scen.out_dir)
    save_timeseries(out / "d.csv", synth_disturbance(dist, N, BOUNDS_REALIZATION), scen.Ts)
    save_timeseries(out / "n.csv", synth_noise(dist, N, BOUNDS_REALIZATION), scen.Ts)
    print(f"wrote {out / 'd.csv'} and {out / 'n.csv'} ({N} samples)")
    return 0


def _open_loop(scen: Scenario, model) -> ModalSpectrum:
    out = Path(scen.out_dir)
    if (out / "d.csv").exists() and (out / "n.csv").exists():
        d = load_timeseries(out / "d.csv", model.n_y)
        n = load_timeseries(out / "n.csv", model.n_y)
        if d.shape != n.shape:
            raise CLIError(f"d.csv {d.shape} and n.csv {n.shape} differ")
        grid = log_grid(scen.fs_hz)
        run = open_loop_modal(model, d, n, scen.Ts)
        return ModalSpectrum(grid, modal_asd(run.y_modal, scen.fs_hz, grid))
    return open_loop_spectrum(model, scen.dist_spec(model), scen.openloop_samples)


def cmd_open_loop(scen: Scenario, args) -> int:
    model = scen.load_model()
    spectrum = _open_loop(scen, model)
    path = Path(scen.out_dir) / ASD_FILE
    write_spectrum(spectrum, path)
    print(f"wrote {path}: {model.n_y} modes x {spectrum.freq_hz.size} frequencies, "
          f"noise floor {spectrum.noise_floor:.3g} um/rtHz")
    return 0


def _bounds(scen, model, spectrum, modes):
    return compute_bounds(model.sigma, scen.params(model), spectrum, eps_max=scen.eps_max,
                          u_max=scen.u_design_amp, y_max=scen.y_max_um, N=scen.n_samples,
                          modes=modes, coverage=scen.coverage)


def cmd_bounds(scen: Scenario, args) -> int:
    model = scen.load_model()
    asd_path = Path(scen.out_dir) / ASD_FILE
    if not asd_path.exists():
        raise CLIError(f"{asd_path} not found; run open-loop first")
    spectrum = read_spectrum(asd_path, model.n_y)
    bounds = _bounds(scen, model, spectrum, parse_modes(args.modes, model.n_y))
    path = Path(scen.out_dir) / "bounds.csv"
    bounds.to_csv(path)
    infeasible = (bounds.modes[~bounds.feasible] + 1).tolist()
    print(f"wrote {path}: {int(bounds.feasible.sum())}/{bounds.modes.size} modes feasible")
    if infeasible:
        print(f"infeasible modes: {_ranges(infeasible)}")
    return 0


def cmd_identify(scen: Scenario, args) -> int:
    model = scen.load_model()
    modes = parse_modes(args.modes, model.n_y)
    asd_path = Path(scen.out_dir) / ASD_FILE
    spectrum = read_spectrum(asd_path, model.n_y) if asd_path.exists() else None
    t0 = time.perf_counter()
    result = identify_all(model, scen.params(model), scen.dist_spec(model), eps_max=scen.eps_max,
                          u_max=scen.u_design_amp, y_max=scen.y_max_um, N=scen.n_samples,
                          modes=modes, spectrum=spectrum, u_limit=scen.u_max_amp,
                          coverage=scen.coverage, workers=args.workers, decoupled=args.decoupled)
    elapsed = time.perf_counter() - t0
    out = Path(scen.out_dir)
    write_estimates(result, out / "estimates.csv")
    result.bounds.to_csv(out / "bounds.csv")
    summary_path = out / "summary.json"
    write_summary(result, summary_path)
    doc = json.loads(summary_path.read_text())
    doc["elapsed_s"] = elapsed
    summary_path.write_text(json.dumps(doc, indent=2))
    s = result.summary()
    print(f"identified {len(result.estimates)} modes in {elapsed:.1f} s; "
          f"max |u_modal| = {s['max_abs_u_modal']:.3g} A")
    problems = []
    if s["violations"]:
        problems.append(f"feasible modes above eps_max: {_ranges(s['violations'])}")
    if s["max_abs_u_modal"] > scen.u_max_amp:
        problems.append(f"modal input exceeded u_max = {scen.u_max_amp} A")
    if result.failed:
        problems.append(f"failed modes: {_ranges([m + 1 for m in result.failed])}")
    for p in problems:
        print(f"ERROR: {p}", file=sys.stderr)
    return 1 if problems else 0


def cmd_report(scen: Scenario, args) -> int:
    path = Path(scen.out_dir) / "summary.json"
    if not path.exists():
        raise CLIError(f"{path} not found; run identify first")
    doc = json.loads(path.read_text())
    print(f"{'mode':>5} {'feasible':>8} {'A_um':>10} {'lower_um':>10} {'M':>6} {'sup_err':>8} {'max|u~|':>8}")
    for m in doc["modes"]:
        print(f"{m['mode']:>5} {str(m['feasible']):>8} {m['amplitude_um']:>10.4g} {m['lower_um']:>10.4g} "
              f"{m['M']:>6} {m['sup_error']:>8.4f} {m['max_abs_u_modal']:>8.4f}")
    n_feas = sum(m["feasible"] for m in doc["modes"])
    print(f"\n{n_feas}/{doc['n_modes']} feasible, eps_max = {doc['eps_max']}, "
          f"violations: {doc['violations'] or 'none'}, max |u_modal| = {doc['max_abs_u_modal']:.4g} A")
    return 0


def _ranges(nums) -> str:
    nums = sorted(nums)
    parts, start, prev = [], nums[0], nums[0]
    for x in nums[1:] + [None]:
        if x is not None and x == prev + 1:
            prev = x
            continue
        parts.append(str(start) if start == prev else f"{start}-{prev}")
        if x is not None:
            start = prev = x
    return ",".join(parts)


COMMANDS = {
    "gen-system": cmd_gen_system,
    "gen-disturbance": cmd_gen_disturbance,
    "open-loop": cmd_open_loop,
    "bounds": cmd_bounds,
    "identify": cmd_identify,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cdsysid", description=__doc__.split("\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON (defaults to the 165-mode case study)")
    common.add_argument("--out", help="output directory (overrides out_dir)")
    common.add_argument("--modes", help="1-based mode subset, e.g. 1-20,40")
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--workers", type=int, default=1, help="parallel per-mode experiments")
    common.add_argument("--decoupled", action="store_true",
                        help="identify: simulate only the excited mode in each experiment")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        scen = _scenario(args)
        return COMMANDS[args.command](scen, args)
    except (CLIError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
