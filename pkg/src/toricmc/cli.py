"""Command-line interface.

One executable drives all run modes and sweeps:

    toricmc -sim etc_sample -Ns 2000 -Nth 5000 -Nbs 10 -bet 16.0 \
        -muc 1 -Jc 1 -hc 0.2 -obs energy plaquette_z -bas z -lat square \
        -L 16 -bound periodic -dsp 1 -outdir runs/sample

Modes: etc_sample, etc_thermalization (with -reps for averaged chains),
etc_hysteresis (computes both branches of the loop), etc_T_sweep,
etc_h_sweep, etc_lmbda_sweep, etc_circle_sweep, and oracle (exact
reference values for small systems).  Every flag has the long and the
short spelling; `-flag=value` and `-flag value` are both accepted.
Results are written as hierarchical text documents, snapshots as GraphML.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field

from .driver import (
    LatSpec,
    OutSpec,
    ParamSpec,
    RunConfig,
    SimSpec,
    run_hysteresis,
    run_sample,
    run_sweep,
    run_thermalization,
    run_thermalization_ensemble,
    sweep_points,
)
from .errors import ConfigurationError
from .graphml import SNAPSHOT_FILENAME, write_snapshots
from .lattice import build_lattice
from .oracle import build_hamiltonian, thermal_expectations
from .results import (
    RESULTS_FILENAME,
    ResultsDocument,
    build_results_document,
    write_results,
)

MODES = ("etc_sample", "etc_thermalization", "etc_hysteresis", "etc_T_sweep",
         "etc_h_sweep", "etc_lmbda_sweep", "etc_circle_sweep", "oracle")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class CliRequest:
    """Parsed command line: the run configuration plus orchestration knobs."""

    mode: str
    run_config: RunConfig
    sweep: dict | None = None
    processes: int | None = None
    repetitions: int = 1
    outdir: str | None = None
    folder_name: str = "run"
    folder_names: tuple = ()
    emit_csv: bool = False
    debug: bool = False
    temperature: float | None = None
    extras: dict = field(default_factory=dict)


def _split_equals(argv):
    """Allow -flag=value for single-dash flags (e.g. -snap=0)."""
    out = []
    for tok in argv:
        if tok.startswith("-") and "=" in tok and not tok.startswith("--"):
            flag, _, value = tok.partition("=")
            out.extend([flag, value])
        else:
            out.append(tok)
    return out


def _build_parser():
    p = _Parser(prog="toricmc", allow_abbrev=False, add_help=True)
    a = p.add_argument
    a("--simulation", "-sim", required=True, choices=MODES,
      help="simulation mode")
    a("--N_samples", "-Ns", type=int, default=SimSpec.N_samples)
    a("--N_thermalization", "-Nth", type=int, default=SimSpec.N_thermalization)
    a("--N_between_samples", "--N_between_steps", "-Nbs", type=int,
      default=SimSpec.N_between_samples)
    a("--N_resamples", "-Nr", type=int, default=SimSpec.N_resamples)
    a("--beta", "-bet", type=float, default=None)
    a("--temperature", "-T", type=float, default=None)
    a("--mu_constant", "-muc", type=float, default=ParamSpec.mu)
    a("--J_constant", "-Jc", type=float, default=ParamSpec.J)
    a("--h_constant", "-hc", type=float, default=ParamSpec.h)
    a("--lmbda_constant", "-lmbdac", type=float, default=ParamSpec.lmbda)
    a("--h_constant_therm", "-hct", type=float, default=math.nan)
    a("--lmbda_constant_therm", "-lmbdact", type=float, default=math.nan)
    a("--h_hysteresis", "-hhys", type=float, nargs="+", default=[])
    a("--lmbda_hysteresis", "-lmbdahys", type=float, nargs="+", default=[])
    a("--custom_therm", "-cth", type=int, nargs="?", const=1, default=0)
    a("--observables", "-obs", nargs="+", default=["energy"])
    a("--seed", "-s", "-seed", type=int, default=0)
    a("--basis", "-bas", default=LatSpec.basis, choices=("x", "z"))
    a("--lattice_type", "-lat", default=LatSpec.lattice_type)
    a("--system_size", "-L", type=int, default=LatSpec.system_size)
    a("--boundaries", "-bound", default=LatSpec.boundaries)
    a("--default_spin", "-dsp", type=int, default=LatSpec.default_spin)
    a("--output_directory", "-outdir", default=None)
    a("--folder_name", "-fn", default="run")
    a("--folder_names", "-fns", nargs="+", default=[])
    a("--snapshots", "-snap", type=int, nargs="?", const=1, default=0)
    a("--full_time_series", "-fts", "-fcs", type=int, nargs="?", const=1, default=0)
    a("--process_index", "-procid", type=int, default=0)
    a("--processes", "-proc", type=int, default=None)
    a("--repetitions", "-reps", type=int, default=1)
    a("--T_lower", "-Tl", type=float, default=None)
    a("--T_upper", "-Tu", type=float, default=None)
    a("--T_steps", "-Ts", type=int, default=None)
    a("--h_lower", "-hl", type=float, default=None)
    a("--h_upper", "-hu", type=float, default=None)
    a("--h_steps", "-hs", type=int, default=None)
    a("--lmbda_lower", "-lmbdal", type=float, default=None)
    a("--lmbda_upper", "-lmbdau", type=float, default=None)
    a("--lmbda_steps", "-lmbdas", type=int, default=None)
    a("--radius", "-rad", type=float, default=None)
    a("--Theta_lower", "-Thl", type=float, default=None)
    a("--Theta_upper", "-Thu", type=float, default=None)
    a("--Theta_steps", "-Ths", type=int, default=None)
    a("--emit-csv", dest="emit_csv", action="store_true")
    a("--debug", action="store_true")
    return p


def _require(args, names, mode):
    missing = [flag for flag, value in names if value is None]
    if missing:
        raise UsageError(f"mode {mode} requires {' '.join(missing)}")


def parse_cli(argv) -> CliRequest:
    """Parse an argv list into a CliRequest; raises UsageError on bad input."""
    parser = _build_parser()
    args = parser.parse_args(_split_equals(list(argv)))
    mode = args.simulation

    if args.beta is not None and args.temperature is not None:
        raise UsageError("give either --beta/-bet or --temperature/-T, not both")
    beta = args.beta
    if args.temperature is not None:
        if args.temperature <= 0:
            raise UsageError("--temperature/-T must be > 0")
        beta = 1.0 / args.temperature
    if beta is None:
        beta = 1.0

    cfg = RunConfig(
        sim=SimSpec(
            N_samples=args.N_samples,
            N_thermalization=args.N_thermalization,
            N_between_samples=args.N_between_samples,
            N_resamples=args.N_resamples,
            custom_therm=bool(args.custom_therm),
            seed=args.seed,
            observables=tuple(args.observables),
        ),
        params=ParamSpec(
            mu=args.mu_constant,
            h=args.h_constant,
            J=args.J_constant,
            lmbda=args.lmbda_constant,
            h_therm=args.h_constant_therm,
            lmbda_therm=args.lmbda_constant_therm,
            h_hys=tuple(args.h_hysteresis),
            lmbda_hys=tuple(args.lmbda_hysteresis),
        ),
        lat=LatSpec(
            basis=args.basis,
            lattice_type=args.lattice_type,
            system_size=args.system_size,
            beta=beta,
            boundaries=args.boundaries,
            default_spin=args.default_spin,
        ),
        out=OutSpec(
            path_out=args.output_directory,
            paths_out=tuple(args.folder_names),
            save_snapshots=bool(args.snapshots),
            full_time_series=bool(args.full_time_series),
        ),
    )

    sweep = None
    if mode == "etc_T_sweep":
        _require(args, [("-Tl", args.T_lower), ("-Tu", args.T_upper),
                        ("-Ts", args.T_steps)], mode)
        sweep = {"kind": "T", "lower": args.T_lower, "upper": args.T_upper,
                 "steps": args.T_steps}
    elif mode == "etc_h_sweep":
        _require(args, [("-hl", args.h_lower), ("-hu", args.h_upper),
                        ("-hs", args.h_steps)], mode)
        sweep = {"kind": "h", "lower": args.h_lower, "upper": args.h_upper,
                 "steps": args.h_steps}
    elif mode == "etc_lmbda_sweep":
        _require(args, [("-lmbdal", args.lmbda_lower), ("-lmbdau", args.lmbda_upper),
                        ("-lmbdas", args.lmbda_steps)], mode)
        sweep = {"kind": "lmbda", "lower": args.lmbda_lower,
                 "upper": args.lmbda_upper, "steps": args.lmbda_steps}
    elif mode == "etc_circle_sweep":
        _require(args, [("-rad", args.radius), ("-Thl", args.Theta_lower),
                        ("-Thu", args.Theta_upper), ("-Ths", args.Theta_steps)], mode)
        sweep = {"kind": "circle", "radius": args.radius,
                 "theta_lower": args.Theta_lower, "theta_upper": args.Theta_upper,
                 "steps": args.Theta_steps, "center_lmbda": args.lmbda_constant,
                 "center_h": args.h_constant}
    elif mode == "etc_hysteresis":
        if not cfg.params.h_hys:
            raise UsageError("etc_hysteresis requires -hhys and -lmbdahys")
        sweep = {"kind": "hysteresis_two_branch"}

    try:
        if mode != "oracle":
            cfg.validate()
        if mode == "etc_hysteresis" and cfg.out.paths_out:
            if len(cfg.out.paths_out) != len(cfg.params.h_hys):
                raise ConfigurationError(
                    "--folder_names/-fns length must match the hysteresis schedule")
    except ConfigurationError as err:
        raise UsageError(str(err)) from err

    return CliRequest(
        mode=mode, run_config=cfg, sweep=sweep, processes=args.processes,
        repetitions=args.repetitions, outdir=args.output_directory,
        folder_name=args.folder_name, folder_names=tuple(args.folder_names),
        emit_csv=args.emit_csv, debug=args.debug,
        temperature=args.temperature,
    )


def _print_summary(result, label=""):
    head = f"[{result.mode}{(' ' + label) if label else ''}]"
    print(f"{head} seed={result.seed_used} wall={result.wall_time:.2f}s")
    if result.mean_hys is not None:
        for step in range(result.mean_hys.shape[0]):
            for i, name in enumerate(result.observables):
                print(f"  step {step} {name}: {result.mean_hys[step, i]:.8g}"
                      f" +- {result.mean_std_hys[step, i]:.3g}"
                      f" (tau_int {result.tau_int_hys[step, i]:.3g})")
    else:
        for i, name in enumerate(result.observables):
            print(f"  {name}: {result.mean[i]:.8g} +- {result.mean_std[i]:.3g}"
                  f" (binder {result.binder[i]:.6g},"
                  f" tau_int {result.tau_int[i]:.3g})")


def _write_run_outputs(request, result, folder, extra_meta=None,
                       snapshot_dirs=None):
    """Results document, optional snapshots, optional CSV dumps."""
    doc = build_results_document(result, extra_meta)
    write_results(doc, os.path.join(folder, RESULTS_FILENAME))

    lat_spec = result.config.lat
    if result.config.out.save_snapshots:
        lattice = build_lattice(lat_spec.lattice_type, lat_spec.system_size,
                                lat_spec.boundaries)
        meta = {
            "basis": lat_spec.basis, "lattice_type": lat_spec.lattice_type,
            "system_size": lat_spec.system_size, "boundaries": lat_spec.boundaries,
            "beta": lat_spec.beta, "mu": result.config.params.mu,
            "h": result.config.params.h, "J": result.config.params.J,
            "lmbda": result.config.params.lmbda,
        }
        if result.snapshots is not None:
            meta["N_samples"] = len(result.snapshots)
            write_snapshots(result.snapshots, lattice, meta,
                            os.path.join(folder, SNAPSHOT_FILENAME))
        elif result.snapshots_hys is not None:
            dirs = snapshot_dirs or [os.path.join(folder, f"step{i}")
                                     for i in range(len(result.snapshots_hys))]
            for step, snaps in enumerate(result.snapshots_hys):
                step_meta = dict(meta)
                step_meta["h"] = result.config.params.h_hys[step]
                step_meta["lmbda"] = result.config.params.lmbda_hys[step]
                step_meta["N_samples"] = len(snaps)
                write_snapshots(snaps, lattice, step_meta,
                                os.path.join(dirs[step], SNAPSHOT_FILENAME))

    if request.emit_csv and result.series is not None:
        for i, name in enumerate(result.observables):
            csv_path = os.path.join(folder, f"{name}.csv")
            with open(csv_path, "w") as fh:
                fh.write("sample,value\n")
                for j, v in enumerate(result.series[i]):
                    fh.write(f"{j},{v!r}\n")


def _execute_oracle(request):
    cfg = request.run_config
    lattice = build_lattice(cfg.lat.lattice_type, cfg.lat.system_size,
                            cfg.lat.boundaries)
    couplings = {"mu": cfg.params.mu, "h": cfg.params.h,
                 "J": cfg.params.J, "lmbda": cfg.params.lmbda}
    ham = build_hamiltonian(lattice, couplings, cfg.lat.basis)
    values = thermal_expectations(ham, cfg.lat.beta)
    doc = ResultsDocument()
    for name in sorted(values):
        doc.entries[f"oracle/results/{name}"] = values[name]
    meta = {"basis": cfg.lat.basis, "lattice_type": cfg.lat.lattice_type,
            "system_size": cfg.lat.system_size, "boundaries": cfg.lat.boundaries,
            "beta": cfg.lat.beta, **couplings}
    for k in sorted(meta):
        doc.entries[f"oracle/metadata/{k}"] = meta[k]
    if request.outdir:
        path = os.path.join(request.outdir, request.folder_name, "oracle.txt")
        write_results(doc, path)
        print(f"oracle table written to {path}")
    else:
        for k, v in doc.entries.items():
            print(f"{k} = {v}")
    return 0


def execute(request: CliRequest) -> int:
    """Run the parsed request and write its outputs."""
    mode = request.mode
    if mode == "oracle":
        return _execute_oracle(request)

    outdir = request.outdir
    if mode == "etc_sample":
        result = run_sample(request.run_config, debug=request.debug)
        _print_summary(result)
        if outdir:
            _write_run_outputs(request, result,
                               os.path.join(outdir, request.folder_name))
    elif mode == "etc_thermalization":
        if request.repetitions > 1:
            result, _ = run_thermalization_ensemble(
                request.run_config, request.repetitions,
                processes=request.processes, debug=request.debug)
            extra = {"repetitions": request.repetitions}
        else:
            result = run_thermalization(request.run_config, debug=request.debug)
            extra = None
        _print_summary(result)
        if outdir:
            _write_run_outputs(request, result,
                               os.path.join(outdir, request.folder_name),
                               extra_meta=extra)
    elif mode == "etc_hysteresis":
        results = run_sweep(request.run_config, {"kind": "hysteresis_two_branch"},
                            processes=request.processes, debug=request.debug)
        for branch, result in zip(("forward", "reversed"), results):
            _print_summary(result, label=branch)
            if outdir:
                folder = os.path.join(outdir, f"branch_{branch}")
                names = request.folder_names or tuple(
                    f"step{i}" for i in range(len(result.config.params.h_hys)))
                if branch == "reversed":
                    names = tuple(reversed(names))
                snapshot_dirs = [os.path.join(folder, n) for n in names]
                _write_run_outputs(request, result, folder,
                                   extra_meta={"branch": branch},
                                   snapshot_dirs=snapshot_dirs)
    else:
        results = run_sweep(request.run_config, request.sweep,
                            processes=request.processes, debug=request.debug)
        labels = [label for label, _, _ in
                  sweep_points(request.run_config, request.sweep)]
        for label, result in zip(labels, results):
            text = ",".join(f"{k}={v:.6g}" for k, v in label.items()
                            if isinstance(v, float))
            _print_summary(result, label=text)
        if outdir:
            for i, (label, result) in enumerate(zip(labels, results)):
                key = next(iter(label))
                folder = os.path.join(
                    outdir, f"point_{i:03d}_{key}_{label[key]:.6g}")
                _write_run_outputs(request, result, folder,
                                   extra_meta={f"sweep_{k}": v
                                               for k, v in label.items()})
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        request = parse_cli(argv)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    try:
        return execute(request)
    except ConfigurationError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except Exception as err:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
