"""Command-line interface: spectral sweeps, the add/subtract matrix, logic gates and scaling."""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import (
    ADDSUB_HALF_WIDTH_PM,
    ADDSUB_HARDWARE_IMBALANCE,
    Imbalance,
    SpectralGrid,
    addsub_panel,
    addsub_panel_name,
    count_dips,
    evaluate,
    sweep,
)
from .devices import PROBE_WAVELENGTH_NM
from .encoding import EncodingError
from .mlp import NOISE_PRESETS, ExperimentError, GateTask, NoiseSpec, TrainingError, run_gate_experiment, train
from .netlist import NetlistError, bundled_path, load
from .neuron import TOPOLOGIES, NeuronConfig, expected_mac, measure
from .scaling import ArchitectureSpec, Variant, format_table, report

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

OUT_ENV = "WDIPLN_OUT"
MANIFEST_SUFFIX = ".manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_atomic(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


class Outputs:
    """Collects files written by one command so the manifest can list them."""

    def __init__(self, directory: Path, stem: str):
        self.directory = directory
        self.stem = stem
        self.paths: list[Path] = []

    @property
    def manifest_path(self) -> Path:
        return self.directory / f"{self.stem}{MANIFEST_SUFFIX}"

    def write(self, name: str, text: str) -> Path:
        path = write_atomic(self.directory / name, text)
        self.paths.append(path)
        return path


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------- commands


def _grid(args) -> SpectralGrid:
    if args.start is not None or args.stop is not None:
        if args.start is None or args.stop is None:
            raise UsageError("--start and --stop go together")
        return SpectralGrid(args.start, args.stop, args.step_pm)
    return SpectralGrid.around(args.center, args.half_width_pm, args.step_pm)


def _write_sweep(out: Outputs, stem: str, result, fmt: str) -> None:
    if fmt == "csv":
        out.write(f"{stem}.csv", result.to_csv())
        return
    data = {
        "wavelength_nm": [round(float(v), 6) for v in result.wavelength],
        "transmission_db": [round(float(v), 9) for v in result.transmission_db],
        "phase_rad": [round(float(v), 9) for v in result.phase],
    }
    out.write(f"{stem}.json", _json(data))


def cmd_sweep(args, out: Outputs) -> dict:
    netlist = bundled_path(args.bundled) if args.bundled else args.netlist
    if netlist is None:
        raise UsageError("give a netlist path or --bundled NAME")
    circuit = load(netlist)
    result = sweep(circuit, _grid(args))
    stem = out.stem = args.name or "sweep"
    _write_sweep(out, stem, result, args.format)
    return {"points": len(result.wavelength), "dips": count_dips(result)}


def _addsub_imbalance(preset: str, seed: int) -> Imbalance | None:
    if preset == "none":
        return None
    if preset == "hardware":
        return ADDSUB_HARDWARE_IMBALANCE
    amp, phase = NOISE_PRESETS[preset]
    return Imbalance.sample(2, np.random.default_rng(seed), amp, phase)


def cmd_addsub(args, out: Outputs) -> dict:
    imbalance = _addsub_imbalance(args.noise_preset, args.seed)
    grid = SpectralGrid.around(args.probe, args.half_width_pm, args.step_pm)
    summary = {}
    for row in args.rows:
        for column in args.columns:
            name = addsub_panel_name(row, column)
            circuit = addsub_panel(row, column, probe_wavelength=args.probe, imbalance=imbalance)
            result = sweep(circuit, grid)
            _write_sweep(out, f"panel_{name}", result, args.format)
            at_probe = evaluate(circuit, args.probe)
            summary[name] = {
                "row": row,
                "column": column,
                "db_at_probe": round(float(10 * math.log10(max(abs(at_probe) ** 2, 1e-30))), 9),
                "dips": count_dips(result),
                "min_db": round(float(result.transmission_db.min()), 9),
                "max_db": round(float(result.transmission_db.max()), 9),
                "median_db": round(float(np.median(result.transmission_db)), 9),
            }
    out.write("addsub_summary.json", _json({"probe_wavelength_nm": args.probe, "panels": summary}))
    return {"panels": len(summary)}


def cmd_gates(args, out: Outputs) -> dict:
    gates = list(GateTask) if args.gate == "all" else [GateTask.parse(args.gate)]
    noise = NoiseSpec.preset(args.noise_preset, args.seed)
    accuracy = {}
    for gate in gates:
        model = train(gate, seed=args.seed)
        log = run_gate_experiment(gate, model, noise, activation=args.activation, window=not args.no_window)
        stem = f"gates_{gate.value}"
        out.write(f"{stem}.json", log.to_json() + "\n")
        if args.format == "csv":
            out.write(f"{stem}.csv", log.to_csv())
        accuracy[gate.value] = log.accuracy
        print(f"{gate.value}: accuracy {log.accuracy:.2f}")
    return {"accuracy": accuracy}


def cmd_scaling(args, out: Outputs) -> dict:
    variants = list(Variant) if args.variant == "all" else [Variant.parse(args.variant)]
    reports = [
        report(ArchitectureSpec(v, args.N, args.M, io_per_element=args.io_per_element), pad_size_um=args.pad_size_um, pitch_um=args.pitch_um)
        for v in variants
    ]
    table = format_table(reports)
    sys.stdout.write(table)
    out.write("scaling.txt", table)
    out.write("scaling.json", _json([json.loads(r.to_json()) for r in reports]))
    return {"variants": [r.variant for r in reports]}


def cmd_eval(args, out: Outputs) -> dict:
    config = NeuronConfig.from_json(Path(args.config).read_text())
    value = measure(config, args.topology, input_encoding=args.input_encoding)
    target = expected_mac(config)
    result = {
        "topology": args.topology,
        "input_encoding": args.input_encoding,
        "expected_mac": round(target, 12),
        "readout": round(value, 12),
        "abs_error": round(abs(value - target), 12),
    }
    out.write("eval.json", _json(result))
    print(f"readout {value:.6f}  expected {target:.6f}")
    return result


# ---------------------------------------------------------------- parser


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None, help=f"output directory (default: ${OUT_ENV} or .)")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="tabular output format")
    parser.add_argument(
        "--noise-preset",
        choices=sorted(NOISE_PRESETS),
        default="none",
        help="static branch imbalance applied to the circuit (default: none)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wdipln", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="transmission sweep of a JSON netlist")
    p.add_argument("netlist", nargs="?", type=Path, help="netlist JSON file")
    p.add_argument("--bundled", metavar="NAME", help="use a bundled netlist instead of a file")
    p.add_argument("--center", type=float, default=PROBE_WAVELENGTH_NM, help="grid centre [nm]")
    p.add_argument("--half-width-pm", type=float, default=ADDSUB_HALF_WIDTH_PM, help="grid half width [pm]")
    p.add_argument("--start", type=float, help="grid start [nm]; overrides --center")
    p.add_argument("--stop", type=float, help="grid stop [nm]")
    p.add_argument("--step-pm", type=float, default=1.0, help="grid step [pm]")
    p.add_argument("--name", help="output file stem (default: sweep)")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("addsub", help="three-ring add/subtract panel matrix")
    p.add_argument("--rows", type=int, nargs="+", choices=(1, 2, 3), default=[1, 2, 3], help="ring-state rows")
    p.add_argument("--columns", type=int, nargs="+", choices=(1, 2, 3, 4), default=[1, 2, 3, 4], help="sign columns")
    p.add_argument("--probe", type=float, default=PROBE_WAVELENGTH_NM, help="shared resonance [nm]")
    p.add_argument("--half-width-pm", type=float, default=ADDSUB_HALF_WIDTH_PM, help="sweep half width [pm]")
    p.add_argument("--step-pm", type=float, default=1.0, help="sweep step [pm]")
    _common(p)
    p.set_defaults(func=cmd_addsub)

    p = sub.add_parser("gates", help="train a 2-2-1 network and run it by configure-recycle")
    p.add_argument("--gate", choices=("and", "or", "xor", "all"), default="all", help="logic gate")
    p.add_argument("--activation", choices=("relu", "3db"), default="relu", help="activation applied to readouts")
    p.add_argument("--no-window", action="store_true", help="skip the +-50 pm window statistics")
    _common(p)
    p.set_defaults(func=cmd_gates)

    p = sub.add_parser("scaling", help="element count, footprint and electrical I/O table")
    p.add_argument("--variant", choices=[v.value for v in Variant] + ["coln", "wdipln", "all"], default="all")
    p.add_argument("-N", type=int, default=8, help="layer width")
    p.add_argument("-M", type=int, default=1, help="wavelength channels")
    p.add_argument("--io-per-element", type=int, default=4, help="electrical I/O per element")
    p.add_argument("--pad-size-um", type=float, default=60.0, help="bond pad edge [um]")
    p.add_argument("--pitch-um", type=float, default=150.0, help="pad grid pitch [um]")
    _common(p)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("eval", help="evaluate a neuron config JSON on a topology")
    p.add_argument("config", type=Path, help="NeuronConfig JSON file")
    p.add_argument("--topology", choices=TOPOLOGIES, default="wdipln")
    p.add_argument("--input-encoding", choices=("continuous", "binary"), default="continuous")
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rerun", help="repeat a run from its manifest and compare output hashes")
    p.add_argument("manifest", type=Path, help="*.manifest.json written by an earlier run")
    p.add_argument("--out", type=Path, default=None, help="directory for the repeated outputs")
    p.set_defaults(func=None)
    return parser


def _resolve_out(args) -> Path:
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, "."))


def _config(args) -> dict:
    skip = {"func", "out"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def run(argv: list[str]) -> tuple[int, dict | None]:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        return _rerun(args), None
    out_dir = _resolve_out(args)
    outputs = Outputs(out_dir, args.command)
    started = time.perf_counter()
    try:
        summary = args.func(args, outputs)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"wdipln {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except (NetlistError, EncodingError, ValueError, OSError) as exc:
        print(f"wdipln {args.command}: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION, None
    except (TrainingError, ExperimentError, FloatingPointError, ArithmeticError) as exc:
        print(f"wdipln {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "config": _config(args),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "outputs": [{"path": p.name, "sha256": _sha256(p)} for p in outputs.paths],
        "summary": summary,
        "duration_s": round(time.perf_counter() - started, 6),
    }
    write_atomic(outputs.manifest_path, _json(manifest))
    return EXIT_OK, manifest


def _strip_out(argv: list[str]) -> list[str]:
    cleaned, skip = [], False
    for token in argv:
        if skip:
            skip = False
            continue
        if token == "--out":
            skip = True
            continue
        if token.startswith("--out="):
            continue
        cleaned.append(token)
    return cleaned


def _rerun(args) -> int:
    try:
        recorded = json.loads(args.manifest.read_text())
        argv = _strip_out(recorded["argv"])
    except (OSError, ValueError, KeyError) as exc:
        print(f"wdipln rerun: validation error: cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    target = args.out or Path(tempfile.mkdtemp(prefix="wdipln-rerun-"))
    code, manifest = run(argv + ["--out", str(target)])
    if code != EXIT_OK:
        return code
    before = {o["path"]: o["sha256"] for o in recorded["outputs"]}
    after = {o["path"]: o["sha256"] for o in manifest["outputs"]}
    if before != after:
        changed = sorted(set(before) ^ set(after) | {k for k in before if after.get(k) != before[k]})
        print(f"wdipln rerun: outputs differ: {', '.join(changed)}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"rerun identical: {len(after)} outputs in {target}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    code, _ = run(sys.argv[1:] if argv is None else list(argv))
    return code


if __name__ == "__main__":
    sys.exit(main())
