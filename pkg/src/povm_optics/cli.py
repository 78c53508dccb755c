"""Command-line entry point: ``povm-optics {compile,simulate,ks-demo,verify}``.

Exit codes: 0 success, 1 validation failure, 2 IO or parse failure.
Source flags fall back to ``POVM_OPTICS_<FLAG>`` environment variables
(e.g. ``POVM_OPTICS_SEED``), then to built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import simulator as sim
from .compiler import compile_povm, verify_circuit
from .core import DomainError, StructureError
from .kstest import enumerate_contradiction, score_counts
from .optics import HWP, OpticalCircuit
from .povm import Povm, hexagon_povms

FORMAT_VERSION = 1
ENV_PREFIX = "POVM_OPTICS_"
VERIFY_BOUND = 1e-8

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class InputError(Exception):
    """Unreadable or unparsable input file."""


def _env(name: str, cast, default):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"invalid value for {ENV_PREFIX + name}: {raw!r}")


def _env_flag(name: str) -> bool:
    return os.environ.get(ENV_PREFIX + name, "").lower() in ("1", "true", "yes", "on")


def _dump(payload: dict) -> str:
    return json.dumps({"format_version": FORMAT_VERSION, **payload}, indent=2, sort_keys=True) + "\n"


def _load(path: str, key: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if isinstance(data, dict) and key in data:
        version = data.get("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise InputError(f"{path}: unsupported format_version {version}")
        data = data[key]
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a JSON object")
    return data


def load_povm(path: str) -> Povm:
    try:
        return Povm.from_dict(_load(path, "povm"))
    except DomainError as exc:
        raise InputError(f"{path}: {exc}") from exc


def load_circuit(path: str) -> OpticalCircuit:
    try:
        return OpticalCircuit.from_dict(_load(path, "circuit"))
    except StructureError as exc:
        raise InputError(f"{path}: {exc}") from exc


def write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def povm_document(p: Povm) -> str:
    return _dump({"povm": p.to_dict()})


def circuit_document(c: OpticalCircuit) -> str:
    return _dump({"circuit": c.to_dict()})


def source_from_args(args) -> sim.SourceModel:
    fields = dict(
        pair_rate=args.pair_rate,
        detector_efficiency=args.efficiency,
        double_pair_fraction=args.double_pair_fraction,
        duration_s=args.duration_s,
        seed=args.seed,
    )
    if args.ideal:
        fields.update(double_pair_fraction=0.0, detector_efficiency=1.0)
    return sim.SourceModel(**fields)


def _source_dict(src: sim.SourceModel) -> dict:
    return {
        "visibility": src.visibility,
        "pair_rate": src.pair_rate,
        "double_pair_fraction": src.double_pair_fraction,
        "detector_efficiency": src.detector_efficiency,
        "duration_s": src.duration_s,
        "seed": src.seed,
    }


def cmd_compile(povm_path: str, out_path: str) -> int:
    p = load_povm(povm_path)
    try:
        result = compile_povm(p)
    except DomainError as exc:
        from .povm import validate

        print(validate(p).summary())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    write_text(Path(out_path), circuit_document(result.circuit))
    print(result.summary())
    return EXIT_OK


def cmd_simulate(circuit_path: str, src: sim.SourceModel, out_path: str, povm_path: str | None = None) -> int:
    circuit = load_circuit(circuit_path)
    model = load_povm(povm_path) if povm_path else circuit
    raw = sim.simulate_counts(circuit, src)
    scaled = sim.scale_two_fold(raw, src.detector_efficiency) if src.detector_efficiency > 0 else raw
    report = sim.analyze(scaled, model, sim.traced_state())
    out = Path(out_path)
    write_text(out, raw.to_csv())
    write_text(out.with_suffix(".json"), _dump({
        "analysis": report.to_dict(),
        "source": _source_dict(src),
        "raw_two_fold_total": raw.total_two_fold,
        "scaled_two_fold_total": scaled.total_two_fold,
    }))
    print(f"1-fold: {raw.total_one_fold}, 2-fold raw: {raw.total_two_fold}, "
          f"scaled: {scaled.total_two_fold}, precision: {report.exactly_one_fraction:.4f}")
    return EXIT_OK


def povm_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def run_ks_demo(src: sim.SourceModel) -> dict:
    """Compile, simulate and score the three hexagon POVMs; returns all artifacts in memory."""
    certificate = enumerate_contradiction()
    circuits, raws, scaled = {}, {}, {}
    for i, p in enumerate(hexagon_povms()):
        circuit = compile_povm(p).circuit
        run_src = sim.SourceModel(**{**_source_dict(src), "seed": povm_seed(src.seed, i)})
        raw = sim.simulate_counts(circuit, run_src)
        circuits[p.name] = circuit
        raws[p.name] = raw
        scaled[p.name] = sim.scale_two_fold(raw, src.detector_efficiency) if src.detector_efficiency > 0 else raw
    report = score_counts(list(scaled.values()))
    return {"certificate": certificate, "circuits": circuits, "raw": raws, "scaled": scaled, "report": report}


def cmd_ks_demo(src: sim.SourceModel, out_dir: str) -> int:
    demo = run_ks_demo(src)
    out = Path(out_dir)
    cert = demo["certificate"]
    write_text(out / "certificate.json", _dump({"certificate": cert.to_dict()}))
    for name, circuit in demo["circuits"].items():
        write_text(out / f"circuit_{name}.json", circuit_document(circuit))
        write_text(out / f"counts_{name}.csv", demo["raw"][name].to_csv())
        write_text(out / f"counts_{name}_scaled.csv", demo["scaled"][name].to_csv())
    report = demo["report"]
    write_text(out / "violation_report.json", _dump({"report": report.to_dict(), "source": _source_dict(src)}))

    parity = cert.parity_argument
    print(f"assignments checked: {cert.total_assignments}, noncontextual assignments: {cert.valid_assignments}")
    print(f"each operator sits in {parity['operator_multiplicity']['A+']} POVMs: achievable yes-sums "
          f"{parity['achievable_yes_sums']} are all even, consistency needs {parity['required_yes_sum']}")
    for name, circuit in demo["circuits"].items():
        plates = [f"{s.theta_deg:.6g}deg@{s.path}" for s in circuit.stages if s.kind == HWP]
        print(f"{name}: {len(circuit.stages)} stages, HWPs {plates}")
    print(f"simulated precision: {report.precision:.4f}")
    return EXIT_OK if cert.valid else EXIT_INVALID


def cmd_verify(circuit_path: str, povm_path: str, trials: int = 1000, seed: int = 0) -> int:
    circuit = load_circuit(circuit_path)
    p = load_povm(povm_path)
    try:
        deviation = verify_circuit(circuit, p, trials, seed)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    ok = deviation <= VERIFY_BOUND
    print(f"max deviation over {trials} states: {deviation:.3e} ({'ok' if ok else 'FAILED'}, bound {VERIFY_BOUND:g})")
    return EXIT_OK if ok else EXIT_INVALID


def _add_source_flags(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--seed", type=int, default=_env("SEED", int, sim.DEFAULT_SEED))
    ap.add_argument("--duration-s", type=float, default=_env("DURATION_S", float, sim.DEFAULT_DURATION_S))
    ap.add_argument("--pair-rate", type=float, default=_env("PAIR_RATE", float, sim.DEFAULT_PAIR_RATE))
    ap.add_argument("--efficiency", type=float, default=_env("EFFICIENCY", float, sim.DEFAULT_EFFICIENCY))
    ap.add_argument("--double-pair-fraction", type=float,
                    default=_env("DOUBLE_PAIR_FRACTION", float, sim.DEFAULT_DOUBLE_PAIR_FRACTION))
    ap.add_argument("--ideal", action="store_true", default=_env_flag("IDEAL"),
                    help="no double pairs and unit detection efficiency")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="povm-optics", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a POVM JSON file into a circuit JSON file")
    c.add_argument("povm")
    c.add_argument("--out", required=True)

    s = sub.add_parser("simulate", help="simulate click counts for a circuit")
    s.add_argument("circuit")
    s.add_argument("--out", required=True, help="CSV path; the analysis JSON goes next to it")
    s.add_argument("--povm", help="POVM file for the Born-rule comparison (default: the circuit itself)")
    _add_source_flags(s)

    k = sub.add_parser("ks-demo", help="run the hexagon Kochen-Specker demonstration")
    k.add_argument("--out", required=True, help="output directory")
    _add_source_flags(k)

    v = sub.add_parser("verify", help="check a circuit against a POVM")
    v.add_argument("circuit")
    v.add_argument("povm")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=_env("SEED", int, 0))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "compile":
            return cmd_compile(args.povm, args.out)
        if args.command == "simulate":
            return cmd_simulate(args.circuit, source_from_args(args), args.out, args.povm)
        if args.command == "ks-demo":
            return cmd_ks_demo(source_from_args(args), args.out)
        return cmd_verify(args.circuit, args.povm, args.trials, args.seed)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
