"""Command line: ``bellframe run | bound | before-before``.

Exit codes: 0 success, 1 invalid input, 2 insufficient statistics.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import engine
from .exceptions import InsufficientStatisticsError
from .scenario import ScenarioError, load_scenario_file
from .spacetime import (
    C,
    LAB,
    BoundInput,
    Frame,
    SpacetimeEvent,
    before_before,
    divergence_window,
    frame_time_gap,
    required_relative_speed,
    vqi_bound,
    vqi_bound_sweep,
)

EXIT_OK, EXIT_INPUT, EXIT_STATS = 0, 1, 2


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def fmt_float(x: float) -> str:
    """Scientific notation with 6 significant digits."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.5e}"


def to_json(obj, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, floats in fixed scientific format."""
    pad, inner = "  " * indent, "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return "null" if not math.isfinite(obj) else fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {to_json(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(inner + to_json(v, indent + 1) for v in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    return str(v)


def to_csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([_csv_value(v) for v in row] for row in rows)
    return buf.getvalue()


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# -- run -----------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        sf = load_scenario_file(args.scenario).with_overrides(args.trials, args.seed)
        scenario = sf.build()
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        results = engine.run(scenario, workers=args.workers)
    except InsufficientStatisticsError as exc:
        print(f"error: insufficient statistics: {exc}", file=sys.stderr)
        return EXIT_STATS
    report = engine.summarize(results)
    if args.format == "json":
        text = to_json(report) + "\n"
    elif args.format == "csv":
        text = to_csv(_flatten(report), ("key", "value"))
    else:
        text = engine.format_report(report) + "\n"
    _emit(text, args.out)
    return EXIT_OK


# -- bound ---------------------------------------------------------------------------

def cmd_bound(args) -> int:
    try:
        BoundInput(args.length_m, args.jitter_s, args.beta, args.rho)
        if args.rho_sweep is not None and args.rho_sweep < 2:
            raise ValueError("--rho-sweep needs at least 2 samples")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    if args.rho_sweep is None:
        b = vqi_bound(BoundInput(args.length_m, args.jitter_s, args.beta, args.rho))
        if args.format == "json":
            text = to_json({"rho_rad": args.rho, "bound_c": b.bound, "divergent": b.divergent}) + "\n"
        elif args.format == "csv":
            text = to_csv([(args.rho, b.bound, b.divergent)], ("rho_rad", "bound_c", "divergent"))
        else:
            text = (f"v_QI/c >= {fmt_float(b.bound)}"
                    + ("  (frame simultaneity inside timing window)" if b.divergent else "") + "\n")
        _emit(text, args.out)
        return EXIT_OK

    points = vqi_bound_sweep(args.length_m, args.jitter_s, args.beta, args.rho_sweep)
    finite = [p.bound for p in points if math.isfinite(p.bound)]
    window = divergence_window(args.length_m, args.jitter_s, args.beta)
    summary = {
        "max_bound_c": max(finite) if finite else None,
        "min_bound_c": min(finite) if finite else None,
        "divergent_samples": sum(p.divergent for p in points),
        "divergence_window_rad": list(window),
    }
    if args.format == "json":
        summary["points"] = [{"rho_rad": p.rho, "bound_c": p.bound, "divergent": p.divergent}
                             for p in points]
        text = to_json(summary) + "\n"
    else:
        text = to_csv(((p.rho, p.bound, p.divergent) for p in points),
                      ("rho_rad", "bound_c", "divergent"))
        print(f"max finite bound: {_csv_value(summary['max_bound_c'])} c; "
              f"divergence window: [{fmt_float(window[0])}, {fmt_float(window[1])}] rad; "
              f"divergent samples: {summary['divergent_samples']}", file=sys.stderr)
    _emit(text, args.out)
    return EXIT_OK


# -- before-before -----------------------------------------------------------------

def before_before_report(length: float, speed: float, alignment_m: float,
                         lab_offset: float | None = None) -> dict:
    """Static absorber A at x=0, absorber B at x=length moving along +x.

    ``lab_offset`` is B's absorption time minus A's in the lab; by default it
    sits halfway through the simultaneity shift, which balances both margins.
    """
    if length <= 0 or speed < 0 or alignment_m < 0:
        raise InputError("length must be positive, speed and alignment non-negative")
    if speed >= C:
        raise InputError("speed must be below c")
    u = alignment_m / C
    frame_b = Frame((speed, 0.0, 0.0))
    shift = frame_b.gamma * speed * length / C**2
    offset = 0.5 * shift if lab_offset is None else lab_offset
    ea = SpacetimeEvent(0.0, (0.0, 0.0, 0.0))
    eb = SpacetimeEvent(offset, (length, 0.0, 0.0))
    gap_a = frame_time_gap(ea, eb, LAB)
    gap_b = frame_time_gap(ea, eb, frame_b)
    return {
        "before_before": before_before(ea, eb, LAB, frame_b, u),
        "alignment_uncertainty_s": u,
        "simultaneity_shift_s": shift,
        "lab_offset_s": offset,
        "a_first_margin_in_a_frame_s": gap_a - u,
        "b_first_margin_in_b_frame_s": -gap_b - u,
        "required_speed_mps": required_relative_speed(length, u),
    }


def cmd_before_before(args) -> int:
    try:
        rep = before_before_report(args.length_m, args.speed_mps, args.alignment_m, args.lab_offset_s)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.format == "json":
        text = to_json(rep) + "\n"
    else:
        text = (
            f"before-before: {'TRUE' if rep['before_before'] else 'FALSE'}\n"
            f"simultaneity shift: {fmt_float(rep['simultaneity_shift_s'])} s "
            f"(alignment uncertainty {fmt_float(rep['alignment_uncertainty_s'])} s)\n"
            f"margin A-first in A frame: {fmt_float(rep['a_first_margin_in_a_frame_s'])} s\n"
            f"margin B-first in B frame: {fmt_float(rep['b_first_margin_in_b_frame_s'])} s\n"
            f"required relative speed: {fmt_float(rep['required_speed_mps'])} m/s\n"
        )
    _emit(text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bellframe", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate a scenario file")
    r.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
    r.add_argument("--out", help="output file (default stdout)")
    r.add_argument("--format", choices=("json", "csv", "text"), default="json")
    r.add_argument("--seed", type=int)
    r.add_argument("--trials", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bound", help="lower bound on the speed of quantum information")
    b.add_argument("--length-m", type=float, required=True)
    b.add_argument("--jitter-s", type=float, required=True)
    b.add_argument("--beta", type=float, default=0.0)
    g = b.add_mutually_exclusive_group()
    g.add_argument("--rho", type=float, default=0.0)
    g.add_argument("--rho-sweep", type=int, metavar="N")
    b.add_argument("--format", choices=("text", "json", "csv"), default="text")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bound)

    bb = sub.add_parser("before-before", help="check a moving-absorber geometry")
    bb.add_argument("--length-m", type=float, required=True)
    bb.add_argument("--speed-mps", type=float, required=True)
    bb.add_argument("--alignment-m", type=float, required=True)
    bb.add_argument("--lab-offset-s", type=float,
                    help="B absorption time minus A's in the lab (default: half the shift)")
    bb.add_argument("--format", choices=("text", "json"), default="text")
    bb.add_argument("--out")
    bb.set_defaults(func=cmd_before_before)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
