"""Command line interface: ``uqeval eval | sweep | diagram | calibrate | synth``.

Exit codes: 0 success, 2 unreadable input or bad usage, 3 a metric was
undefined for the data (the other metrics are still written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import synth
from .calibration import calibration_report, parse_scheme
from .core import accuracy
from .exceptions import DumpParseError, MissingLogits, UQEvalError
from .io import fmt_float, read_dump, write_dump
from .report import (DEFAULT_SCHEMES, curve_csv, dumps_json, eval_report, reliability_csv,
                     reliability_svg)
from .selective import perturb_m, selective_report
from .temperature import apply_temperature, fit_temperature

log = logging.getLogger("uqeval")

EXIT_OK, EXIT_PARSE, EXIT_DEGENERATE = 0, 2, 3

SWEEP_COLUMNS = ("name", "parameter_count", "accuracy", "auroc", "aupr", "aurc",
                 "ece", "aece", "mce", "amce")


class _Fail(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _write(path, text):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load(path, args, name=None):
    try:
        return read_dump(path, fmt=args.format, loss_column=args.loss_column, name=name)
    except DumpParseError as exc:
        raise _Fail(EXIT_PARSE, f"{path}: {exc}") from None
    except (UQEvalError, OSError) as exc:
        raise _Fail(EXIT_PARSE, f"{path}: {exc}") from None


def _schemes(args):
    names = args.scheme or list(DEFAULT_SCHEMES)
    try:
        return [parse_scheme(s).name for s in names]
    except ValueError as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None


def _safe_name(scheme):
    return scheme.replace(":", "_")


def cmd_eval(args):
    data = _load(args.dump, args)
    schemes = _schemes(args)
    report, sel, cals = eval_report(data, schemes)
    out = args.out
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "report.json"), dumps_json(report))
    if args.curves:
        for curve in (sel.roc, sel.pr, sel.rc):
            if curve is not None:
                _write(os.path.join(out, f"{curve.kind.value.lower()}_curve.csv"), curve_csv(curve))
    if args.diagrams:
        for cal in cals:
            stem = os.path.join(out, f"reliability_{_safe_name(cal.scheme)}")
            _write(stem + ".csv", reliability_csv(cal))
            _write(stem + ".svg", reliability_svg(cal, title=f"{data.name} {cal.scheme}"))
    print(os.path.join(out, "report.json"))
    for field, msg in report["errors"].items():
        log.warning("%s undefined: %s", field, msg)
    return EXIT_DEGENERATE if report["errors"] else EXIT_OK


def _read_manifest(path):
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8") as fh:
            if path.lower().endswith(".csv"):
                entries = list(csv.DictReader(fh))
                metrics = None
            else:
                doc = json.load(fh)
                if isinstance(doc, list):
                    entries, metrics = doc, None
                else:
                    entries, metrics = doc.get("models", []), doc.get("metrics")
    except (OSError, json.JSONDecodeError, csv.Error) as exc:
        raise _Fail(EXIT_PARSE, f"cannot read manifest {path}: {exc}") from None
    if not entries:
        raise _Fail(EXIT_PARSE, f"manifest {path} lists no models")
    models, seen = [], set()
    for i, e in enumerate(entries):
        try:
            name = str(e["name"])
            count = int(e["parameter_count"])
            dump = str(e.get("path") or e["dump_path"])
        except (KeyError, TypeError, ValueError):
            raise _Fail(EXIT_PARSE, f"manifest entry {i}: need name, parameter_count, path") \
                from None
        if count <= 0:
            raise _Fail(EXIT_PARSE, f"manifest entry {i}: parameter_count must be positive")
        full = os.path.normpath(os.path.join(base, dump))
        if full in seen:
            raise _Fail(EXIT_PARSE, f"manifest entry {i}: duplicate path {dump}")
        seen.add(full)
        models.append((name, count, full))
    if metrics is not None:
        unknown = set(metrics) - set(SWEEP_COLUMNS[2:])
        if unknown:
            raise _Fail(EXIT_PARSE, f"unknown metrics in manifest: {sorted(unknown)}")
    return models, metrics


def _sweep_row(entry, args):
    name, count, path = entry
    row = dict.fromkeys(SWEEP_COLUMNS)
    row["name"], row["parameter_count"] = name, count
    try:
        data = read_dump(path, fmt=args.format, loss_column=args.loss_column, name=name)
    except (UQEvalError, OSError) as exc:
        return row, f"{name}: {exc}"
    sel = selective_report(data)
    er = calibration_report(data, "equal-range:10")
    ad = calibration_report(data, "adaptive:0.2")
    row.update(accuracy=accuracy(data), auroc=sel.auroc, aupr=sel.aupr, aurc=sel.aurc,
               ece=er.ece, aece=ad.ece, mce=er.mce, amce=ad.mce)
    return row, None


def cmd_sweep(args):
    models, metrics = _read_manifest(args.manifest)
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda e: _sweep_row(e, args), models))
    failed = [err for _, err in results if err]
    for err in failed:
        log.warning("%s", err)
    rows = sorted((r for r, _ in results), key=lambda r: -r["parameter_count"])
    cols = list(SWEEP_COLUMNS[:2]) + [c for c in SWEEP_COLUMNS[2:]
                                      if metrics is None or c in metrics]
    lines = [",".join(cols)]
    for r in rows:
        lines.append(",".join(_cell(r[c]) for c in cols))
    out = os.path.join(args.out, "sweep.csv")
    os.makedirs(args.out, exist_ok=True)
    _write(out, "\n".join(lines) + "\n")
    print(out)
    if len(failed) == len(results):
        return EXIT_PARSE
    return EXIT_OK


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return fmt_float(v)
    text = str(v)
    if any(ch in text for ch in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def cmd_diagram(args):
    data = _load(args.dump, args)
    scheme = _schemes(args)[0] if args.scheme else "equal-range:10"
    cal = calibration_report(data, scheme)
    svg_path = args.out
    stem, ext = os.path.splitext(svg_path)
    if ext.lower() != ".svg":
        stem = svg_path
        svg_path = stem + ".svg"
    _write(svg_path, reliability_svg(cal, title=f"{data.name} {cal.scheme}"))
    _write(stem + ".csv", reliability_csv(cal))
    print(svg_path)
    return EXIT_OK


def cmd_calibrate(args):
    data = _load(args.dump, args)
    if not data.has_logits:
        raise _Fail(EXIT_PARSE, f"{args.dump}: dump has no label/logit columns")
    try:
        model = fit_temperature(data)
        scaled = apply_temperature(data, model)
    except MissingLogits as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None
    write_dump(scaled, args.out, fmt=args.out_format, loss_column=args.loss_column)
    payload = {"temperature": model.temperature_, "nll": model.nll_,
               "accuracy": accuracy(scaled)}
    if args.report:
        _write(args.report, dumps_json(payload))
    sys.stdout.write(dumps_json(payload))
    return EXIT_OK


def _levels(text):
    out = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise _Fail(EXIT_PARSE, f"bad level {part!r}; expected r:accuracy:count")
        out.append((float(bits[0]), float(bits[1]), int(bits[2])))
    return out


def cmd_synth(args):
    kind = args.kind
    params = {"seed": args.seed}
    if kind != "discrete":
        if args.n is None:
            raise _Fail(EXIT_PARSE, "--n is required")
        params["n"] = args.n
    if kind == "calibrated":
        a, _, b = args.shape.partition(",")
        params["shape"] = (float(a), float(b or a))
    elif kind == "discrete":
        if not args.levels:
            raise _Fail(EXIT_PARSE, "--levels is required for kind=discrete")
        params["levels"] = _levels(args.levels)
    elif kind == "logits":
        params.update(k=args.classes, true_temperature=args.temperature)
    elif kind == "scored":
        params.update(accuracy=args.accuracy, separability=args.separability)
    try:
        data = synth.generate(kind, **params)
        if args.perturb_m:
            data = perturb_m(data, args.perturb_m)
    except UQEvalError as exc:
        raise _Fail(EXIT_PARSE, str(exc)) from None
    write_dump(data, args.out, fmt=args.format, loss_column=args.loss_column)
    print(args.out)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "jsonl"),
                        help="dump format (default: from the file extension)")
    common.add_argument("--loss-column", default="loss",
                        help="column holding the per-item loss (default: loss)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="uqeval", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("eval", parents=[common], help="metric report for one dump")
    e.add_argument("dump")
    e.add_argument("--scheme", action="append",
                   help="binning scheme such as equal-range:10 or adaptive:0.2 (repeatable)")
    e.add_argument("--out", default=".", help="output directory")
    e.add_argument("--curves", action="store_true", help="also write ROC/PR/RC curve CSVs")
    e.add_argument("--diagrams", action="store_true",
                   help="also write reliability diagram CSV and SVG per scheme")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common], help="one metric row per model in a manifest")
    s.add_argument("manifest", help="JSON or CSV manifest of name, parameter_count, path")
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("diagram", parents=[common], help="reliability diagram SVG + CSV")
    d.add_argument("dump")
    d.add_argument("--scheme", action="append")
    d.add_argument("--out", required=True, help="SVG path; the CSV goes next to it")
    d.set_defaults(func=cmd_diagram)

    c = sub.add_parser("calibrate", parents=[common], help="fit and apply temperature scaling")
    c.add_argument("dump")
    c.add_argument("--out", required=True, help="calibrated dump path")
    c.add_argument("--out-format", choices=("csv", "jsonl"))
    c.add_argument("--report", help="also write the fitted temperature to this JSON file")
    c.set_defaults(func=cmd_calibrate)

    g = sub.add_parser("synth", parents=[common], help="write a synthetic prediction dump")
    g.add_argument("--kind", required=True,
                   choices=("calibrated", "undetectable", "discrete", "logits", "scored"))
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
    g.add_argument("--out", required=True)
    g.add_argument("--shape", default="1,1", help="beta shape a,b for kind=calibrated")
    g.add_argument("--levels", help="r:accuracy:count,... for kind=discrete")
    g.add_argument("--classes", type=int, default=10)
    g.add_argument("--temperature", type=float, default=1.0)
    g.add_argument("--accuracy", type=float, default=0.953)
    g.add_argument("--separability", type=float, default=2.0)
    g.add_argument("--perturb-m", type=int, default=0,
                   help="flip the m least confident correct predictions")
    g.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="uqeval: %(message)s")
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"uqeval: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
