"""Reading and writing prediction dumps (CSV or JSON Lines).

A dump holds one record per line with the columns ``confidence`` and
``correct`` (required), ``loss`` (optional, empty for the 0/1 default), and
``label`` plus ``logit_0 .. logit_{K-1}`` (optional, together).  CSV files need
a header row.  Floats are written with the shortest repr that round-trips.
"""

from __future__ import annotations

import csv
import json
import math
import os
import re
from typing import Optional

import numpy as np

from .core import EvaluationSet
from .exceptions import DumpParseError, EmptySet

__all__ = ["read_dump", "write_dump", "infer_format", "fmt_float"]

_LOGIT = re.compile(r"^logit_(\d+)$")
_TRUE = {"1", "1.0", "true", "True", "TRUE"}
_FALSE = {"0", "0.0", "false", "False", "FALSE"}


def fmt_float(x) -> str:
    """Shortest round-trip text for a float; empty for None/NaN."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def infer_format(path, fmt: Optional[str] = None) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in ("csv", "jsonl"):
            raise ValueError(f"unsupported dump format {fmt!r}")
        return fmt
    ext = os.path.splitext(str(path))[1].lower()
    return "jsonl" if ext in (".jsonl", ".ndjson") else "csv"


class _Rows:
    """Accumulates parsed rows and checks each one as it arrives."""

    def __init__(self):
        self.conf, self.corr, self.loss, self.labels, self.logits = [], [], [], [], []
        self.width = None

    def add(self, line, conf, corr, loss, label, logits):
        if not 0.0 <= conf <= 1.0:
            raise DumpParseError(f"confidence {conf!r} outside [0, 1]", line)
        if loss is not None and not 0.0 <= loss <= 1.0:
            raise DumpParseError(f"loss {loss!r} outside [0, 1]", line)
        has_logits = logits is not None
        if self.width is None:
            self.width = len(logits) if has_logits else 0
        if (len(logits) if has_logits else 0) != self.width:
            raise DumpParseError("logits must be present on every row or on none", line)
        if has_logits:
            if label is None:
                raise DumpParseError("logits given without a label", line)
            if not 0 <= label < len(logits):
                raise DumpParseError(f"label {label} outside [0, {len(logits)})", line)
            if any(not math.isfinite(v) for v in logits):
                raise DumpParseError("logits must be finite", line)
            if int(np.argmax(logits) == label) != corr:
                raise DumpParseError("correct flag disagrees with argmax(logits) == label", line)
        self.conf.append(conf)
        self.corr.append(corr)
        self.loss.append(loss)
        self.labels.append(label)
        self.logits.append(logits)

    def build(self, name):
        if not self.conf:
            raise EmptySet("dump contains no records")
        loss = self.loss if any(v is not None for v in self.loss) else None
        logits = labels = None
        if self.width:
            logits, labels = self.logits, self.labels
        return EvaluationSet.from_arrays(self.conf, self.corr, loss=loss, logits=logits,
                                         labels=labels, name=name)


def _num(text, what, line):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise DumpParseError(f"{what} {text!r} is not a number", line) from None
    if math.isnan(v):
        raise DumpParseError(f"{what} is NaN", line)
    return v


def _flag(text, line):
    if isinstance(text, bool):
        return int(text)
    t = str(text).strip()
    if t in _TRUE:
        return 1
    if t in _FALSE:
        return 0
    raise DumpParseError(f"correct must be 0/1 or true/false, got {text!r}", line)


def _label(text, line):
    v = _num(text, "label", line)
    if v != int(v):
        raise DumpParseError(f"label {text!r} is not an integer", line)
    return int(v)


def _read_csv(fh, loss_column, rows):
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DumpParseError("missing header row", 1) from None
    header = [h.strip() for h in header]
    col = {h: i for i, h in enumerate(header)}
    for req in ("confidence", "correct"):
        if req not in col:
            raise DumpParseError(f"header lacks required column {req!r}", 1)
    logit_cols = sorted(((int(m.group(1)), i) for h, i in col.items()
                         if (m := _LOGIT.match(h))))
    if [k for k, _ in logit_cols] != list(range(len(logit_cols))):
        raise DumpParseError("logit columns must be logit_0 .. logit_{K-1}", 1)
    if logit_cols and "label" not in col:
        raise DumpParseError("logit columns present but no label column", 1)
    loss_i = col.get(loss_column)
    for row in reader:
        line = reader.line_num
        if not row or all(not f.strip() for f in row):
            continue
        if len(row) != len(header):
            raise DumpParseError(f"expected {len(header)} fields, got {len(row)}", line)
        conf = _num(row[col["confidence"]], "confidence", line)
        corr = _flag(row[col["correct"]], line)
        loss = None
        if loss_i is not None and row[loss_i].strip():
            loss = _num(row[loss_i], "loss", line)
        label = logits = None
        if logit_cols:
            logits = [_num(row[i], f"logit_{k}", line) for k, i in logit_cols]
            label = _label(row[col["label"]], line)
        rows.add(line, conf, corr, loss, label, logits)


def _read_jsonl(fh, loss_column, rows):
    for line, text in enumerate(fh, start=1):
        if not text.strip():
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DumpParseError(f"invalid JSON ({exc.msg})", line) from None
        if not isinstance(obj, dict):
            raise DumpParseError("each line must be a JSON object", line)
        for req in ("confidence", "correct"):
            if req not in obj:
                raise DumpParseError(f"missing required field {req!r}", line)
        conf = _num(obj["confidence"], "confidence", line)
        corr = _flag(obj["correct"], line)
        loss = obj.get(loss_column)
        loss = None if loss is None else _num(loss, "loss", line)
        logits = obj.get("logits")
        if logits is None:
            keyed = sorted((int(m.group(1)), v) for k, v in obj.items() if (m := _LOGIT.match(k)))
            if keyed:
                if [k for k, _ in keyed] != list(range(len(keyed))):
                    raise DumpParseError("logit keys must be logit_0 .. logit_{K-1}", line)
                logits = [v for _, v in keyed]
        label = None
        if logits is not None:
            if not isinstance(logits, list):
                raise DumpParseError("logits must be a list", line)
            logits = [_num(v, "logit", line) for v in logits]
            if "label" not in obj:
                raise DumpParseError("logits given without a label", line)
            label = _label(obj["label"], line)
        rows.add(line, conf, corr, loss, label, logits)


def read_dump(path, fmt: Optional[str] = None, loss_column: str = "loss",
              name: Optional[str] = None) -> EvaluationSet:
    """Parse a dump file into an :class:`EvaluationSet`.

    Raises :class:`~uqeval.exceptions.DumpParseError` naming the line of the
    first bad record.
    """
    fmt = infer_format(path, fmt)
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    rows = _Rows()
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            if fmt == "csv":
                _read_csv(fh, loss_column, rows)
            else:
                _read_jsonl(fh, loss_column, rows)
    except UnicodeDecodeError as exc:
        raise DumpParseError(f"file is not valid UTF-8 ({exc.reason})") from None
    return rows.build(name)


def write_dump(eval_set: EvaluationSet, path, fmt: Optional[str] = None,
               loss_column: str = "loss") -> None:
    fmt = infer_format(path, fmt)
    n = len(eval_set)
    cols = ["confidence", "correct"]
    has_loss = eval_set.loss is not None
    if has_loss:
        cols.append(loss_column)
    k = eval_set.logits.shape[1] if eval_set.has_logits else 0
    if k:
        cols += ["label"] + [f"logit_{j}" for j in range(k)]
    conf = eval_set.confidence.tolist()
    corr = eval_set.correct.tolist()
    loss = eval_set.loss.tolist() if has_loss else None
    labels = eval_set.labels.tolist() if k else None
    logits = eval_set.logits.tolist() if k else None
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for i in range(n):
                row = [fmt_float(conf[i]), str(corr[i])]
                if has_loss:
                    row.append(fmt_float(loss[i]))
                if k:
                    row.append(str(labels[i]))
                    row += [fmt_float(v) for v in logits[i]]
                w.writerow(row)
        else:
            for i in range(n):
                obj = {"confidence": conf[i], "correct": corr[i]}
                if has_loss:
                    obj[loss_column] = None if math.isnan(loss[i]) else loss[i]
                if k:
                    obj["label"] = labels[i]
                    for j, v in enumerate(logits[i]):
                        obj[f"logit_{j}"] = v
                fh.write(json.dumps(obj) + "\n")
