"""
Text formats: sequence CSV, per-trial solution CSV, key=value config files
and the JSON run manifest.

Every float is written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import ParseError

TRIAL_COLUMNS = (
    "trial_id",
    "converged",
    "objective",
    "ave_snr",
    "min_snr",
    "r_ac",
    "r_cc",
    "r_ac_max",
    "r_cc_max",
    "e1",
    "e2",
    "e3",
    "kkt_residual",
    "iterations",
    "best",
    "status",
)


def fmt(v):
    """17-significant-digit decimal; ``None`` becomes an empty field."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def _open_text(target, mode):
    if hasattr(target, "write") or hasattr(target, "read"):
        return target, False
    return open(target, mode, newline=""), True


def sequence_header(N):
    cols = ["user"]
    for n in range(1, N + 1):
        cols += [f"re_{n}", f"im_{n}"]
    return cols


def write_sequences(target, seqs):
    """One row per user: ``user,re_1,im_1,...,re_N,im_N``."""
    seqs = np.atleast_2d(np.asarray(seqs, dtype=complex))
    fh, close = _open_text(target, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(sequence_header(seqs.shape[1]))
        for k, row in enumerate(seqs, start=1):
            vals = np.empty(2 * row.size)
            vals[0::2], vals[1::2] = row.real, row.imag
            w.writerow([k] + [fmt(v) for v in vals])
    finally:
        if close:
            fh.close()


def _parse_float(text, line, col):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"column {col}: {text!r} is not a number", line) from None
    if not math.isfinite(v):
        raise ParseError(f"column {col}: non-finite value {text!r}", line)
    return v


def read_sequences(source):
    """Parse a sequence CSV into a complex (K, N) array."""
    fh, close = _open_text(source, "r")
    try:
        rows = list(csv.reader(fh))
    finally:
        if close:
            fh.close()
    if not rows:
        raise ParseError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[0] != "user" or (len(header) - 1) % 2:
        raise ParseError("header must be user,re_1,im_1,...,re_N,im_N", 1)
    N = (len(header) - 1) // 2
    if header != sequence_header(N):
        raise ParseError("header must be user,re_1,im_1,...,re_N,im_N", 1)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2 * N + 1:
            raise ParseError(f"expected {2 * N + 1} fields, found {len(row)}", lineno)
        try:
            user = int(row[0])
        except ValueError:
            raise ParseError(f"user index {row[0]!r} is not an integer", lineno) from None
        if user != len(out) + 1:
            raise ParseError(f"users must be numbered 1, 2, ... in order; found {user}", lineno)
        vals = [_parse_float(c, lineno, j + 2) for j, c in enumerate(row[1:])]
        out.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
    if not out:
        raise ParseError("no sequence rows", len(rows))
    return np.array(out)


def trial_row(rep, ave_snr=None, min_snr=None):
    """CSV fields for one SolveReport (SNR columns may be overridden)."""
    m = rep.metrics
    nan = float("nan")
    feas = rep.feasibility
    return [
        fmt(rep.trial_id),
        fmt(bool(rep.converged)),
        fmt(rep.objective),
        fmt(rep.ave_snr if ave_snr is None else ave_snr),
        fmt(rep.min_snr if min_snr is None else min_snr),
        fmt(m.r_ac if m else nan),
        fmt(m.r_cc if m else nan),
        fmt(m.r_ac_max if m else nan),
        fmt(m.r_cc_max if m else nan),
        fmt(feas.e1),
        fmt(feas.e2),
        fmt(feas.e3),
        fmt(rep.kkt_residual),
        fmt(rep.iterations),
        fmt(bool(rep.best)),
        rep.status,
    ]


def write_table(target, header, rows):
    fh, close = _open_text(target, "w")
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if close:
            fh.close()


def read_table(source):
    """Rows of a headed CSV as a list of dicts (strings)."""
    fh, close = _open_text(source, "r")
    try:
        return list(csv.DictReader(fh))
    finally:
        if close:
            fh.close()


def read_config(path):
    """
    Flat ``key = value`` file; ``#`` starts a comment. Keys use the long flag
    names with dashes or underscores.
    """
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key=value, got {raw.strip()!r}", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        out[key.replace("-", "_")] = value
    return out


def write_manifest(path, manifest):
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def to_string(writer, *args):
    """Run a ``write_*`` function into a string."""
    buf = io.StringIO()
    writer(buf, *args)
    return buf.getvalue()
