"""Reading force curves and writing analysis artifacts."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from pathlib import Path

import numpy as np

from .model import ConfigurationError, ForceCurve

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("iter", "gamma", "x_gamma", "sigma1_sq", "sigma2_sq", "b0", "E")


class CurveFormatError(ConfigurationError):
    """Malformed force-curve file."""


def _fmt(v) -> str:
    """Shortest string that round-trips the float exactly."""
    if v is None:
        return ""
    return repr(float(v))


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def parse_curve_csv(path, position_unit_in_meters=1.0, force_unit_in_newtons=1.0) -> ForceCurve:
    """Read a two-column ``position, force`` file.

    Comma or tab delimited; a single non-numeric header line is skipped.
    Rows are sorted by position (with a warning if that reorders them) and
    duplicate positions are rejected.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CurveFormatError(f"{path}: cannot read ({exc.strerror})") from exc
    rows, lines = [], []
    first = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in (line.split("\t") if "\t" in line else line.split(","))]
        if len(cells) != 2:
            raise CurveFormatError(f"{path}:{lineno}: expected 2 columns, found {len(cells)}")
        try:
            vals = (float(cells[0]), float(cells[1]))
        except ValueError:
            if first and not any(_is_number(c) for c in cells):
                first = False
                continue
            raise CurveFormatError(f"{path}:{lineno}: non-numeric value in {line!r}") from None
        first = False
        if not all(math.isfinite(v) for v in vals):
            raise CurveFormatError(f"{path}:{lineno}: non-finite value")
        rows.append(vals)
        lines.append(lineno)
    if len(rows) < 4:
        raise CurveFormatError(f"{path}: need at least 4 data rows, found {len(rows)}")
    data = np.asarray(rows)
    order = np.argsort(data[:, 0], kind="stable")
    if np.any(order != np.arange(order.size)):
        log.warning("%s: rows reordered by increasing position", path)
    data = data[order]
    line_no = np.asarray(lines)[order]
    dup = np.flatnonzero(np.diff(data[:, 0]) == 0)
    if dup.size:
        a, b = sorted((line_no[dup[0]], line_no[dup[0] + 1]))
        raise CurveFormatError(f"{path}:{b}: duplicate position {float(data[dup[0], 0])!r} (also on line {a})")
    return ForceCurve(data[:, 0], data[:, 1], position_unit_in_meters, force_unit_in_newtons)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc
    return path


def report_to_json(report) -> str:
    return dumps(report.to_dict())


def report_from_json(text: str):
    from .inference import PosteriorReport

    return PosteriorReport.from_dict(json.loads(text))


def histogram_csv(hist: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("bin_left", "bin_right", "count"))
    for a, b, c in zip(hist["bin_left"], hist["bin_right"], hist["count"]):
        w.writerow((_fmt(a), _fmt(b), int(c)))
    return buf.getvalue()


def trace_csv(trace, E=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    burn, thin = int(trace.meta["burn_in"]), int(trace.meta["thin"])
    for i in range(len(trace)):
        w.writerow((
            burn + i * thin,
            _fmt(trace.gamma[i]), _fmt(trace.x_gamma[i]),
            _fmt(trace.sigma1_sq[i]), _fmt(trace.sigma2_sq[i]), _fmt(trace.b0[i]),
            "" if E is None else _fmt(E[i]),
        ))
    return buf.getvalue()


def emit_report(report, out_dir, trace=None, E=None):
    """Write ``report.json``, histogram CSVs and, if given, ``trace.csv``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot create {out}: {exc.strerror}") from exc
    files = [_write(out / "report.json", report_to_json(report))]
    for name, hist in report.histograms.items():
        files.append(_write(out / f"hist_{name}.csv", histogram_csv(hist)))
    if trace is not None:
        files.append(_write(out / "trace.csv", trace_csv(trace, E)))
    return files


def read_truth(csv_path):
    p = Path(csv_path)
    side = p.with_name(p.stem + ".truth.json")
    if side.exists():
        return json.loads(side.read_text())
    return None
