"""Result CSV: one row per (sweep point, variant, node)."""

from __future__ import annotations

import csv
import io
from pathlib import Path

HEADER = ["scenario", "variant", "eta", "node", "steady_state_mse", "mean_mse", "bias_norm", "trials", "seed"]
FLOAT_FIELDS = ("eta", "steady_state_mse", "mean_mse", "bias_norm")
INT_FIELDS = ("node", "trials", "seed")


def fmt(x):
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


def result_rows(result):
    cfg = result.config
    for point in result.points:
        for variant in cfg.variants:
            s = point.series[variant]
            for i, (ss, mm, bn) in enumerate(zip(s.steady_state_mse, s.mean_mse, s.bias_norm)):
                yield [cfg.name, variant, fmt(point.eta), str(i + 1), fmt(ss), fmt(mm), fmt(bn),
                       str(s.trials), str(cfg.seed)]


def to_csv_text(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    if result is not None:
        w.writerows(result_rows(result))
    return buf.getvalue()


def emit_csv(result, path):
    """Write ``result`` (or just the header for ``None``/empty sweeps) to ``path``."""
    path = Path(path)
    text = to_csv_text(result)
    try:
        with path.open("w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc
    return path


def parse_csv(text):
    """Rows as dicts with floats and ints decoded."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != HEADER:
        raise ValueError(f"unexpected header {reader.fieldnames}")
    rows = []
    for row in reader:
        for k in FLOAT_FIELDS:
            row[k] = float(row[k])
        for k in INT_FIELDS:
            row[k] = int(row[k])
        rows.append(row)
    return rows


def read_csv(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read {path}: {exc.strerror}") from exc
    return parse_csv(text)
