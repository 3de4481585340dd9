"""Report rows, CSV/aligned-text output and the time-of-day seizure histogram."""
from __future__ import annotations

import csv
import io
import math
from typing import Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..signal_io.labeling import merge_leading_seizures

REPORT_COLUMNS = ("subject", "n_seizures", "predicted", "sen_pct", "sen_sd",
                  "interictal_hours", "false_alarms", "fpr", "fpr_sd", "p_value",
                  "status", "notes")


def _f(x, nd):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.{nd}f}"


def report_rows(results: Sequence, failures: Optional[dict] = None) -> list:
    """One row per subject (sorted by name) plus a pooled ``Total`` row.

    Subject rows average sensitivity and FPR over repeats and carry the
    worst-case p-value.  The total pools seizures, predictions, false alarms
    and interictal hours over subjects.
    """
    rows = []
    for r in sorted(results, key=lambda r: r.subject):
        rows.append({
            "subject": r.subject, "n_seizures": str(r.n_seizures),
            "predicted": _f(float(np.mean(r.predicted)), 1),
            "sen_pct": _f(r.sen_pct, 1), "sen_sd": _f(r.sen_sd, 1),
            "interictal_hours": _f(r.interictal_hours, 2),
            "false_alarms": _f(float(np.mean(r.false_alarms)), 1),
            "fpr": _f(r.fpr, 3), "fpr_sd": _f(r.fpr_sd, 3), "p_value": _f(r.p_value, 4),
            "status": r.status, "notes": "; ".join(r.notes)})
    for name, msg in sorted((failures or {}).items()):
        rows.append({c: "" for c in REPORT_COLUMNS} | {"subject": name, "status": "failed",
                                                       "notes": msg})
    if results:
        K = sum(r.n_seizures for r in results)
        pred = sum(float(np.mean(r.predicted)) for r in results)
        hours = sum(r.interictal_hours for r in results)
        fa = sum(float(np.mean(r.false_alarms)) for r in results)
        rows.append({"subject": "Total", "n_seizures": str(K), "predicted": _f(pred, 1),
                     "sen_pct": _f(100.0 * pred / K, 1), "sen_sd": "",
                     "interictal_hours": _f(hours, 2), "false_alarms": _f(fa, 1),
                     "fpr": _f(fa / hours, 3), "fpr_sd": "", "p_value": "",
                     "status": "", "notes": ""})
    return rows


def report_csv(rows: Sequence[dict], header: Optional[str] = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(header.rstrip("\n") + "\n")
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def report_table(rows: Sequence[dict]) -> str:
    """Aligned text table: patient, seizures, interictal hours, SEN, FPR, p-value."""
    head = ("Patient", "No. of seizures", "Interictal hours", "SEN (%)", "FPR (/h)", "p-value")
    body = []
    for r in rows:
        sen = r["sen_pct"] + (f" ± {r['sen_sd']}" if r["sen_sd"] not in ("", "0.0") else "")
        fpr = r["fpr"] + (f" ± {r['fpr_sd']}" if r["fpr_sd"] not in ("", "0.000") else "")
        body.append((r["subject"], r["n_seizures"], r["interictal_hours"], sen, fpr,
                     r["p_value"] if r["status"] != "failed" else "failed"))
    widths = [max(len(str(x)) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(str(x).ljust(wd) for x, wd in zip(head, widths)).rstrip(),
             "  ".join("-" * wd for wd in widths)]
    for i, b in enumerate(body):
        if b[0] == "Total" and i:
            lines.append("  ".join("-" * wd for wd in widths))
        lines.append("  ".join(str(x).ljust(wd) for x, wd in zip(b, widths)).rstrip())
    return "\n".join(lines) + "\n"


def seizure_time_histogram(records: Sequence, bin_hours: float = 1.0,
                           merge_gap: float = 1800.0, tz_offset_hours: float = 0.0):
    """Counts of leading-seizure onsets per time-of-day bin.

    ``records`` carry absolute start times (seconds since the epoch).
    Returns ``(bin_edges_hours, counts)`` over a 24 h day.
    """
    if bin_hours <= 0 or (24.0 / bin_hours) != int(24.0 / bin_hours):
        raise ValidationError(f"bin_hours must divide 24, got {bin_hours}")
    events = []
    for rec in records:
        if rec.start_time is None or math.isnan(rec.start_time):
            raise ValidationError(
                "record has no wall-clock start time; time-of-day histogram needs start_time")
        events.extend(ev.shifted(rec.start_time) for ev in rec.annotations)
    events.sort(key=lambda e: (e.onset, e.offset))
    leading = merge_leading_seizures(events, merge_gap)
    n_bins = int(round(24.0 / bin_hours))
    hours = np.array([((ev.onset / 3600.0) + tz_offset_hours) % 24.0 for ev in leading])
    idx = np.minimum((hours / bin_hours).astype(int), n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins)
    return np.arange(n_bins + 1) * bin_hours, counts
