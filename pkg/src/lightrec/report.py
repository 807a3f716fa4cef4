"""Run outputs: history/report serialization, plot data and figure files.

All delimited output is written with repr-level float formatting so that
reruns with identical inputs produce bitwise-identical files. Each
plot-data CSV is rendered to a PNG figure next to it.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import MetricsReport

PLOT_KINDS = ("curves", "fairness-bars", "diversity-bars")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def history_columns(history: list[dict]) -> list[str]:
    cols = ["epoch", "loss"]
    for row in history:
        for key in row:
            if key not in cols:
                cols.append(key)
    return cols


def write_history_csv(history: list[dict], path: str) -> None:
    cols = history_columns(history)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for row in history:
            writer.writerow([_fmt(row.get(c)) for c in cols])


def read_history_csv(path: str) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = {}
            for key, val in raw.items():
                if val == "" or val is None:
                    continue
                row[key] = int(val) if key == "epoch" else float(val)
            rows.append(row)
    return rows


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "cutoff": report.cutoff,
        "num_users": report.num_users,
        "recall": report.recall,
        "precision": report.precision,
        "ndcg": report.ndcg,
        "ild": report.ild,
        "fairness": {
            "bins": [{"boundary": b.boundary, "count": b.count, "ndcg": b.value}
                     for b in report.fairness.bins],
            "gap": report.fairness.gap,
            "std": report.fairness.std,
        },
    }


def write_report_json(label: str, reports: dict[int, MetricsReport],
                      path: str) -> None:
    payload = {
        "label": label,
        "cutoffs": {str(k): report_to_dict(r) for k, r in sorted(reports.items())},
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def report_csv_text(label: str, reports: dict[int, MetricsReport]) -> str:
    """Flat CSV: one row per cutoff, fairness bins spread over columns."""
    num_bins = max(len(r.fairness.bins) for r in reports.values())
    cols = ["label", "cutoff", "num_users", "recall", "precision", "ndcg",
            "ild", "fairness_gap", "fairness_std"]
    for b in range(1, num_bins + 1):
        cols += [f"bin{b}_boundary", f"bin{b}_count", f"bin{b}_ndcg"]
    lines = [",".join(cols)]
    for k in sorted(reports):
        r = reports[k]
        row = [label, str(k), str(r.num_users), repr(r.recall),
               repr(r.precision), repr(r.ndcg), repr(r.ild),
               repr(r.fairness.gap), repr(r.fairness.std)]
        for b in r.fairness.bins:
            row += [str(b.boundary), str(b.count), repr(b.value)]
        row += [""] * (len(cols) - len(row))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_report_csv(label: str, reports: dict[int, MetricsReport],
                     path: str) -> None:
    with open(path, "w") as fh:
        fh.write(report_csv_text(label, reports))


def _write_long_csv(rows: list[tuple[str, object, object]], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "x", "y"])
        for series, x, y in rows:
            writer.writerow([series, _fmt(x), _fmt(y)])


def _render_curves(rows, path):
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    for name, x, y in rows:
        series.setdefault(name, ([], []))
        series[name][0].append(x)
        series[name][1].append(y)
    for name, (xs, ys) in series.items():
        ax.plot(xs, ys, marker=".", label=name)
    ax.set_xlabel("epoch")
    ax.set_ylabel("value")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _render_bars(rows, path, xlabel):
    fig, ax = plt.subplots(figsize=(6, 4))
    series = {}
    xs_all = []
    for name, x, y in rows:
        series.setdefault(name, {})[x] = y
        if x not in xs_all:
            xs_all.append(x)
    width = 0.8 / max(1, len(series))
    for si, (name, vals) in enumerate(series.items()):
        offs = [xs_all.index(x) + si * width for x in vals]
        ax.bar(offs, list(vals.values()), width=width, label=name)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(xs_all))])
    ax.set_xticklabels([str(x) for x in xs_all])
    ax.set_xlabel(xlabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_plotdata(kind: str, runs: list[tuple[str, dict]], out_dir: str) -> str:
    """Emit one long-format CSV (series, x, y) plus a rendered figure.

    ``runs`` pairs a series label with that run's loaded data: history
    rows for curves, a report dict (as in report.json) for the bar kinds.
    Returns the CSV path; the PNG sits next to it with the same stem.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}, expected one of {PLOT_KINDS}")
    if not runs:
        raise ValueError("no runs given")
    os.makedirs(out_dir, exist_ok=True)
    rows: list[tuple[str, object, object]] = []

    if kind == "curves":
        for label, history in runs:
            cols = [c for c in history_columns(history)
                    if c not in ("epoch", "loss")]
            if not cols:
                cols = ["loss"]
            for col in cols:
                name = f"{label}:{col}"
                for row in history:
                    if col in row:
                        rows.append((name, row["epoch"], row[col]))
    elif kind == "fairness-bars":
        for label, report in runs:
            cutoff = min(report["cutoffs"], key=int)
            bins = report["cutoffs"][cutoff]["fairness"]["bins"]
            for bi, b in enumerate(bins, start=1):
                rows.append((label, bi, b["ndcg"]))
    else:  # diversity-bars
        for label, report in runs:
            for cutoff in sorted(report["cutoffs"], key=int):
                rows.append((label, int(cutoff), report["cutoffs"][cutoff]["ild"]))

    csv_path = os.path.join(out_dir, f"{kind}.csv")
    _write_long_csv(rows, csv_path)
    png_path = os.path.join(out_dir, f"{kind}.png")
    if kind == "curves":
        _render_curves(rows, png_path)
    else:
        _render_bars(rows, png_path,
                     xlabel="interaction bin" if kind == "fairness-bars" else "cutoff")
    return csv_path
