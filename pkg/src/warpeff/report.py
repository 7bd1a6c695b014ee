"""Result records and CSV/JSON emission, plus figure rendering for traces.

The delimited schema is stable: scenario_id, command, key, value, margin,
status (UTF-8, \\n line endings). Wall time travels as its own key row so
that the remaining rows are byte-reproducible across runs. Long-format
traces (t, quantity, value) go to a companion file, and trace-producing
commands also render a figure next to the delimited output.
"""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field

CSV_COLUMNS = ["scenario_id", "command", "key", "value", "margin", "status"]


@dataclass
class ResultRecord:
    scenario_id: str
    command: str
    scenario_hash: str
    status: str = "pass"                 # pass | fail | error
    values: list = field(default_factory=list)   # (key, value, margin, status)
    trace: list = field(default_factory=list)    # (t, quantity, value)
    wall_time: float = 0.0

    def add(self, key, value, margin=None, status="pass"):
        self.values.append((str(key), value, margin, status))
        if status == "fail" and self.status == "pass":
            self.status = "fail"

    def add_trace(self, t, quantity, value):
        self.trace.append((float(t), str(quantity), float(value)))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def render_csv(records, include_wall_time: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in sorted(records, key=lambda r: r.scenario_id):
        writer.writerow([rec.scenario_id, rec.command, "scenario_hash",
                         rec.scenario_hash, "", rec.status])
        for key, value, margin, status in rec.values:
            writer.writerow([rec.scenario_id, rec.command, key,
                             _fmt(value), _fmt(margin), status])
        if include_wall_time:
            writer.writerow([rec.scenario_id, rec.command, "wall_time_s",
                             f"{rec.wall_time:.3f}", "", "info"])
    return buf.getvalue()


def render_json(records) -> str:
    payload = []
    for rec in sorted(records, key=lambda r: r.scenario_id):
        payload.append({
            "scenario_id": rec.scenario_id,
            "command": rec.command,
            "scenario_hash": rec.scenario_hash,
            "status": rec.status,
            "wall_time_s": round(rec.wall_time, 3),
            "values": [
                {"key": k, "value": v, "margin": m, "status": s}
                for k, v, m, s in rec.values],
            "trace": [
                {"t": t, "quantity": q, "value": v}
                for t, q, v in rec.trace],
        })
    return json.dumps(payload, indent=2, default=float) + "\n"


def render_trace_csv(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["scenario_id", "t", "quantity", "value"])
    for rec in sorted(records, key=lambda r: r.scenario_id):
        for t, quantity, value in rec.trace:
            writer.writerow([rec.scenario_id, _fmt(t), quantity,
                             _fmt(value)])
    return buf.getvalue()


def emit(records, fmt: str, path: str) -> list:
    """Write records to ``path``; returns the list of files written.

    CSV output adds a companion ``*_trace.csv`` and a rendered figure
    when any record carries a trace; JSON embeds traces inline.
    """
    written = []
    if fmt == "json":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_json(records))
        written.append(path)
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(render_csv(records))
        written.append(path)
        if any(rec.trace for rec in records):
            base, _ = os.path.splitext(path)
            tpath = base + "_trace.csv"
            with open(tpath, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(render_trace_csv(records))
            written.append(tpath)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if any(rec.trace for rec in records):
        base, _ = os.path.splitext(path)
        fig_path = base + ".png"
        render_figure(records, fig_path)
        written.append(fig_path)
    return written


def render_figure(records, path: str) -> None:
    """Render all traces to one figure, one panel per quantity."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    quantities = sorted({q for rec in records for _, q, _ in rec.trace})
    if not quantities:
        return
    fig, axes = plt.subplots(len(quantities), 1, squeeze=False,
                             figsize=(7, 2.6 * len(quantities)),
                             sharex=True)
    for ax, quantity in zip(axes[:, 0], quantities):
        for rec in sorted(records, key=lambda r: r.scenario_id):
            pts = [(t, v) for t, q, v in rec.trace if q == quantity]
            if not pts:
                continue
            ts, vs = zip(*sorted(pts))
            ax.plot(ts, vs, marker=".", label=rec.scenario_id)
        ax.set_ylabel(quantity)
        ax.axhline(0.0, color="gray", lw=0.5)
        ax.legend(fontsize=7, loc="best")
    axes[-1, 0].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
