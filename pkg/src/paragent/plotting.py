"""Timeline figure rendering.

Reads the executor's timeline CSV, validates its invariants, and renders a
static SVG of running workers vs pending tasks. Output is byte-deterministic
for identical input (fixed SVG hash salt, no embedded dates) so figures can
be diffed like any other artifact.
"""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .executor import TIMELINE_COLUMNS  # noqa: E402

_SVG_SALT = "paragent-timeline"


class MalformedTimeline(ValueError):
    pass


def read_timeline(path) -> list[dict]:
    """Parse and validate a timeline CSV; row numbers in errors are 1-based
    data rows (the header is row 0)."""
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise MalformedTimeline(f"{path}: empty file") from None
            if tuple(header) != TIMELINE_COLUMNS:
                raise MalformedTimeline(f"{path}: bad header {header!r}")
            rows = []
            for lineno, raw in enumerate(reader, start=1):
                if len(raw) != len(TIMELINE_COLUMNS):
                    raise MalformedTimeline(f"{path}: row {lineno}: expected "
                                            f"{len(TIMELINE_COLUMNS)} fields, got {len(raw)}")
                try:
                    values = [int(v) for v in raw]
                except ValueError:
                    raise MalformedTimeline(f"{path}: row {lineno}: non-integer field") from None
                rows.append(dict(zip(TIMELINE_COLUMNS, values)))
    except OSError as exc:
        raise MalformedTimeline(f"cannot read {path}: {exc}") from exc

    previous_t = None
    previous_total = None
    for lineno, row in enumerate(rows, start=1):
        if any(row[c] < 0 for c in TIMELINE_COLUMNS):
            raise MalformedTimeline(f"{path}: row {lineno}: negative value")
        if row["workers_busy"] != row["running"]:
            raise MalformedTimeline(f"{path}: row {lineno}: workers_busy != running")
        if row["workers_busy"] > row["workers_total"]:
            raise MalformedTimeline(f"{path}: row {lineno}: workers_busy > workers_total")
        if previous_t is not None and row["t_ms"] < previous_t:
            raise MalformedTimeline(f"{path}: row {lineno}: t_ms decreases")
        total = row["pending"] + row["running"] + row["completed"]
        if previous_total is not None and total < previous_total:
            raise MalformedTimeline(f"{path}: row {lineno}: conservation broken "
                                    f"(submitted total shrank from {previous_total} to {total})")
        previous_t = row["t_ms"]
        previous_total = total
    return rows


def render_timeline(rows: list[dict], dest, title: str = "") -> Path:
    """Render running-worker and pending-task series against time as SVG."""
    dest = Path(dest)
    t = [row["t_ms"] / 1000.0 for row in rows]
    running = [row["running"] for row in rows]
    pending = [row["pending"] for row in rows]
    with plt.rc_context({"svg.hashsalt": _SVG_SALT}):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        ax.plot(t, running, drawstyle="steps-post", color="tab:blue", label="running workers")
        ax.plot(t, pending, drawstyle="steps-post", color="tab:orange", label="pending tasks")
        ax.set_xlabel("time (s)")
        ax.set_ylabel("count")
        if title:
            ax.set_title(title)
        ax.legend(loc="upper right")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        dest.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(dest, format="svg", metadata={"Date": None})
        plt.close(fig)
    return dest


def plot_timeline(csv_path, svg_path, title: str = "") -> Path:
    return render_timeline(read_timeline(csv_path), svg_path, title=title)
