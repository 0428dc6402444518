"""Delimited output and figure rendering for analysis presets.

The CLI's report path funnels through here: every preset produces a CSV of
plain rows and, next to it, a PNG visualising the same table.  Figures use
the Agg backend so rendering works headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .errors import InvalidInputError


def write_csv(rows: list[dict], path: str | Path) -> Path:
    """Write rows to `path` as CSV with a header from the first row's keys."""
    if not rows:
        raise InvalidInputError("no rows to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(rows[0].keys())
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def _agg_pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_committee_tail(rows: list[dict], path: str | Path) -> Path:
    """Exact tail vs closed-form bound vs Hoeffding over committee size."""
    plt = _agg_pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xs = [row["n_mu"] for row in rows]
    for key, style in (("exact", "-"), ("bound", "--"), ("hoeffding", ":")):
        ax.plot(xs, [max(row[key], 1e-300) for row in rows], style, label=key)
    ax.set_yscale("log")
    ax.set_xlabel("committee size $n_\\mu$")
    ax.set_ylabel("failure probability")
    ax.set_title("Single-committee failure: exact vs bounds")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def render_events(rows: list[dict], path: str | Path) -> Path:
    """delta(event) as a function of K, one line per adversary model."""
    plt = _agg_pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    label = rows[0]["event"] if rows else "event"
    for model in sorted({row["model"] for row in rows}):
        sub = [row for row in rows if row["model"] == model]
        xs = [row["K"] for row in sub]
        ax.plot(xs, [max(row["bound"], 1e-300) for row in sub], "--", label=f"{model} bound")
        exact = [(row["K"], row["exact"]) for row in sub if row["exact"] is not None]
        if exact:
            ax.plot(
                [k for k, _ in exact],
                [max(v, 1e-300) for _, v in exact],
                "-",
                label=f"{model} exact",
            )
    ax.set_yscale("log")
    ax.set_xlabel("number of committees K")
    ax.set_ylabel(f"probability of {label}")
    ax.set_title(f"{label} across committee counts")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def render_sizing(rows: list[dict], path: str | Path) -> Path:
    """Minimal committee size against network size, one line per target."""
    plt = _agg_pyplot()
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for delta in sorted({row["delta"] for row in rows}, reverse=True):
        sub = [row for row in rows if row["delta"] == delta]
        ax.plot(
            [row["N"] for row in sub],
            [row["n"] for row in sub],
            "o-",
            label=f"$\\delta$ = {delta:g}",
        )
    ax.set_xscale("log")
    ax.set_xlabel("network size N")
    ax.set_ylabel("minimal committee size n")
    ax.set_title("Committee sizing across network sizes")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    import matplotlib.pyplot as plt

    plt.close(fig)
    return path


_RENDERERS = {
    "committee-tail": render_committee_tail,
    "events-e1-third": render_events,
    "events-e2-third": render_events,
    "events-e3-third": render_events,
    "events-e1-half": render_events,
    "sizing": render_sizing,
}


def write_report(name: str, rows: list[dict], out_dir: str | Path, plot: bool = True) -> dict:
    """Write `<name>.csv` (and `<name>.png` unless `plot` is off)."""
    if name not in _RENDERERS:
        raise InvalidInputError(f"unknown preset {name!r}")
    out_dir = Path(out_dir)
    csv_path = write_csv(rows, out_dir / f"{name}.csv")
    result = {"csv": str(csv_path)}
    if plot:
        png_path = _RENDERERS[name](rows, out_dir / f"{name}.png")
        result["png"] = str(png_path)
    return result
