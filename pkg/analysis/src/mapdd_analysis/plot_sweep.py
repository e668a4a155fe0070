"""Turn a mapdd sweep CSV into the four-panel comparison figure: mean
cumulative tardiness versus the assignment weight alpha, one line per
scheduler configuration, one panel per release/deadline regime, with
seed-stddev bands.

Runs headless (Agg backend); invoked standalone:

    mapdd-plot --csv sweep.csv --out figure.png
"""

from __future__ import annotations

import argparse
import csv
import statistics
import sys
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

REQUIRED_COLUMNS = ("instance_id", "regime", "algo", "alpha", "swap", "switch",
                    "seed", "cumulative_tardiness", "failure_count", "makespan",
                    "wall_ms")

REGIME_PANELS = ("dense-short", "dense-long", "sparse-short", "sparse-long")

# line styling per (swap, switch) flag pair
STYLES = {
    ("0", "0"): dict(linestyle="-", marker="o"),
    ("1", "0"): dict(linestyle="--", marker="s"),
    ("0", "1"): dict(linestyle="-.", marker="^"),
    ("1", "1"): dict(linestyle=":", marker="d"),
}


class SchemaError(ValueError):
    """The CSV does not match the documented sweep results schema."""


def load_rows(csv_path) -> list[dict]:
    path = Path(csv_path)
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, no header row")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        rows = list(reader)
    if not any(_is_run_row(r) for r in rows):
        raise SchemaError(f"{path}: no per-run result rows")
    return rows


def _is_run_row(row) -> bool:
    return (str(row["seed"]).lstrip("-").isdigit()
            and row["cumulative_tardiness"] != "")


def config_key(row) -> tuple:
    return (row["algo"], str(row["swap"]), str(row["switch"]))


def aggregate(rows, metric="cumulative_tardiness") -> dict:
    """(regime, algo, swap, switch, alpha) -> (mean, stddev, n) over seeds,
    computed from the per-run rows."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        if not _is_run_row(row):
            continue
        key = (row["regime"], *config_key(row), str(row["alpha"]))
        groups.setdefault(key, []).append(float(row[metric]))
    out = {}
    for key, vals in groups.items():
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        out[key] = (statistics.mean(vals), std, len(vals))
    return out


def summary_cells(rows, metric="cumulative_tardiness") -> dict:
    """Same keys as aggregate(), taken from the CSV's own mean rows."""
    out = {}
    for row in rows:
        if row["seed"] == "mean" and row[metric] != "":
            key = (row["regime"], *config_key(row), str(row["alpha"]))
            out[key] = float(row[metric])
    return out


def config_label(algo, swap, switch) -> str:
    label = algo
    if swap == "1":
        label += "+swap"
    if switch == "1":
        label += "+switch"
    return label


def plot_sweep(csv_path, out_path, metric="cumulative_tardiness") -> dict:
    """Write the 2x2 panel figure plus one file per panel. Returns the plotted
    data: {"panels": {regime: {label: {"alphas": [...], "means": [...]}}},
    "files": [paths]} so callers can cross-check against the CSV."""
    rows = load_rows(csv_path)
    cells = aggregate(rows, metric)
    out_path = Path(out_path)
    regimes_present = sorted({k[0] for k in cells})
    missing = [r for r in REGIME_PANELS if r not in regimes_present]
    if missing:
        warnings.warn(f"sweep has no rows for regime(s): {', '.join(missing)}",
                      stacklevel=2)

    configs = sorted({k[1:4] for k in cells})
    panels: dict[str, dict] = {}
    files: list[str] = []

    fig, axes = plt.subplots(2, 2, figsize=(11, 7.5), sharex=True)
    for ax, regime in zip(axes.flat, REGIME_PANELS):
        panels[regime] = {}
        ax.set_title(regime)
        ax.set_xlabel("alpha")
        ax.set_ylabel(f"mean {metric.replace('_', ' ')}")
        if regime not in regimes_present:
            ax.text(0.5, 0.5, "no data", ha="center", va="center",
                    transform=ax.transAxes)
            continue
        alphas_seen = set()
        for algo, swap, switch in configs:
            pts = sorted(
                (float(k[4]), v) for k, v in cells.items()
                if k[0] == regime and k[1:4] == (algo, swap, switch))
            if not pts:
                continue
            alphas = [p[0] for p in pts]
            means = [p[1][0] for p in pts]
            stds = [p[1][1] for p in pts]
            alphas_seen.update(alphas)
            label = config_label(algo, swap, switch)
            style = STYLES.get((swap, switch), {})
            ax.plot(alphas, means, label=label, **style)
            ax.fill_between(alphas, [m - s for m, s in zip(means, stds)],
                            [m + s for m, s in zip(means, stds)], alpha=0.15)
            panels[regime][label] = {"alphas": alphas, "means": means}
        ax.set_xticks(sorted(alphas_seen))
        ax.tick_params(axis="x", labelrotation=45)
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    files.append(str(out_path))

    for regime in REGIME_PANELS:
        if regime not in regimes_present:
            continue
        pfig, pax = plt.subplots(figsize=(6, 4.5))
        for label, data in panels[regime].items():
            pax.plot(data["alphas"], data["means"], label=label)
        pax.set_title(regime)
        pax.set_xlabel("alpha")
        pax.set_ylabel(f"mean {metric.replace('_', ' ')}")
        pax.set_xticks(sorted({a for d in panels[regime].values()
                               for a in d["alphas"]}))
        pax.legend(fontsize=7)
        pfig.tight_layout()
        panel_file = out_path.with_name(
            f"{out_path.stem}_{regime}{out_path.suffix}")
        pfig.savefig(panel_file, dpi=130)
        plt.close(pfig)
        files.append(str(panel_file))
    plt.close(fig)
    return {"panels": panels, "files": files}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mapdd-plot",
        description="plot mean cumulative tardiness vs alpha from a sweep CSV")
    parser.add_argument("--csv", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--metric", default="cumulative_tardiness")
    args = parser.parse_args(argv)
    try:
        result = plot_sweep(args.csv, args.out, metric=args.metric)
    except (SchemaError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print("wrote " + ", ".join(result["files"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
