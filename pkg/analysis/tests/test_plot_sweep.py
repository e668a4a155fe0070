import csv
import os
import time
from pathlib import Path

import pytest

from mapdd_analysis.plot_sweep import (SchemaError, aggregate, load_rows,
                                       main, plot_sweep, summary_cells)

DATA = Path(__file__).parent / "data"
MINI = DATA / "mini_sweep.csv"


def sweep_csv():
    """The full acceptance sweep when available, else the bundled mini one."""
    env = os.environ.get("MAPDD_ACCEPT_SWEEP_CSV")
    if env and Path(env).exists():
        return Path(env)
    return MINI


class TestLoad:
    def test_loads_fixture(self):
        rows = load_rows(MINI)
        assert len(rows) > 100

    def test_missing_column_named(self, tmp_path):
        p = tmp_path / "bad.csv"
        with open(MINI) as f:
            rows = list(csv.DictReader(f))
        cols = [c for c in rows[0] if c != "makespan"]
        with open(p, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=cols, extrasaction="ignore")
            w.writeheader()
            w.writerows(rows)
        with pytest.raises(SchemaError, match="makespan"):
            load_rows(p)

    def test_empty_csv_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(SchemaError):
            load_rows(p)

    def test_header_only_rejected(self, tmp_path):
        p = tmp_path / "hdr.csv"
        p.write_text("instance_id,regime,algo,alpha,swap,switch,seed,"
                     "cumulative_tardiness,failure_count,makespan,wall_ms\n")
        with pytest.raises(SchemaError, match="no per-run"):
            load_rows(p)


class TestAggregate:
    def test_matches_summary_rows(self):
        rows = load_rows(MINI)
        computed = aggregate(rows)
        recorded = summary_cells(rows)
        assert recorded, "fixture is missing summary rows"
        for key, mean in recorded.items():
            assert key in computed
            assert computed[key][0] == pytest.approx(mean, rel=1e-9)


class TestPlot:
    def test_four_panels_written(self, tmp_path):
        out = tmp_path / "fig.png"
        result = plot_sweep(MINI, out)
        assert out.exists()
        assert len(result["files"]) == 5  # composite + one per regime
        assert set(result["panels"]) == {"dense-short", "dense-long",
                                         "sparse-short", "sparse-long"}
        for regime, lines in result["panels"].items():
            assert len(lines) == 4  # one per scheduler config

    def test_single_regime_warns(self, tmp_path):
        rows = load_rows(MINI)
        p = tmp_path / "one.csv"
        with open(MINI) as f:
            fieldnames = csv.DictReader(f).fieldnames
        with open(p, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=fieldnames)
            w.writeheader()
            for r in rows:
                if r["regime"] == "dense-short":
                    w.writerow(r)
        with pytest.warns(UserWarning, match="sparse-long"):
            result = plot_sweep(p, tmp_path / "one.png")
        assert len(result["files"]) == 2

    def test_cli_entry(self, tmp_path, capsys):
        rc = main(["--csv", str(MINI), "--out", str(tmp_path / "cli.png")])
        assert rc == 0
        assert (tmp_path / "cli.png").exists()

    def test_cli_schema_error_exit(self, tmp_path, capsys):
        p = tmp_path / "empty.csv"
        p.write_text("")
        rc = main(["--csv", str(p), "--out", str(tmp_path / "x.png")])
        assert rc == 2


class TestAcceptanceS1:
    def test_s1_plot_regeneration(self, tmp_path):
        src = sweep_csv()
        t0 = time.time()
        out = tmp_path / "sweep_fig.png"
        result = plot_sweep(src, out)
        elapsed = time.time() - t0
        assert elapsed < 60, f"plotting took {elapsed:.1f}s"
        rows = load_rows(src)
        recorded = summary_cells(rows)
        assert recorded
        # every plotted point equals the CSV's own mean row for that cell
        checked = 0
        for regime, lines in result["panels"].items():
            for label, data in lines.items():
                algo = label.split("+")[0]
                swap = "1" if "+swap" in label else "0"
                switch = "1" if "+switch" in label else "0"
                for alpha, mean in zip(data["alphas"], data["means"]):
                    key = (regime, algo, swap, switch, str(alpha))
                    assert key in recorded, key
                    assert mean == pytest.approx(recorded[key], rel=1e-9)
                    checked += 1
        assert checked >= 16
        assert out.exists() and out.stat().st_size > 10000
        print(f"\n[acceptance] S1 plot regeneration: PASS ({checked} plotted "
              f"cells match summary rows, {elapsed:.1f}s, source {src.name})")
