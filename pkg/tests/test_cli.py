import csv
import subprocess
import sys
from pathlib import Path

import pytest

from mapdd.cli import (CSV_COLUMNS, EXIT_INPUT, EXIT_OK, EXIT_USAGE, main,
                       run_sweep, summarize_rows)

from util import make_grid


@pytest.fixture(scope="module")
def small_map(tmp_path_factory):
    """A compact well-formed map so CLI tests stay fast."""
    rows = ["E.......E",
            "..TTTTT..",
            ".........",
            "..TTTTT..",
            "E.......E"]
    p = tmp_path_factory.mktemp("maps") / "small.map"
    p.write_text(make_grid(rows).render())
    return p


def gen_instance(tmp_path, small_map, seed=1, tasks=8, agents=2):
    out = tmp_path / f"i{seed}.inst"
    rc = main(["gen", "--map", str(small_map), "--tasks", str(tasks),
               "--agents", str(agents), "--release", "dense",
               "--deadline", "short", "--seed", str(seed), "--out", str(out)])
    assert rc == EXIT_OK
    return out


class TestGen:
    def test_writes_instance(self, tmp_path, small_map):
        out = gen_instance(tmp_path, small_map)
        assert out.exists()
        assert out.read_text().startswith("mapd-d instance v1")

    def test_same_seed_same_bytes(self, tmp_path, small_map):
        a = gen_instance(tmp_path, small_map, seed=3)
        b_path = tmp_path / "copy.inst"
        rc = main(["gen", "--map", str(small_map), "--tasks", "8",
                   "--agents", "2", "--release", "dense", "--deadline",
                   "short", "--seed", "3", "--out", str(b_path)])
        assert rc == EXIT_OK
        assert a.read_bytes() == b_path.read_bytes()

    def test_zero_agents_usage_error(self, tmp_path, small_map):
        with pytest.raises(SystemExit) as e:
            main(["gen", "--map", str(small_map), "--agents", "0",
                  "--out", str(tmp_path / "x.inst")])
        assert e.value.code == EXIT_USAGE

    def test_missing_map_input_error(self, tmp_path):
        rc = main(["gen", "--map", str(tmp_path / "nope.map"),
                   "--out", str(tmp_path / "x.inst")])
        assert rc == EXIT_INPUT


class TestRun:
    def test_smoke_row(self, tmp_path, small_map, capsys):
        inst = gen_instance(tmp_path, small_map)
        results = tmp_path / "r.csv"
        rc = main(["run", "--instance", str(inst), "--algo", "dtpts",
                   "--alpha", "0.1", "--swap", "--switch", "--seed", "7",
                   "--results", str(results)])
        assert rc == EXIT_OK
        rows = list(csv.DictReader(results.open()))
        assert len(rows) == 1
        assert int(rows[0]["cumulative_tardiness"]) >= 0
        assert rows[0]["algo"] == "dtpts"
        assert rows[0]["seed"] == "7"

    def test_tp_with_alpha_usage_error(self, tmp_path, small_map):
        inst = gen_instance(tmp_path, small_map)
        with pytest.raises(SystemExit) as e:
            main(["run", "--instance", str(inst), "--algo", "tp",
                  "--alpha", "0.3"])
        assert e.value.code == EXIT_USAGE

    def test_run_then_validate_pipeline(self, tmp_path, small_map, capsys):
        inst = gen_instance(tmp_path, small_map)
        trace = tmp_path / "t.jsonl"
        rc = main(["run", "--instance", str(inst), "--algo", "tpts",
                   "--trace", str(trace), "--results", str(tmp_path / "r.csv")])
        assert rc == EXIT_OK
        rc = main(["validate", "--trace", str(trace), "--instance", str(inst)])
        assert rc == EXIT_OK
        out = capsys.readouterr().out
        assert "trace ok" in out

    def test_validate_flags_corruption(self, tmp_path, small_map, capsys):
        inst = gen_instance(tmp_path, small_map)
        trace = tmp_path / "t.jsonl"
        main(["run", "--instance", str(inst), "--algo", "tp",
              "--trace", str(trace), "--results", str(tmp_path / "r.csv")])
        lines = trace.read_text().splitlines()
        kept = [l for l in lines if '"pickup"' not in l]
        trace.write_text("\n".join(kept) + "\n")
        rc = main(["validate", "--trace", str(trace), "--instance", str(inst)])
        assert rc == 1


class TestSweep:
    def test_tiny_sweep_cardinality_and_summaries(self, tmp_path, small_map):
        out = tmp_path / "sweep.csv"
        rows = run_sweep(str(small_map), tasks=6, agents=2,
                         regimes=["dense-short", "sparse-long"],
                         configs=["dtp", "dtpts+swap"],
                         alphas=[0.0, 0.1], seeds=[0, 1],
                         out_path=out, workers=1)
        run_rows = [r for r in rows if r["seed"].isdigit()]
        # 2 regimes x 2 configs x 2 alphas x 2 seeds
        assert len(run_rows) == 16
        file_rows = list(csv.DictReader(out.open()))
        assert len(file_rows) == len(rows)
        means = [r for r in file_rows if r["seed"] == "mean"]
        assert len(means) == 8  # one per cell

    def test_resume_skips_done_rows(self, tmp_path, small_map):
        out = tmp_path / "sweep.csv"
        kw = dict(regimes=["dense-short"], configs=["dtp"],
                  alphas=[0.0, 0.1], seeds=[0, 1], out_path=out, workers=1)
        run_sweep(str(small_map), 6, 2, **kw)
        before = [r for r in csv.DictReader(out.open()) if r["seed"].isdigit()]
        run_sweep(str(small_map), 6, 2, **kw)  # rerun: nothing recomputed
        after = [r for r in csv.DictReader(out.open()) if r["seed"].isdigit()]
        assert before == after
        assert len(after) == len({tuple(sorted(r.items())) for r in after})

    def test_summary_mean_matches_rows(self, tmp_path, small_map):
        out = tmp_path / "sweep.csv"
        rows = run_sweep(str(small_map), 6, 2, regimes=["dense-short"],
                         configs=["dtp"], alphas=[0.0], seeds=[0, 1, 2],
                         out_path=out, workers=1)
        runs = [r for r in rows if str(r["seed"]).isdigit()]
        mean_row = [r for r in rows if r["seed"] == "mean"][0]
        expected = sum(int(r["cumulative_tardiness"]) for r in runs) / len(runs)
        assert float(mean_row["cumulative_tardiness"]) == pytest.approx(expected)


class TestConsoleScript:
    def test_module_entry_point(self, tmp_path, small_map):
        proc = subprocess.run(
            [sys.executable, "-m", "mapdd.cli", "gen", "--map", str(small_map),
             "--tasks", "4", "--agents", "2", "--seed", "0",
             "--out", str(tmp_path / "e.inst")],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "e.inst").exists()
