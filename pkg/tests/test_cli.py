import json

import numpy as np
import pytest

from seqrank.cli import main
from seqrank.ingest import write_container
from seqrank.synth import LengthLaw, SpectrumPlan, plant_sequences


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, [json.loads(line) for line in out.splitlines()], err


PLAN = {
    "run_id": "toy",
    "steps": [100, 200, 300],
    "layers": [0, 3],
    "n": 40,
    "d": 8,
    "lengths": [1, 6],
    "seed": 5,
    "decay": {"start": 1.2, "end": 0.2, "layer_offsets": {"3": -0.1}},
    "metrics": [
        {"task": "PR", "orientation": "lower", "slope": 0.01, "intercept": 0.5},
        {"task": "KS", "orientation": "higher", "slope": 0.01, "layer_bias": {"0": 1.0}},
    ],
}


@pytest.fixture
def run_dir(tmp_path, capsys):
    (tmp_path / "plan.json").write_text(json.dumps(PLAN))
    code, lines, _ = run(capsys, "synth", "--plan", tmp_path / "plan.json", "--out", tmp_path / "run")
    assert code == 0 and lines[0]["containers"] == 6
    return tmp_path / "run"


class TestRank:
    def test_planted_container(self, tmp_path, capsys):
        plan = SpectrumPlan((4, 2, 1, 1), 100, 10, LengthLaw(1, 5), seed=1)
        write_container(plant_sequences(plan), tmp_path / "c.rkmt", dtype=1)
        code, lines, _ = run(capsys, "rank", "--input", tmp_path / "c.rkmt")
        assert code == 0 and len(lines) == 1
        assert lines[0]["rank"] == pytest.approx(3.363586, abs=1e-6)
        assert (lines[0]["n"], lines[0]["d"], lines[0]["seed"], lines[0]["retained"]) == (100, 10, 0, 4)

    def test_mean_equals_sum_on_equal_lengths(self, tmp_path, capsys):
        rng = np.random.default_rng(3)
        write_container([rng.standard_normal((4, 6)) for _ in range(20)], tmp_path / "c.rkmt", dtype=1)
        _, (a,), _ = run(capsys, "rank", "--input", tmp_path / "c.rkmt", "--pool", "sum")
        _, (b,), _ = run(capsys, "rank", "--input", tmp_path / "c.rkmt", "--pool", "mean")
        assert abs(a["rank"] - b["rank"]) <= 1e-9

    def test_sample(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        write_container([rng.standard_normal((2, 6)) for _ in range(20)], tmp_path / "c.rkmt")
        _, (a,), _ = run(capsys, "rank", "--input", tmp_path / "c.rkmt", "--sample", 7, "--seed", 11)
        _, (b,), _ = run(capsys, "rank", "--input", tmp_path / "c.rkmt", "--sample", 7, "--seed", 11)
        assert a == b and a["n"] == 7 and a["n_total"] == 20

    def test_sample_too_large(self, tmp_path, capsys):
        write_container([np.ones((1, 2))], tmp_path / "c.rkmt")
        code, lines, err = run(capsys, "rank", "--input", tmp_path / "c.rkmt", "--sample", 5)
        assert code == 2 and lines == [] and "out of range" in err

    def test_missing_file(self, tmp_path, capsys):
        code, lines, err = run(capsys, "rank", "--input", tmp_path / "nope.rkmt")
        assert code == 2 and lines == [] and "does not exist" in err

    def test_corrupt_file(self, tmp_path, capsys):
        (tmp_path / "bad.rkmt").write_bytes(b"JUNKJUNK")
        code, lines, err = run(capsys, "rank", "--input", tmp_path / "bad.rkmt")
        assert code == 2 and lines == [] and "bad magic at offset 0" in err

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["rank", "--input", "x", "--frobnicate"])
        assert exc.value.code == 2

    def test_no_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2


class TestScan:
    def test_six_lines(self, run_dir, capsys):
        code, lines, err = run(capsys, "scan", "--manifest", run_dir / "manifest.json")
        assert code == 0 and len(lines) == 6
        assert [(x["step"], x["layer"]) for x in lines] == [(s, l) for s in (100, 200, 300) for l in (0, 3)]
        assert "6 cells, 0 gaps" in err

    def test_rerun_matches(self, run_dir, capsys):
        _, first, _ = run(capsys, "scan", "--manifest", run_dir / "manifest.json")
        _, second, _ = run(capsys, "scan", "--manifest", run_dir / "manifest.json")
        assert all(abs(a["rank"] - b["rank"]) <= 1e-9 for a, b in zip(first, second))

    def test_gap(self, run_dir, capsys):
        (run_dir / "step-200" / "layer-3.rkmt").unlink()
        code, lines, err = run(capsys, "scan", "--manifest", run_dir / "manifest.json", "--workers", 2)
        assert code == 0
        gaps = [x for x in lines if x.get("gap")]
        assert len(gaps) == 1 and (gaps[0]["step"], gaps[0]["layer"]) == (200, 3)
        assert "1 gaps" in err

    def test_history_override(self, run_dir, tmp_path, capsys):
        run(capsys, "scan", "--manifest", run_dir / "manifest.json", "--history", tmp_path / "h.jsonl")
        assert len((tmp_path / "h.jsonl").read_text().splitlines()) == 6
        assert not (run_dir / "toy.history.jsonl").exists()

    def test_bad_workers(self, run_dir):
        with pytest.raises(SystemExit) as exc:
            main(["scan", "--manifest", str(run_dir / "manifest.json"), "--workers", "0"])
        assert exc.value.code == 2


class TestCorrelate:
    def scanned(self, run_dir, capsys):
        run(capsys, "scan", "--manifest", run_dir / "manifest.json")
        return run_dir / "toy.history.jsonl"

    def test_layer_grouping(self, run_dir, tmp_path, capsys):
        history = self.scanned(run_dir, capsys)
        code, (summary,), _ = run(
            capsys, "correlate", "--history", history, "--metrics", run_dir / "metrics.csv",
            "--group", "layer_task", "--out", tmp_path / "r.json", "--plots", tmp_path / "plots",
        )
        assert code == 0 and summary["groups"] == 4
        doc = json.loads((tmp_path / "r.json").read_text())
        assert all(g["tau"] == 1.0 for g in doc["groups"])
        # KS is biased toward the lower-rank layer
        assert summary["best_layer_disagreements"] == ["KS"]
        assert (tmp_path / "plots" / "perf_vs_rank_task-KS.csv").is_file()

    def test_csv_deterministic(self, run_dir, tmp_path, capsys):
        history = self.scanned(run_dir, capsys)
        args = ["correlate", "--history", history, "--metrics", run_dir / "metrics.csv", "--format", "csv"]
        run(capsys, *args, "--out", tmp_path / "a.csv")
        run(capsys, *args, "--out", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv").read_text().startswith("group,tau,p_value,n\n")

    def test_empty_join(self, run_dir, tmp_path, capsys):
        history = self.scanned(run_dir, capsys)
        (tmp_path / "m.csv").write_text(
            "run_id,step,layer,task,metric_value,orientation\nelse,1,0,PR,0.1,lower\n"
        )
        code, lines, err = run(
            capsys, "correlate", "--history", history, "--metrics", tmp_path / "m.csv", "--out", tmp_path / "r.json"
        )
        assert code == 2 and lines == []
        assert "unmatched metric keys: ('else', 1, 0, 'PR')" in err
        assert not (tmp_path / "r.json").exists()


class TestReport:
    def test_series(self, run_dir, tmp_path, capsys):
        run(capsys, "scan", "--manifest", run_dir / "manifest.json")
        code, lines, _ = run(
            capsys, "report", "--history", run_dir / "toy.history.jsonl", "--plots", tmp_path / "p",
            "--metrics", run_dir / "metrics.csv",
        )
        assert code == 0 and len(lines) == 2 + 2
        series = (tmp_path / "p" / "rank_vs_step_layer-0.csv").read_text().splitlines()
        assert len(series) == 1 + 3

    def test_empty_history(self, tmp_path, capsys):
        (tmp_path / "h.jsonl").write_text("")
        code, lines, err = run(capsys, "report", "--history", tmp_path / "h.jsonl", "--plots", tmp_path / "p")
        assert code == 2 and lines == [] and "no records" in err


def test_synth_missing_plan(tmp_path, capsys):
    code, lines, _ = run(capsys, "synth", "--plan", tmp_path / "none.json", "--out", tmp_path / "o")
    assert code == 2 and lines == []


def test_internal_error_exits_one(tmp_path, capsys, monkeypatch):
    import seqrank.cli as cli

    def boom(*_):
        raise RuntimeError("kaput")

    monkeypatch.setattr(cli, "read_container", boom)
    (tmp_path / "c.rkmt").write_bytes(b"")
    code, lines, err = run(capsys, "rank", "--input", tmp_path / "c.rkmt")
    assert code == 1 and lines == [] and "kaput" in err
