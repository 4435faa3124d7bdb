import csv
import json

import pytest

from dfsim.cli import (
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    main,
    parse_reality,
    parse_rng,
    parse_sceptic,
)
from dfsim.errors import ConfigError
from dfsim.transcript import read


BASE_CONFIG = {
    "game": "randomized",
    "M": 2,
    "N": 30,
    "eps": 0.1,
    "sceptic": "linear:c=0,0.5",
    "reality": "adversarial",
    "rng": "faithful",
    "seed": 7,
}


def write_config(tmp_path, name="cfg.json", **overrides):
    cfg = {**BASE_CONFIG, **overrides}
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


class TestSpecParsing:
    def test_linear(self):
        s = parse_sceptic("linear:c=0,1", 0)
        assert s.name == "linear"

    def test_bins(self):
        assert parse_sceptic("bins:8:0.25", 0).name == "binning"

    def test_k29(self):
        assert parse_sceptic("k29:eta=0.1,sigma=0.2", 0).name == "k29"

    def test_random_uses_default_seed(self):
        assert parse_sceptic("random", 5).name == "random[5]"
        assert parse_sceptic("random:7", 5).name == "random[7]"

    @pytest.mark.parametrize("bad", ["linear:0,1", "bins:8", "k29:eta=0.1",
                                     "k29:oops", "nope", "linear:c=a,b"])
    def test_bad_sceptic_specs(self, bad):
        with pytest.raises(ConfigError):
            parse_sceptic(bad, 0)

    def test_reality_specs(self):
        assert parse_reality("iid:0.7,0.3", 0).kind == "iid"
        assert parse_reality("adversarial", 0).kind == "adversarial_argmax"
        assert parse_reality("scripted:1,0,1", 0).kind == "scripted"
        with pytest.raises(ConfigError):
            parse_reality("iid:x", 0)
        with pytest.raises(ConfigError):
            parse_reality("oracle", 0)

    def test_rng_specs(self):
        p = parse_rng("rng:faithful:42", 0)
        assert p.mode == "faithful" and p.seed == 42
        assert parse_rng("faithful", 3).seed == 3
        assert parse_rng("adversarial", 0).mode == "adversarial"
        with pytest.raises(ConfigError):
            parse_rng("quantum", 0)


class TestRun:
    def test_clean_run_exits_zero(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "t.jsonl"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        t = read(str(out))
        assert len(t.rounds) == 30
        assert "invariant_held=True" in capsys.readouterr().out

    def test_forfeited_run_exits_one(self, tmp_path, capsys):
        # the binning sceptic run dies when the shrinking loss budget can no
        # longer be certified on any cell of the finest allowed mesh
        cfg = write_config(tmp_path, sceptic="bins:8:0.25",
                           reality="iid:0.3,0.7", N=100)
        out = tmp_path / "t.jsonl"
        assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_FAIL
        assert "forfeit" in capsys.readouterr().out

    def test_missing_config_exits_two(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json"),
                     "--out", str(tmp_path / "t.jsonl")]) == EXIT_USAGE

    def test_invalid_json_exits_two(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["run", "--config", str(bad),
                     "--out", str(tmp_path / "t.jsonl")]) == EXIT_USAGE

    def test_missing_keys_exits_two(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"game": "randomized", "M": 2}))
        assert main(["run", "--config", str(bad),
                     "--out", str(tmp_path / "t.jsonl")]) == EXIT_USAGE

    def test_seed_override_lands_in_transcript(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "t.jsonl"
        main(["run", "--config", str(cfg), "--out", str(out),
              "--seed-override", "99"])
        assert read(str(out)).header["seed"] == 99

    def test_reproducible_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, reality="iid:0.4,0.6", N=25)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        main(["run", "--config", str(cfg), "--out", str(a)])
        main(["run", "--config", str(cfg), "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestVerifyCommand:
    def test_fresh_transcript_verifies(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "t.jsonl"
        main(["run", "--config", str(cfg), "--out", str(out)])
        assert main(["verify", str(out)]) == EXIT_OK
        assert "digest: pass" in capsys.readouterr().out

    def test_tampered_transcript_fails(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        out = tmp_path / "t.jsonl"
        main(["run", "--config", str(cfg), "--out", str(out)])
        lines = out.read_text().splitlines()
        obj = json.loads(lines[3])
        obj["K"] += 0.001
        lines[3] = json.dumps(obj)
        out.write_text("\n".join(lines) + "\n")
        assert main(["verify", str(out)]) == EXIT_FAIL
        assert "FAIL" in capsys.readouterr().out

    def test_garbage_exits_two(self, tmp_path):
        bad = tmp_path / "t.jsonl"
        bad.write_text("not jsonl\n")
        assert main(["verify", str(bad)]) == EXIT_USAGE


class TestExport:
    def test_csv_and_png(self, tmp_path):
        cfg = write_config(tmp_path)
        t_path = tmp_path / "t.jsonl"
        main(["run", "--config", str(cfg), "--out", str(t_path)])
        csv_path = tmp_path / "curves.csv"
        assert main(["export", str(t_path), "--out", str(csv_path)]) == EXIT_OK
        with open(csv_path) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 30
        eps = BASE_CONFIG["eps"]
        for row in rows:
            K, F = float(row["K"]), float(row["F"])
            assert K <= (1.0 + eps) * F + 1e-9
            assert float(row["(1+eps)F"]) == (1.0 + eps) * F
        png = csv_path.with_suffix(".png")
        assert png.exists() and png.stat().st_size > 0

    def test_export_bad_transcript_exits_two(self, tmp_path):
        bad = tmp_path / "t.jsonl"
        bad.write_text("{}\n")
        assert main(["export", str(bad),
                     "--out", str(tmp_path / "c.csv")]) == EXIT_USAGE


class TestSweep:
    def test_grid_produces_transcripts_and_summary(self, tmp_path):
        cfg = write_config(tmp_path, eps=[0.05, 0.1, 0.5], seed=[0, 1], N=15)
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(cfg),
                     "--out", str(out)]) == EXIT_OK
        transcripts = sorted(out.glob("run_*.jsonl"))
        assert len(transcripts) == 6
        with open(out / "summary.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 6
        assert all(r["held"] == "True" for r in rows)
        assert (out / "summary.png").stat().st_size > 0

    def test_single_cell_sweep_matches_run(self, tmp_path):
        cfg = write_config(tmp_path, reality="iid:0.4,0.6", N=20)
        out_dir = tmp_path / "sweep"
        main(["sweep", "--config", str(cfg), "--out", str(out_dir)])
        single = tmp_path / "single.jsonl"
        main(["run", "--config", str(cfg), "--out", str(single)])
        sweep_file = next(out_dir.glob("run_*.jsonl"))
        assert sweep_file.read_bytes() == single.read_bytes()

    def test_duplicate_cells_deduped_with_warning(self, tmp_path, capsys):
        cfg = write_config(tmp_path, eps=[0.1, 0.1], seed=[0], N=5)
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
        assert "duplicate grid cell" in capsys.readouterr().err
        assert len(list(out.glob("run_*.jsonl"))) == 1

    def test_oversized_grid_exits_two(self, tmp_path):
        cfg = write_config(tmp_path, eps=[0.1], seed=list(range(300)), N=5)
        assert main(["sweep", "--config", str(cfg),
                     "--out", str(tmp_path / "s")]) == EXIT_USAGE
