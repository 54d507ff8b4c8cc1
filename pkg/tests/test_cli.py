import json
import shutil
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from deiatransit import __version__
from deiatransit.cli import main
from deiatransit.pipeline import STAGES, ConfigError, PipelineError, load_config, run_all, run_stage
from deiatransit.report import STAGE_ORDER, report_schema


def bundle(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture
def ini(fixture_dir):
    return fixture_dir / "fixture.ini"


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert capsys.readouterr().out.strip() == f"deiatransit {__version__} (artifact schema 1)"


def test_unknown_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert "usage:" in capsys.readouterr().err


def test_config_errors(tmp_path, ini, capsys):
    assert run(["run"]) == 2
    assert "missing required setting 'posts'" in capsys.readouterr().err
    assert run(["run", "--config", tmp_path / "nope.ini"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text(ini.read_text() + "\n[extra]\ncolour = blue\n")
    assert run(["run", "--config", bad]) == 2
    assert run(["run", "--config", ini, "--seed", "abc"]) == 2
    assert run(["run", "--config", ini, "--match", "fuzzy"]) == 2


def test_config_precedence(ini, tmp_path):
    cfg = load_config(ini)
    assert cfg.posts == ini.parent / "posts.ndjson"
    assert cfg.k == (2, 3, 4) and cfg.g == 4 and cfg.out_dir == ini.parent / "out"
    cfg = load_config(ini, {"g": "3", "heuristics": "true", "out_dir": str(tmp_path / "o")})
    assert cfg.g == 3 and cfg.heuristics and cfg.out_dir == tmp_path / "o"
    with pytest.raises(ConfigError):
        load_config(ini, {"heuristics": "maybe"})


def test_run_bundle(ini, capsys):
    assert run(["run", "--config", ini]) == 0
    out = ini.parent / "out"
    rep = json.loads((out / "report.json").read_text())
    jsonschema.validate(rep, report_schema())
    counts = [rep["stage_counts"][k] for k in STAGE_ORDER]
    assert counts == sorted(counts, reverse=True) and counts[-1] > 0
    assert rep["parse_errors"] == 2
    assert set(rep["topics"]) == {"negative", "neutral", "positive"}
    for name in ("stage_counts.csv", "topics.csv", "tract_rollups.csv", "posts.geojson",
                 "tracts.geojson", "fbi_history.txt", "clusters.csv"):
        assert (out / name).is_file()
    assert not (out / "FAILED").exists()
    captured = capsys.readouterr()
    assert "stage1_kept=" in captured.out
    assert captured.err.count("line") == 2


def test_run_deterministic(ini, tmp_path):
    assert run(["run", "--config", ini, "--out-dir", tmp_path / "a"]) == 0
    assert run(["run", "--config", ini, "--out-dir", tmp_path / "b"]) == 0
    assert bundle(tmp_path / "a") == bundle(tmp_path / "b")


def test_chaining_equals_run(ini, tmp_path):
    assert run(["run", "--config", ini, "--out-dir", tmp_path / "all"]) == 0
    for stage in STAGES:
        assert run([stage, "--config", ini, "--out-dir", tmp_path / "chain"]) == 0, stage
    assert bundle(tmp_path / "all") == bundle(tmp_path / "chain")


def test_missing_lexicon(ini, tmp_path, capsys):
    code = run(["run", "--config", ini, "--lexicon", tmp_path / "absent.txt"])
    assert code == 1
    err = capsys.readouterr().err
    assert "[sentiment]" in err and "lexicon" in err


def test_stage_needs_previous_artifact(ini, tmp_path, capsys):
    assert run(["sentiment", "--config", ini, "--out-dir", tmp_path]) == 1
    assert "run the 'filter' stage first" in capsys.readouterr().err


def test_schema_version_mismatch(ini, tmp_path, capsys):
    out = tmp_path / "o"
    assert run(["ingest", "--config", ini, "--out-dir", out]) == 0
    path = out / "ingest.ndjson"
    lines = path.read_text().splitlines()
    header = json.loads(lines[0])
    header["schema_version"] = 99
    path.write_text("\n".join([json.dumps(header)] + lines[1:]) + "\n")
    assert run(["filter", "--config", ini, "--out-dir", out]) == 1
    assert "schema_version 99" in capsys.readouterr().err


def test_wrong_stage_artifact(ini, tmp_path):
    cfg = load_config(ini, {"out_dir": str(tmp_path)})
    run_stage("ingest", cfg)
    shutil.copy(tmp_path / "ingest.ndjson", tmp_path / "filter.ndjson")
    with pytest.raises(PipelineError, match="expected 'filter'"):
        run_stage("sentiment", cfg)


def test_topics_single_segment(ini, tmp_path):
    out = tmp_path / "o"
    for stage in ("ingest", "filter", "sentiment"):
        assert run([stage, "--config", ini, "--out-dir", out]) == 0
    assert run(["topics", "--config", ini, "--out-dir", out, "--segment", "negative"]) == 0
    assert sorted(p.name for p in out.glob("topics_*.json")) == ["topics_negative.json"]
    res = json.loads((out / "topics_negative.json").read_text())
    assert res["segment"] == "negative" and res["k"] in (2, 3, 4)


def test_failed_marker(ini, tmp_path):
    cfg = load_config(ini, {"out_dir": str(tmp_path), "g": "100000"})
    with pytest.raises(PipelineError) as exc:
        run_all(cfg)
    assert exc.value.stage == "bigrams"
    assert (tmp_path / "FAILED").read_text().startswith("bigrams:")


def test_console_script():
    exe = shutil.which("deiatransit")
    cmd = [exe] if exe else [sys.executable, "-m", "deiatransit.cli"]
    res = subprocess.run(cmd + ["--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_convert(tmp_path, capsys):
    src = tmp_path / "nested.ndjson"
    base = {"id": "1", "user_id": "u", "created_at": "2020-03-20T10:00:00Z", "text": "bus"}
    src.write_text("\n".join([
        json.dumps(dict(base, coordinates=[-73.9, 40.7])),
        json.dumps(dict(base, id="2", coordinates={"type": "Point", "coordinates": [-74.0, 40.8]})),
        "{broken",
        json.dumps(dict(base, id="3", lon=-73.95, lat=40.75)),
    ]) + "\n")
    dst = tmp_path / "flat.ndjson"
    assert run(["convert", src, dst]) == 0
    assert "rewrote 2 lines" in capsys.readouterr().out
    from deiatransit.corpus import parse_posts

    with open(dst, "rb") as fh:
        posts, errors = parse_posts(fh)
    assert [(p.post_id, p.lon, p.lat) for p in posts] == [("1", -73.9, 40.7), ("2", -74.0, 40.8), ("3", -73.95, 40.75)]
    assert [e.line for e in errors] == [3]
    assert run(["convert", tmp_path / "absent", dst]) == 1
