import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

import oracles
from semloft import cli
from semloft.gridmap import ClassifiedGrid, classify, encode_pgm, load_pgm
from semloft.render import decode_png_size
from semloft.world import SemanticWorld, Unit, UnitType, WorldRasterParams, rasterize, world_from_dict, world_to_dict

DATA = resources.files("semloft") / "data"


def validate(doc, name):
    jsonschema.validate(doc, cli.load_schema(name))


def run_cli(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    doc = json.loads(err)
    validate(doc, "error")
    return doc["error"]["kind"]


@pytest.fixture
def truth_path(tmp_path):
    p = tmp_path / "truth.json"
    p.write_text((DATA / "two_rooms_truth.json").read_text())
    return p


@pytest.fixture
def map_path(tmp_path):
    p = tmp_path / "map.pgm"
    p.write_bytes((DATA / "two_rooms.pgm").read_bytes())
    return p


def test_schemas_are_valid():
    for name in cli.SCHEMAS:
        jsonschema.Draft202012Validator.check_schema(cli.load_schema(name))


def test_extract_outputs(tmp_path, capsys, map_path):
    out, metrics, trace, png = (tmp_path / n for n in ("w.json", "m.json", "t.jsonl", "o.png"))
    code, _, _ = run_cli(capsys, "extract", "--map", map_path, "--out", out, "--metrics", metrics, "--trace", trace, "--png", png, "--iters", 300)
    assert code == 0
    world = json.loads(out.read_text())
    validate(world, "world")
    validate(json.loads(metrics.read_text()), "metrics")
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    for r in records:
        validate(r, "trace")
    assert records[-1]["record"] == "summary" and records[-1]["selected"]
    assert decode_png_size(png.read_bytes()) == tuple(world["dims"])
    assert len(world_from_dict(world).units) == 2


def test_extract_then_score_reproduces_metrics(tmp_path, capsys, map_path):
    out, metrics, scored = tmp_path / "w.json", tmp_path / "m.json", tmp_path / "s.json"
    assert run_cli(capsys, "extract", "--map", map_path, "--out", out, "--metrics", metrics, "--iters", 200)[0] == 0
    assert run_cli(capsys, "score", "--map", map_path, "--world", out, "--out", scored)[0] == 0
    assert scored.read_text() == metrics.read_text()


def test_extract_to_stdout(capsys, map_path):
    code, out, _ = run_cli(capsys, "extract", "--map", map_path, "--iters", 50)
    assert code == 0
    validate(json.loads(out), "world")


def test_synth_identity_classifies_back(tmp_path, capsys, truth_path):
    out = tmp_path / "clean.pgm"
    assert run_cli(capsys, "synth", "--world", truth_path, "--out", out)[0] == 0
    world = world_from_dict(json.loads(truth_path.read_text()))
    dims = tuple(json.loads(truth_path.read_text())["dims"])
    assert classify(load_pgm(out)) == rasterize(world, WorldRasterParams(2, dims))


def test_synth_ascii_and_truth_copy(tmp_path, capsys, truth_path):
    out, copy = tmp_path / "a.pgm", tmp_path / "copy.json"
    assert run_cli(capsys, "synth", "--world", truth_path, "--out", out, "--truth", copy, "--ascii", "--noise", 0.05)[0] == 0
    assert out.read_bytes().startswith(b"P2")
    validate(json.loads(copy.read_text()), "world")


def test_score_truth_on_clean_map(tmp_path, capsys, truth_path):
    clean = tmp_path / "clean.pgm"
    run_cli(capsys, "synth", "--world", truth_path, "--out", clean)
    code, out, _ = run_cli(capsys, "score", "--map", clean, "--world", truth_path)
    assert code == 0
    m = json.loads(out)
    validate(m, "metrics")
    assert m["K"] == 1.0 and m["overlap_cells"] == 0


def test_synth_out_of_bounds(tmp_path, capsys):
    w = tmp_path / "w.json"
    w.write_text(json.dumps(world_to_dict(SemanticWorld((Unit(0, 0, 50, 40),), (UnitType.ROOM,), ()))))
    code, _, err = run_cli(capsys, "synth", "--world", w, "--out", tmp_path / "m.pgm", "--dims", 40, 40)
    assert code == 2 and error_of(err) == "geometry"


def test_detect_all_free_map(tmp_path, capsys):
    p = tmp_path / "free.pgm"
    p.write_bytes(encode_pgm(ClassifiedGrid(np.zeros((30, 40), dtype=np.int8)).to_intensity()))
    code, out, _ = run_cli(capsys, "detect", "--map", p)
    assert code == 0
    doc = json.loads(out)
    validate(doc, "detections")
    assert doc["walls"] == [] and doc["doors"] == [] and doc["units"] == []


def test_detect_finds_door(capsys, map_path):
    code, out, _ = run_cli(capsys, "detect", "--map", map_path)
    doc = json.loads(out)
    validate(doc, "detections")
    assert code == 0 and len(doc["doors"]) >= 1 and len(doc["units"]) >= 2


def test_render_dims_match_map(tmp_path, capsys, map_path, truth_path):
    png, pgm = tmp_path / "o.png", tmp_path / "o.pgm"
    assert run_cli(capsys, "render", "--map", map_path, "--world", truth_path, "--out", png)[0] == 0
    _, idx = oracles.decode_indexed_png(png.read_bytes())
    g = load_pgm(map_path)
    assert idx.shape == (g.height, g.width)
    assert run_cli(capsys, "render", "--map", map_path, "--out", pgm)[0] == 0
    assert load_pgm(pgm).cells.shape == idx.shape


@pytest.mark.parametrize(
    "argv,kind,code",
    [
        (["extract", "--map", "missing.pgm"], "io", 2),
        (["score", "--map", "MAP", "--world", "missing.json"], "io", 2),
        (["extract", "--map", "MAP", "--set", "scoring.psi=2"], "config", 2),
        (["extract", "--map", "MAP", "--set", "no.such=1"], "config", 2),
        (["extract", "--map", "MAP", "--chains", "0"], "config", 2),
        (["detect", "--map", "BAD"], "format", 2),
        (["extract", "--map", "MAP", "--iters", "5", "--set", "chain.weights=0 0 0 1 0 0 0 0 0", "--init", "random"], "stall", 3),
    ],
)
def test_error_exit_codes(tmp_path, capsys, map_path, argv, kind, code):
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    argv = [str(map_path) if a == "MAP" else str(bad) if a == "BAD" else a for a in argv]
    got, _, err = run_cli(capsys, *argv)
    assert (got, error_of(err)) == (code, kind)


def test_truncated_map_names_offset(tmp_path, capsys):
    p = tmp_path / "short.pgm"
    p.write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    code, _, err = run_cli(capsys, "detect", "--map", p)
    assert code == 2 and error_of(err) == "format"
    assert "offset" in json.loads(err)["error"]["message"]


def test_every_command_is_deterministic(tmp_path, capsys, map_path, truth_path):
    def outputs(tag):
        d = tmp_path / tag
        d.mkdir()
        run_cli(capsys, "extract", "--map", map_path, "--out", d / "w.json", "--metrics", d / "m.json", "--trace", d / "t.jsonl", "--png", d / "o.png", "--iters", 200, "--seed", 3)
        run_cli(capsys, "synth", "--world", truth_path, "--out", d / "s.pgm", "--noise", 0.1, "--clutter", 0.05, "--seed", 9)
        run_cli(capsys, "score", "--map", map_path, "--world", truth_path, "--out", d / "score.json")
        run_cli(capsys, "detect", "--map", map_path, "--out", d / "det.json")
        run_cli(capsys, "render", "--map", map_path, "--world", truth_path, "--out", d / "r.png")
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    a, b = outputs("a"), outputs("b")
    assert len(a) == 8 and a == b


def test_bundled_fixture_with_default_config(tmp_path, capsys, map_path):
    out, metrics = tmp_path / "w.json", tmp_path / "m.json"
    code, _, _ = run_cli(capsys, "extract", "--map", map_path, "--out", out, "--metrics", metrics)
    assert code == 0
    world = world_from_dict(json.loads(out.read_text()))
    assert [t.value for t in world.types] == ["room", "room"]
    assert json.loads(metrics.read_text())["K"] >= 0.95
