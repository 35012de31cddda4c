import orjson
import pytest
from click.testing import CliRunner

from unitrod import __version__
from unitrod.cli import cli
from unitrod.serialization import graph_to_dict, read_json, write_json

K3_COL = "p edge 3 3\ne 1 2\ne 2 3\ne 1 3\n"
K4_COL = "p edge 4 6\ne 1 2\ne 1 3\ne 1 4\ne 2 3\ne 2 4\ne 3 4\n"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def files(tmp_path):
    (tmp_path / "k3.col").write_text(K3_COL)
    (tmp_path / "k4.col").write_text(K4_COL)
    (tmp_path / "bad.col").write_text("e 1 2\n")
    (tmp_path / "c.json").write_text('{"0": 0, "1": 1, "2": 2}')
    return tmp_path


def run(runner, *args):
    return runner.invoke(cli, ["--seed", "11", *map(str, args)])


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_reduce_writes_instance_and_manifest(runner, files):
    out = files / "h.json"
    result = run(runner, "reduce", "--dim", 3, "-i", files / "k3.col", "-o", out)
    assert result.exit_code == 0, result.output
    data = read_json(out)
    assert data["kind"] == "instance"
    assert data["H"]["vertices"] == 23
    assert len(data["H"]["edges"]) == 43
    manifest = read_json(f"{out}.manifest.json")
    assert manifest["command"] == "reduce"
    assert manifest["seed"] == 11
    assert manifest["dimension"] == 3
    assert str(files / "k3.col") in manifest["input_digests"]


def test_spindle_to_stdout(runner):
    result = run(runner, "spindle", "--dim", 3)
    assert result.exit_code == 0
    data = orjson.loads(result.stdout)
    assert data["graph"]["vertices"] == 9
    assert data["terminals"] == [0, 1]
    assert orjson.loads(result.stderr[result.stderr.index("{"):])["command"] == "spindle"


def test_rod_plan(runner):
    result = run(runner, "rod", "--dim", 3, "--min", 0.3, "--max", 0.4)
    assert result.exit_code == 0
    data = orjson.loads(result.stdout)
    assert data["plan"]["N"] == 32
    assert 0.3 < data["length_value"] < 0.4


def test_rod_bad_interval(runner):
    result = run(runner, "rod", "--dim", 3, "--min", 0.4, "--max", 0.3)
    assert result.exit_code == 2
    assert "InvalidInterval" in result.stderr


def test_witness_verify_extract(runner, files):
    assert run(runner, "reduce", "--dim", 3, "-i", files / "k3.col", "-o", files / "h.json").exit_code == 0
    result = run(runner, "witness", "-i", files / "k3.col", "--coloring", files / "c.json", "--dim", 3,
                 "-o", files / "w.json")
    assert result.exit_code == 0, result.output

    result = run(runner, "verify", "-i", files / "h.json", "-e", files / "w.json", "--non-critical")
    assert result.exit_code == 0, result.output
    assert orjson.loads(result.stdout)["ok"] is True

    result = run(runner, "extract", "-i", files / "h.json", "-e", files / "w.json")
    assert result.exit_code == 0, result.output
    assert orjson.loads(result.stdout) == {"0": 0, "1": 1, "2": 2}


def test_verify_rejects_bad_embedding(runner, files):
    run(runner, "reduce", "--dim", 3, "-i", files / "k3.col", "-o", files / "h.json")
    write_json(files / "bad.json", {"kind": "embedding", "dim": 3, "coords": [[0.0, 0.0, 0.0]] * 23})
    result = run(runner, "verify", "-i", files / "h.json", "-e", files / "bad.json")
    assert result.exit_code == 1
    report = orjson.loads(result.stdout)
    assert report["ok"] is False
    assert report["violations"]


def test_embed_graph_document(runner, files, k4):
    write_json(files / "k4.json", graph_to_dict(k4))
    result = run(runner, "embed", "-i", files / "k4.json", "--dim", 3, "--restarts", 10, "--table")
    assert result.exit_code == 0, result.output
    assert orjson.loads(result.stdout)["verdict"] == "EmbeddingFound"


def test_oracle(runner, files):
    result = run(runner, "oracle", "-i", files / "k4.col")
    assert result.exit_code == 0
    assert orjson.loads(result.stdout)["colorable"] is False
    result = run(runner, "oracle", "-i", files / "k3.col")
    assert orjson.loads(result.stdout)["colorable"] is True


def test_check_non_colorable(runner, files):
    result = run(runner, "check", "-i", files / "k4.col", "--dim", 3, "--restarts", 4)
    assert result.exit_code == 0, result.output
    report = orjson.loads(result.stdout)
    assert report["oracle"]["colorable"] is False
    assert report["candidates"] == {"checked": 81, "rejected": 81}
    assert report["solver"]["verdict"] == "NoEmbeddingFoundHeuristic"
    assert report["solver"]["evidence"] == "heuristic, not a proof"


def test_malformed_input_exits_2(runner, files):
    result = run(runner, "reduce", "--dim", 3, "-i", files / "bad.col")
    assert result.exit_code == 2
    error = orjson.loads(result.stderr.strip().splitlines()[-1])
    assert error["error"] == "MalformedHeader"
