import json
import subprocess
import sys

import pytest

from spherical_recurrence.cli import main, run


def _run(*args):
    code, text, _ = run(list(args))
    return code, json.loads(text)


@pytest.fixture
def files(tmp_path):
    (tmp_path / "set.json").write_text(json.dumps({"modulus": 4, "dimension": 1, "points": [[0]]}))
    (tmp_path / "tree.json").write_text(json.dumps(
        {"vertices": ["a", "b"], "root": "a", "edges": [{"u": "a", "v": "b", "label": 1}]}))
    return tmp_path


def test_sphere_count():
    code, doc = _run("sphere", "--d", "5", "--n", "1", "--count")
    assert code == 0 and doc["count"] == 10 and doc["command"] == "sphere"
    assert doc["params"]["d"] == 5 and "threads" not in doc["params"]


def test_sphere_enumerate_and_profile():
    _, doc = _run("sphere", "--d", "2", "--n", "5", "--enumerate")
    assert doc["count"] == 8 and [1, 2] in doc["points"]
    _, doc = _run("sphere", "--d", "5", "--n", "1", "--profile", "--m", "2")
    assert doc["total"] == 10 and len(doc["counts"]) == 5


def test_qeta():
    code, doc = _run("qeta", "--eta", "0.5", "--c", "1")
    assert code == 0 and doc["q"] == 12


def test_expsum_evaluate():
    _, doc = _run("expsum", "evaluate", "--d", "5", "--n", "1", "--theta", "0.25,0,0,0,0")
    assert doc["value"]["re"] == pytest.approx(0.8)


def test_exit_codes(files):
    assert _run("sphere", "--d", "5")[0] == 1
    assert _run("bogus")[0] == 1
    assert _run("sphere", "--d", "0", "--n", "1")[0] == 1
    assert _run("sphere", "--d", "5", "--n", "500", "--enumerate", "--max-points", "10")[0] == 3
    code, doc = _run("ergodic", "equidistribution", "--set", str(files / "set.json"),
                     "--q", "2", "--delta", "0.5")
    assert code == 2 and doc["equidistributed"] is False
    assert _run("ergodic", "project", "--set", str(files / "missing.json"), "--q", "2")[0] == 1
    code, doc = _run("ergodic", "increment", "--set", str(files / "set.json"), "--q", "2")
    assert code == 1 and doc["error"]["type"] == "usage"


def test_gen_then_search(tmp_path):
    out = tmp_path / "w.json"
    code, _, path = run(["gen", "planted", "--d", "2", "--l", "5",
                         "--witness", "[[0,0],[1,0],[1,1]]", "-o", str(out)])
    assert code == 0 and path == str(out)
    main(["gen", "planted", "--d", "2", "--l", "5", "--witness", "[[0,0],[1,0],[1,1]]",
          "-o", str(out)])
    code, doc = _run("search", "chain", "--window", str(out), "--gaps", "1,1")
    assert code == 0 and doc["found"]
    code, doc = _run("search", "chain", "--window", str(out), "--gaps", "9")
    assert code == 2 and doc["status"] == "not_found"


def test_tree_commands(files):
    code, doc = _run("tree", "count", "--tree", str(files / "tree.json"), "--d", "5")
    assert code == 0 and doc["immersions"] == 10 and doc["embeddings"] == 10
    _, doc = _run("tree", "enumerate", "--tree", str(files / "tree.json"), "--d", "5", "--limit", "3")
    assert len(doc["immersions"]) == 3


def test_output_is_canonical_json():
    _, text, _ = run(["expsum", "scan", "--d", "5", "--eta", "0.5", "--c", "0.02",
                      "--n", "100", "--samples", "20"])
    doc = json.loads(text)
    assert text.endswith("\n") and list(doc)[:2] == ["command", "params"]
    assert "e-" in text or "." in text


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "spherical_recurrence.cli", "qeta",
                           "--eta", "0.5", "--c", "1"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["q"] == 12
