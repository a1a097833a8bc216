import json

import numpy as np
import pytest

from hymera.cli import main
from hymera.constituents import ParameterSet, build_Y
from hymera.perfect import ame43, save_tensor
from hymera.tensor import Tensor

THETA = "1=0.4,2=1.1,3=0.2,4=0.9,5=0.1"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_reports_every_tensor_and_composite(capsys):
    code, out, _ = run(capsys, "verify", "YQR", "--params", THETA)
    doc = json.loads(out)
    assert set(doc["tensors"]) == {"Y", "Q", "R"}
    assert set(doc["composites"]) == {"A", "B", "U", "W"}
    assert all(c["pass"] for c in doc["composites"].values())
    assert doc["tensors"]["R"]["pass"] and doc["tensors"]["Q"]["pass"]
    # Y is unitary only in the vertical grouping, so the doubly-unitary requirement fails
    assert doc["tensors"]["Y"]["checks"] == {"vertical": True, "horizontal": False}
    assert code == 1


def test_verify_corrupted_Y_fails_vertical(capsys, tmp_path):
    y = build_Y(ParameterSet({1: 0.4}))
    data = y.data.copy()
    data[0, 0, 0, 0] = 0
    save_tensor(Tensor(data, y.legs), tmp_path / "y.json")
    code, out, _ = run(capsys, "verify", "YQR", "--params", THETA, "--override", f"Y={tmp_path / 'y.json'}")
    doc = json.loads(out)
    assert code == 1
    assert doc["tensors"]["Y"]["checks"]["vertical"] is False


def test_verify_YQT_reports_scalar_constant(capsys):
    code, out, _ = run(capsys, "verify", "YQT", "--params", "1=0.4,3=0.2,4=0.9,5=0.1,6=1.5,7=0.3")
    t = json.loads(out)["tensors"]["T"]
    assert t["pass"]
    assert t["scalar_constant"] == pytest.approx(np.arctan(1.5) ** 2 + np.cos(0.3) ** 2, abs=1e-12)


def test_randomized_verbs_need_seed(capsys):
    for argv in (["verify", "YQR"], ["spectrum", "YQR"], ["trials", "--trials", "2"]):
        code, _, err = run(capsys, *argv)
        assert code == 2 and "--seed" in err


def test_verify_is_deterministic(capsys):
    a = run(capsys, "verify", "YQS", "--seed", "4")
    b = run(capsys, "verify", "YQS", "--seed", "4")
    assert a == b


def test_bad_input_exit_code(capsys):
    assert run(capsys, "verify", "NOPE", "--seed", "1")[0] == 2
    assert run(capsys, "inflate", "--deflate", "bba")[0] == 2
    assert run(capsys, "perfect-check", "/nonexistent.json")[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_inflate_and_deflate(capsys, tmp_path):
    code, out, _ = run(capsys, "inflate", "--layers", "2", "--out", str(tmp_path))
    assert code == 0
    assert "1 abaab" in out and (tmp_path / "words.txt").exists()
    assert out.startswith("# scale factor 3.7320508")
    code, out, _ = run(capsys, "inflate", "--deflate", "abaabab")
    assert (code, out) == (0, "ab\n")


def test_spectrum(capsys):
    code, out, _ = run(capsys, "spectrum", "YQR", "--seed", "3", "--k", "4")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0] == "index,magnitude,delta" and len(lines) == 5
    assert float(lines[1].split(",")[2]) == 0.0


def test_kac(capsys):
    code, out, _ = run(capsys, "kac", "--model", "ising")
    assert code == 0 and "1,2,1/16,1/8" in out
    code, out, _ = run(capsys, "kac", "--pq", "5", "4")
    assert "3/80" in out


def test_perfect_check(capsys, tmp_path):
    assert run(capsys, "perfect-check", "ame43")[0] == 0
    rng = np.random.default_rng(0)
    save_tensor(Tensor(rng.normal(size=(2,) * 4), "abcd"), tmp_path / "r.json")
    code, out, _ = run(capsys, "perfect-check", str(tmp_path / "r.json"))
    assert code == 1 and json.loads(out)["is_perfect"] is False
    save_tensor(Tensor(np.ones((2, 2, 2)), "abc"), tmp_path / "odd.json")
    assert run(capsys, "perfect-check", str(tmp_path / "odd.json"))[0] == 2
    save_tensor(ame43(), tmp_path / "ame.json")
    assert run(capsys, "perfect-check", str(tmp_path / "ame.json"))[0] == 0


def test_push(capsys, tmp_path):
    save_tensor(build_Y(ParameterSet({1: 0.9})), tmp_path / "y.json")
    save_tensor(Tensor(np.eye(4), ("row", "col")), tmp_path / "id.json")
    code, out, _ = run(capsys, "push", str(tmp_path / "id.json"), str(tmp_path / "y.json"), "--in", "c,d")
    doc = json.loads(out)
    res = (np.array(doc["real"]) + 1j * np.array(doc["imag"])).reshape(doc["shape"])
    assert code == 0 and np.allclose(res, np.eye(4))
    save_tensor(Tensor(np.ones((2, 2, 2, 2)), "abcd"), tmp_path / "bad.json")
    code, _, _ = run(capsys, "push", str(tmp_path / "id.json"), str(tmp_path / "bad.json"), "--in", "c,d")
    assert code == 1


def test_trials_writes_artifacts(capsys, tmp_path):
    code, out, _ = run(capsys, "trials", "--decomposition", "YQR", "YQT", "--trials", "12",
                       "--seed", "2", "--out", str(tmp_path))
    assert code == 0
    for name in ("YQR-54", "YQT-54"):
        d = tmp_path / name
        assert (d / "results.csv").exists() and (d / "summary.json").exists()
        assert (d / "plotdata" / "delta_1.csv").exists()
        assert (d / "figures" / f"{name}_scatter.png").exists()
    assert (tmp_path / "comparison.png").exists()
    assert "envelope shift" in out


def test_trials_from_config(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"decomposition": "YQS", "trials": 5, "cones": ["a", "b", "c"], "weights": "uniform"}))
    code, _, _ = run(capsys, "trials", "--config", str(cfg), "--seed", "0", "--out", str(tmp_path), "--no-figures")
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["config"]["cones"] == ["a", "b", "c"] and summary["trials"] == 5
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"trials": 0}))
    assert run(capsys, "trials", "--config", str(bad), "--seed", "0", "--out", str(tmp_path))[0] == 2


def test_preset_dir_override(capsys, tmp_path, monkeypatch):
    import shutil

    from hymera.composition import preset_dir

    shutil.copytree(preset_dir(), tmp_path / "p")
    monkeypatch.setenv("HYMERA_PRESET_DIR", str(tmp_path / "p"))
    assert run(capsys, "verify", "QR", "--seed", "1")[0] == 0
    (tmp_path / "p" / "decompositions" / "QR-54.json").unlink()
    assert run(capsys, "verify", "QR", "--seed", "1")[0] == 2
