import subprocess
import sys

import pytest

from pdte.cli import main
from pdte.tree import classify_plain, random_tree, save_model


def kv(text):
    return dict(line.split("=", 1) for line in text.splitlines() if "=" in line)


def call(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, kv(out.out), out.err


@pytest.fixture
def model_file(tmp_path):
    t = random_tree(4, 8, 3, seed=3)
    path = tmp_path / "tree.json"
    path.write_text(save_model(t))
    return t, path


@pytest.mark.parametrize("scheme, packing", [("bin", "none"), ("bin", "label"), ("int", "none"), ("int", "output")])
def test_round_trip_through_files(capsys, tmp_path, model_file, scheme, packing):
    t, path = model_file
    keys, run = str(tmp_path / "keys"), str(tmp_path / "run")
    x = [3, 200, 17]
    code, out, _ = call(capsys, "keygen", "--scheme", scheme, "--slots", "16", "--keys", keys, "--seed", "1")
    assert code == 0 and out["scheme"] == scheme
    code, out, _ = call(capsys, "encrypt", "--keys", keys, "--bits", "8", "--input", "3,200,17",
                        "--packing", packing, "--offline-dir", run)
    assert code == 0 and int(out["bytes"]) > 0
    code, out, _ = call(capsys, "eval", "--keys", keys, "--model", str(path), "--offline-dir", run)
    assert code == 0 and "max_depth" in out
    code, out, _ = call(capsys, "decrypt", "--keys", keys, "--labels", str(t.params.k), "--offline-dir", run)
    assert code == 0 and int(out["label"]) == classify_plain(t, x)


def test_path_algorithms_agree(capsys, tmp_path, model_file):
    t, path = model_file
    keys = str(tmp_path / "keys")
    call(capsys, "keygen", "--keys", keys, "--seed", "2")
    labels = set()
    for alg in ("naive", "logdepth", "dag"):
        run = str(tmp_path / alg)
        call(capsys, "encrypt", "--keys", keys, "--bits", "8", "--input", "90,1,250", "--offline-dir", run)
        assert call(capsys, "eval", "--keys", keys, "--model", str(path), "--path-alg", alg, "--offline-dir", run)[0] == 0
        labels.add(call(capsys, "decrypt", "--keys", keys, "--labels", str(t.params.k), "--offline-dir", run)[1]["label"])
    assert labels == {str(classify_plain(t, [90, 1, 250]))}


def test_attribute_batch(capsys, tmp_path, model_file):
    t, path = model_file
    keys, run = str(tmp_path / "keys"), str(tmp_path / "run")
    call(capsys, "keygen", "--keys", keys, "--slots", "4")
    xs = [[1, 2, 3], [200, 100, 50], [7, 7, 7]]
    text = ";".join(",".join(map(str, x)) for x in xs)
    call(capsys, "encrypt", "--keys", keys, "--bits", "8", "--input", text, "--packing", "attr", "--offline-dir", run)
    call(capsys, "eval", "--keys", keys, "--model", str(path), "--offline-dir", run)
    out = call(capsys, "decrypt", "--keys", keys, "--labels", str(t.params.k), "--offline-dir", run)[1]
    assert out["labels"] == ",".join(str(classify_plain(t, x)) for x in xs)


def test_explicit_paths(capsys, tmp_path, model_file):
    t, path = model_file
    keys = str(tmp_path / "keys")
    req, resp = tmp_path / "q.bin", tmp_path / "a.bin"
    call(capsys, "keygen", "--keys", keys)
    call(capsys, "encrypt", "--keys", keys, "--bits", "8", "--input", "5,6,7", "--request", str(req))
    call(capsys, "eval", "--keys", keys, "--model", str(path), "--request", str(req), "--response", str(resp))
    out = call(capsys, "decrypt", "--keys", keys, "--labels", str(t.params.k), "--response", str(resp))[1]
    assert int(out["label"]) == classify_plain(t, [5, 6, 7])


def test_eval_only_needs_public_material(capsys, tmp_path, model_file):
    t, path = model_file
    keys, run = tmp_path / "keys", str(tmp_path / "run")
    call(capsys, "keygen", "--keys", str(keys))
    call(capsys, "encrypt", "--keys", str(keys), "--bits", "8", "--input", "5,6,7", "--offline-dir", run)
    (keys / "secret.key").unlink()
    assert call(capsys, "eval", "--keys", str(keys), "--model", str(path), "--offline-dir", run)[0] == 0


def test_bench_heart_disease(capsys):
    code, out, _ = call(capsys, "bench", "--dataset", "heart-disease", "--scheme", "bin", "--seed", "7")
    assert code == 0
    assert (out["n"], out["d"], out["m"]) == ("13", "3", "5")
    assert out["comparison_count"] == "5" and out["correct"] == "true"
    assert int(out["max_depth"]) <= int(out["predicted_depth"])
    again = call(capsys, "bench", "--dataset", "heart-disease", "--scheme", "bin", "--seed", "7")[1]
    assert again == out


def test_bench_custom_int(capsys):
    code, out, _ = call(capsys, "bench", "--scheme", "int", "--depth", "5", "--nodes", "12", "--bits", "8",
                        "--packing", "output", "--slots", "8")
    assert code == 0 and out["correct"] == "true" and out["m"] == "12"


def test_report_formula(capsys):
    code, out, _ = call(capsys, "report", "--formula", "--bits", "16", "--depth", "10")
    assert code == 0
    assert out["formula"] == "|mu-1|+|d-1|+2 = 4+4+2" and out["predicted_depth"] == "10"
    assert int(out["measured_depth"]) <= 10 and out["within_bound"] == "true"
    out = call(capsys, "report", "--formula", "--scheme", "int", "--bits", "16", "--depth", "3", "--no-measure")[1]
    assert out["predicted_depth"] == "5" and "measured_depth" not in out


@pytest.mark.parametrize(
    "argv",
    [
        ["bench"],
        ["bench", "--dataset", "heart-disease", "--packing", "label"],  # 2 slots too few for labels
        ["eval", "--keys", "nowhere", "--offline-dir", "x"],
        ["report", "--formula"],
        ["bench", "--depth", "3", "--scheme", "int", "--packing", "label"],
        ["bench", "--depth", "3", "--scheme", "bin", "--packing", "output"],
    ],
)
def test_errors_exit_nonzero(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == 1 and err.startswith("error=")


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--scheme", "ckks"])
    assert exc.value.code == 2


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "pdte", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "keygen" in out.stdout
