import csv
import io
import json

import jsonschema
import pytest

from seqqkd.cli import DOCUMENT_SCHEMA, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def doc_of(capsys, *argv):
    code, out, _ = run(capsys, *argv, "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, DOCUMENT_SCHEMA)
    return code, doc


def csv_rows(text):
    return list(csv.reader(line for line in io.StringIO(text) if not line.startswith("#")))


def test_tables_json_values(capsys):
    code, doc = doc_of(capsys, "tables")
    assert code == 0
    t = doc["result"]
    assert t["DA0"]["A"] == {"alpha": 0.25, "beta": 0.25, "gamma": 0.0, "conclusive": True}
    assert t["DA0"]["B"]["beta"] == 0.0
    assert t["DA1"]["C"]["conclusive"] is True
    assert t["DA1"]["D"]["beta"] == 0.0
    assert sum(cell["conclusive"] for row in t.values() for cell in row.values()) == 2


def test_tables_csv_matches_json(capsys):
    _, doc = doc_of(capsys, "tables")
    _, text, _ = run(capsys, "tables", "--format", "csv")
    header, *rows = csv_rows(text)
    assert header == ["setting", "letter", "alpha", "beta", "gamma", "conclusive"]
    for s, L, a, b, g, c in rows:
        cell = doc["result"][s][L]
        assert (float(a), float(b), float(g), c == "True") == (cell["alpha"], cell["beta"], cell["gamma"], cell["conclusive"])


def test_tables_pretty(capsys):
    code, out, _ = run(capsys, "tables")
    assert code == 0 and "1/4*" in out and "1/8" in out


@pytest.mark.parametrize("variant, equal", [("V1", True), ("V2", True), ("V3", False)])
def test_density_command(capsys, variant, equal):
    code, doc = doc_of(capsys, "density", "--variant", variant)
    assert code == 0 and doc["result"]["equal"] is equal


def test_density_three_paths(capsys):
    _, doc = doc_of(capsys, "density", "--paths", "3")
    diag = [doc["result"]["rho0"]["matrix"][i][i][0] for i in range(6)]
    assert diag == pytest.approx([1 / 3, 0, 1 / 3, 0, 1 / 6, 1 / 6], abs=1e-12)


def test_qkd_honest_exit_zero(capsys, tmp_path):
    tr = tmp_path / "t.jsonl"
    code, out, _ = run(capsys, "qkd", "--n", "200", "--bits", "5", "--seed", "3", "--transcript", str(tr))
    assert code == 0
    doc = json.loads(out)
    jsonschema.validate(doc, DOCUMENT_SCHEMA)
    assert len(doc["result"]["agreed_key"]) == 5
    lines = tr.read_text().splitlines()
    assert all(json.loads(line)["event"] for line in lines)


def test_qkd_eve_exit_two(capsys):
    code, out, _ = run(capsys, "qkd", "--n", "100", "--bits", "20", "--eve", "random-da", "--seed", "1")
    assert code == 2
    assert json.loads(out)["result"]["aborted_at"] is not None


@pytest.mark.parametrize(
    "argv",
    [["qkd", "--n", "0"], ["bogus"], ["qkd", "--variant", "V7"], ["qkd", "--eve", "fixed"], ["merge"],
     ["qkd", "--config", "/nonexistent.json"]],
)
def test_usage_errors_exit_one(capsys, argv):
    assert run(capsys, *argv)[0] == 1


def test_same_seed_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["eve", "--n", "60", "--bits", "4", "--eve", "random-da", "--trials", "5", "--seed", "9"]
    run(capsys, *argv, "--out", str(a))
    run(capsys, *argv, "--out", str(b))
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.json"
    run(capsys, *argv, "--out", str(c), "--workers", "2")
    ja, jc = json.loads(a.read_text()), json.loads(c.read_text())
    assert ja["result"] == jc["result"]


def test_qkd_csv_and_json_agree(capsys):
    argv = ["qkd", "--n", "100", "--bits", "3", "--seed", "5"]
    _, doc = doc_of(capsys, *argv)
    _, text, _ = run(capsys, *argv, "--format", "csv")
    header, *rows = csv_rows(text)
    assert header == ["index", "event", "payload"]
    assert [r[1] for r in rows] == [e["event"] for e in doc["result"]["transcript"]]


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 120, "bits": 2, "seed": 4}))
    _, doc = doc_of(capsys, "qkd", "--config", str(cfg), "--bits", "3")
    params = doc["meta"]["params"]
    assert (params["n"], params["bits"], params["seed"]) == (120, 3, 4)


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"photons": 3}))
    assert run(capsys, "qkd", "--config", str(cfg))[0] == 1


def test_split_then_merge(capsys, tmp_path):
    out = tmp_path / "split.json"
    code, _, _ = run(capsys, "split", "--paths", "2", "--n", "200", "--bits", "12", "--seed", "2", "--out", str(out))
    assert code == 0
    doc = json.loads(out.read_text())
    jsonschema.validate(doc, DOCUMENT_SCHEMA)
    assert doc["result"]["merged_matches"] is True
    code, merged = doc_of(capsys, "merge", str(out), "--bits", "12")
    assert code == 0 and merged["result"]["key"] == doc["result"]["alice_key"]


def test_merge_missing_index_exit_one(capsys, tmp_path):
    f = tmp_path / "p.json"
    f.write_text(json.dumps({"0": 1, "2": 0}))
    code, _, err = run(capsys, "merge", str(f), "--bits", "3")
    assert code == 1 and "1" in err


def test_variants_json(capsys):
    code, doc = doc_of(capsys, "variants", "--trials", "60", "--n", "32", "--seed", "1")
    assert code == 0
    r = doc["result"]
    assert r["variants"]["V1"]["rho_distance"] == 0.0
    assert r["variants"]["V3"]["rho_distance"] > 0.5
    assert r["channels"]["channel_a_accuracy"] == 1.0
