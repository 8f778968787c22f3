import csv
import json

import pytest

from bn2o.cli import main
from bn2o.network import load_network, save_case

from conftest import make_net

GEN_CONFIG = {
    "n_diseases": 10,
    "n_findings": 30,
    "link_density": 3,
    "prior_range": [0.02, 0.1],
    "q_range": [0.3, 0.9],
    "leak_range": [0.0, 0.01],
    "target_positive": [3, 10],
    "target_negative": [1, 5],
    "true_disease_count": [1, 3],
    "n_cases": 3,
}


@pytest.fixture
def generated(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps(GEN_CONFIG))
    out = tmp_path / "run"
    assert main(["generate", "--config", str(cfg), "--out-dir", str(out), "--seed", "3"]) == 0
    return out


def test_generate_layout(generated):
    assert (generated / "network.json").exists()
    assert sorted(p.name for p in (generated / "cases").iterdir()) == [
        "case_001.json", "case_002.json", "case_003.json"
    ]
    rows = list(csv.reader((generated / "manifest.csv").open()))
    assert rows[0] == ["case", "|F+|", "|F-|", "|D|"]
    assert load_network(generated / "network.json").n_diseases == 10


def test_validate(generated, capsys):
    assert main(["validate", "--network", str(generated / "network.json"),
                 "--case", str(generated / "cases" / "case_001.json")]) == 0
    assert "network ok" in capsys.readouterr().out


@pytest.mark.parametrize("model, method", [("noisy-or", "brute"), ("noisy-or", "quickscore"), ("mb", "auto"), ("sb", "auto")])
def test_diagnose(generated, tmp_path, model, method):
    out = tmp_path / "post.csv"
    rc = main(["diagnose", "--network", str(generated / "network.json"),
               "--case", str(generated / "cases" / "case_001.json"),
               "--model", model, "--method", method, "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 10
    assert [int(r["rank"]) for r in rows] == list(range(1, 11))


def test_diagnose_lw_writes_trace(generated, tmp_path):
    out = tmp_path / "lw.csv"
    rc = main(["diagnose", "--network", str(generated / "network.json"),
               "--case", str(generated / "cases" / "case_002.json"),
               "--method", "lw", "--samples", "20000", "--seed", "4", "--out", str(out)])
    assert rc == 0
    assert (tmp_path / "lw.trace.csv").read_text().startswith("disease,batch_1,batch_2,batch_3,batch_4")


def test_compare_outputs(generated, tmp_path):
    out = tmp_path / "cmp.csv"
    rc = main(["compare", "--network", str(generated / "network.json"),
               "--cases", str(generated / "cases"), "--method", "brute",
               "--top", "5", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 15
    assert {r["case_id"] for r in rows} == {"case_001", "case_002", "case_003"}
    summary = list(csv.DictReader((tmp_path / "cmp_summary.csv").open()))
    assert len(summary) == 9


def test_compare_single_case_text(generated, tmp_path, capsys):
    rc = main(["compare", "--network", str(generated / "network.json"),
               "--cases", str(generated / "cases" / "case_001.json"),
               "--format", "text", "--top", "4"])
    assert rc == 0
    assert "noisy-OR" in capsys.readouterr().out


def test_pipeline_is_reproducible(tmp_path):
    cfg = tmp_path / "gen.json"
    cfg.write_text(json.dumps(GEN_CONFIG))
    outputs = []
    for run in ("a", "b"):
        d = tmp_path / run
        assert main(["generate", "--config", str(cfg), "--out-dir", str(d), "--seed", "11"]) == 0
        assert main(["diagnose", "--network", str(d / "network.json"), "--case", str(d / "cases" / "case_001.json"),
                     "--method", "lw", "--samples", "20000", "--seed", "5", "--out", str(d / "diag.csv")]) == 0
        assert main(["compare", "--network", str(d / "network.json"), "--cases", str(d / "cases"),
                     "--method", "lw", "--samples", "20000", "--seed", "5", "--out", str(d / "cmp.csv")]) == 0
        outputs.append([(d / name).read_bytes() for name in
                        ("network.json", "manifest.csv", "diag.csv", "diag.trace.csv", "cmp.csv", "cmp_summary.csv")])
    assert outputs[0] == outputs[1]


def test_exit_code_validation(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"format_version": 1, "diseases": [{"id": "d1", "name": "a", "prior": 0.0}], '
                   '"findings": [{"id": "f1", "name": "x", "leak": 0.0}], "links": []}')
    assert main(["validate", "--network", str(bad)]) == 2


def test_exit_code_parse_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["validate", "--network", str(bad)]) == 2


def test_exit_code_inference(tmp_path):
    net = make_net([0.3], [0.0, 0.0], {(0, 0): 0.5})
    from bn2o.network import CaseEvidence, save_network

    save_network(net, tmp_path / "net.json")
    save_case(CaseEvidence("c", positive=("f2",)), tmp_path / "case.json")
    rc = main(["diagnose", "--network", str(tmp_path / "net.json"), "--case", str(tmp_path / "case.json"),
               "--method", "brute", "--out", str(tmp_path / "o.csv")])
    assert rc == 3


def test_exit_code_io(tmp_path):
    assert main(["validate", "--network", str(tmp_path / "missing.json")]) == 4
