import json
from pathlib import Path

import numpy as np
import pytest

from spotlight.cli import main
from spotlight.files import read_binary, write_csv

DATA = Path(__file__).parent / "data" / "planted"


def audit_args(out, *extra):
    return [
        "audit",
        "--embeddings", str(DATA / "embeddings.csv"),
        "--losses", str(DATA / "losses.csv"),
        "--metadata", str(DATA / "metadata.jsonl"),
        "--size-fraction", "0.02",
        "--num-spotlights", "2",
        "--out", str(out),
        *extra,
    ]


@pytest.fixture(scope="module")
def report_path(tmp_path_factory):
    out = tmp_path_factory.mktemp("audit") / "report.json"
    assert main(audit_args(out)) == 0
    return out


def test_audit_finds_bundled_cluster(report_path):
    truth = set(json.loads((DATA / "truth.json").read_text())["clusters"][0])
    report = json.loads(report_path.read_text())
    first = report["spotlights"][0]
    top = [e["index"] for e in first["top"]]
    assert len(set(top) & truth) >= 0.9 * len(top)
    assert first["tokens"][0]["token"] == "marker_0"
    assert first["categories"][0]["category"] == "planted_0"
    assert report["config_echo"]["config"]["size_fraction"] == 0.02


def test_audit_is_byte_deterministic(tmp_path, report_path):
    again = tmp_path / "again.json"
    assert main(audit_args(again)) == 0
    assert again.read_bytes() == report_path.read_bytes()


def test_summarize_prints_tables(report_path, capsys):
    assert main(["summarize", "--report", str(report_path), "--spotlight", "1"]) == 0
    out = capsys.readouterr().out
    assert "marker_0" in out and "planted_0" in out and "Top-weighted examples" in out


def test_summarize_out_of_range(report_path):
    assert main(["summarize", "--report", str(report_path), "--spotlight", "3"]) == 1


def test_usage_errors(tmp_path):
    assert main(["audit", "--embeddings", str(DATA / "embeddings.csv"), "--out", str(tmp_path / "r.json")]) == 1
    assert main(audit_args(tmp_path / "r.json", "--size-fraction", "1.5")) == 1
    assert main(["no-such-command"]) == 1


def test_data_errors_exit_two(tmp_path):
    write_csv(tmp_path / "x.csv", np.ones((4, 2)))
    (tmp_path / "l.csv").write_text("1\n2\n")
    args = ["audit", "--embeddings", str(tmp_path / "x.csv"), "--losses", str(tmp_path / "l.csv"),
            "--out", str(tmp_path / "r.json")]
    assert main(args) == 2
    args[4] = str(tmp_path / "absent.csv")
    assert main(args) == 2


def test_project_command(tmp_path):
    out = tmp_path / "p.bin"
    assert main(["project", "--embeddings", str(DATA / "embeddings.csv"), "--target-dim", "4",
                 "--seed", "3", "--out", str(out)]) == 0
    Y = read_binary(out)
    assert Y.shape == (2000, 4)
    assert main(["project", "--embeddings", str(DATA / "embeddings.csv"), "--target-dim", "16",
                 "--out", str(tmp_path / "q.bin")]) == 1


def test_audit_with_projection(tmp_path):
    out = tmp_path / "r.json"
    assert main(audit_args(out, "--project-dim", "8", "--num-spotlights", "1")) == 0
    report = json.loads(out.read_text())
    assert report["dataset_summary"]["d"] == 8 and report["dataset_summary"]["source_dim"] == 16


def test_gen_fixture_and_oracle(tmp_path, capsys):
    assert main(["gen-fixture", "--out-dir", str(tmp_path), "--n-background", "190", "--n-cluster", "10",
                 "--d", "2", "--format", "binary", "--seed", "1"]) == 0
    assert read_binary(tmp_path / "embeddings.bin").shape == (200, 2)
    truth = json.loads((tmp_path / "truth.json").read_text())
    assert len(truth["clusters"][0]) == 10
    capsys.readouterr()
    assert main(["oracle", "--embeddings", str(tmp_path / "embeddings.bin"), "--losses",
                 str(tmp_path / "losses.bin"), "--size-fraction", "0.05", "--grid-points", "21",
                 "--log-precision-num", "13"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["size"] == 10 and result["objective"] > 2.0
