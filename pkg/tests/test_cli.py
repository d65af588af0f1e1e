import json
import subprocess
import sys
from pathlib import Path

import pytest

from uctseries.cli import main

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    report = json.loads(captured.out) if captured.out.strip() else None
    return code, report, captured.err


class TestEstimate:
    def test_two_sample_query(self, capsys):
        code, rep, _ = run(
            capsys, "estimate", "--in", DATA / "two_samples.txt", "--query", "01"
        )
        assert code == 0
        assert rep["lengths"] == [4, 3]
        assert rep["query"]["prob"] == pytest.approx(0.32812, abs=1e-3)
        assert rep["prob"] == pytest.approx(0.0089, abs=5e-4)

    def test_deterministic_reports(self, capsys):
        a = run(capsys, "estimate", "--in", DATA / "mixed.txt")
        b = run(capsys, "estimate", "--in", DATA / "mixed.txt")
        assert a == b

    def test_out_file(self, capsys, tmp_path):
        out = tmp_path / "report.json"
        code, rep, _ = run(
            capsys, "estimate", "--in", DATA / "mixed.txt", "--out", out
        )
        assert code == 0 and rep is None
        assert json.loads(out.read_text())["command"] == "estimate"

    def test_missing_file_is_data_error(self, capsys):
        code, _, err = run(capsys, "estimate", "--in", DATA / "nope.txt")
        assert code == 3
        assert json.loads(err)["error"] == "data"

    def test_bad_usage(self, capsys):
        code = main(["estimate"])  # missing --in
        captured = capsys.readouterr()
        assert code == 2
        assert json.loads(captured.err)["error"] == "usage"

    def test_token_per_line_alphabet(self, capsys, tmp_path):
        f = tmp_path / "tokens.txt"
        f.write_text("up\ndown\nup\nup\n\ndown\nflat\n")
        code, rep, _ = run(
            capsys, "estimate", "--in", f, "--alphabet", "up,down,flat",
            "--query", "up,up",
        )
        assert code == 0
        assert rep["lengths"] == [4, 2]
        assert 0 < rep["query"]["prob"] < 1


class TestPredict:
    def test_conditionals_sum_to_one(self, capsys):
        code, rep, _ = run(capsys, "predict", "--in", DATA / "alternating.txt")
        assert code == 0
        total = sum(rep["conditionals"].values())
        assert total == pytest.approx(1.0, abs=1e-9)
        # alternating history strongly suggests the next symbol flips
        assert rep["conditionals"]["0"] > 0.8

    def test_side_information(self, capsys):
        code, rep, _ = run(
            capsys, "predict",
            "--in", DATA / "side_x.txt", "--in2", DATA / "side_y.txt",
        )
        assert code == 0
        assert "side_info" in rep
        assert sum(rep["conditionals"].values()) == pytest.approx(1.0, abs=1e-9)

    def test_side_information_length_mismatch(self, capsys):
        code, _, err = run(
            capsys, "predict",
            "--in", DATA / "side_x.txt", "--in2", DATA / "side_x.txt",
        )
        assert code == 3
        assert "one more symbol" in json.loads(err)["detail"]


class TestCompressRoundTrip:
    def test_round_trip_bytes_identical(self, capsys, tmp_path):
        blob = tmp_path / "seq.uct"
        text = tmp_path / "seq.txt"
        code, rep, _ = run(
            capsys, "compress", "--in", DATA / "mixed.txt", "--out", blob
        )
        assert code == 0
        assert rep["payload_bits"] <= rep["ideal_bits"] + 3
        code, rep2, _ = run(
            capsys, "decompress", "--in", blob, "--out", text
        )
        assert code == 0
        assert text.read_text() == (DATA / "mixed.txt").read_text()

    def test_multisample_input_rejected(self, capsys, tmp_path):
        code, _, err = run(
            capsys, "compress", "--in", DATA / "two_samples.txt",
            "--out", tmp_path / "x.uct",
        )
        assert code == 3

    def test_missing_out_is_usage_error(self, capsys):
        code, _, err = run(capsys, "compress", "--in", DATA / "mixed.txt")
        assert code == 2

    def test_decompress_requires_out(self, capsys, tmp_path):
        blob = tmp_path / "seq.uct"
        run(capsys, "compress", "--in", DATA / "mixed.txt", "--out", blob)
        code, _, _ = run(capsys, "decompress", "--in", blob)
        assert code == 2


class TestIdentityCommand:
    def test_uniform_data_accepts(self, capsys):
        code, rep, _ = run(
            capsys, "test-identity", "--in", DATA / "mixed.txt",
            "--null", DATA / "uniform_null.txt", "--alpha", "0.05",
        )
        assert code == 0
        assert rep["verdict"] == "accept"
        assert rep["provider"] == "ideal-r"

    def test_alternating_data_rejects(self, capsys):
        code, rep, _ = run(
            capsys, "test-identity", "--in", DATA / "alternating.txt",
            "--null", DATA / "uniform_null.txt", "--alpha", "0.05",
        )
        assert code == 1
        assert rep["verdict"] == "reject"

    def test_null_required(self, capsys):
        code, _, err = run(
            capsys, "test-identity", "--in", DATA / "mixed.txt"
        )
        assert code == 2


class TestIndependenceCommand:
    def test_alternating_rejects(self, capsys):
        code, rep, _ = run(
            capsys, "test-independence", "--in", DATA / "alternating.txt",
            "--order", "0", "--alpha", "0.01",
        )
        assert code == 1
        assert rep["verdict"] == "reject"
        assert rep["test"] == "serial-independence"

    def test_multisample_accepts(self, capsys):
        code, rep, _ = run(
            capsys, "test-independence", "--in", DATA / "two_samples.txt",
            "--order", "0", "--alpha", "0.05",
        )
        assert code == 0
        assert rep["lengths"] == [4, 3]

    def test_external_provider(self, capsys):
        code, rep, _ = run(
            capsys, "test-independence", "--in", DATA / "mixed.txt",
            "--order", "0", "--alpha", "0.05",
            "--provider", "external", "--compressor-cmd", "gzip -c",
        )
        assert code == 0
        assert rep["provider"].startswith("external:")

    def test_arithmetic_provider(self, capsys):
        code, rep, _ = run(
            capsys, "test-independence", "--in", DATA / "mixed.txt",
            "--order", "0", "--alpha", "0.05", "--provider", "arithmetic",
        )
        assert code == 0
        assert rep["provider"] == "arithmetic"


class TestDensityCommand:
    def test_uniform_reals(self, capsys):
        code, rep, _ = run(
            capsys, "density", "--in", DATA / "uniform_reals.csv",
            "--domain", "0:1", "--depth", "4",
        )
        assert code == 0
        assert rep["n"] == 400
        assert rep["bits_per_value"] < 0.5

    def test_renormalize_flag_lowers_bits(self, capsys):
        _, plain, _ = run(
            capsys, "density", "--in", DATA / "uniform_reals.csv",
            "--domain", "0:1", "--depth", "4",
        )
        _, renorm, _ = run(
            capsys, "density", "--in", DATA / "uniform_reals.csv",
            "--domain", "0:1", "--depth", "4", "--renormalize-depth-weights",
        )
        assert renorm["bits_per_value"] < plain["bits_per_value"]

    def test_domain_required(self, capsys):
        code, _, _ = run(
            capsys, "density", "--in", DATA / "uniform_reals.csv", "--domain", ""
        )
        assert code == 2

    def test_out_of_domain_value(self, capsys):
        code, _, err = run(
            capsys, "density", "--in", DATA / "uniform_reals.csv",
            "--domain", "0:0.5",
        )
        assert code == 3


class TestMonteCarloCommand:
    def test_identity_type1(self, capsys):
        code, rep, _ = run(
            capsys, "montecarlo", "--test", "identity", "--trials", "40",
            "--alpha", "0.05", "--length", "64", "--seed", "3",
        )
        assert code == 0
        assert rep["pass"] is True
        assert rep["rejection_rate"] <= rep["bound"]

    def test_partition_type1(self, capsys):
        code, rep, _ = run(
            capsys, "montecarlo", "--test", "partition-si", "--trials", "30",
            "--alpha", "0.05", "--length", "48", "--depth", "3", "--seed", "4",
        )
        assert code == 0

    def test_deterministic_across_runs(self, capsys):
        args = ("montecarlo", "--test", "independence", "--trials", "25",
                "--alpha", "0.05", "--length", "50", "--seed", "9")
        assert run(capsys, *args) == run(capsys, *args)

    def test_kl_redundancy(self, capsys):
        code, rep, _ = run(
            capsys, "montecarlo", "--test", "kl-redundancy",
            "--source", DATA / "sticky_chain.txt",
            "--trials", "10", "--length", "200", "--seed", "5",
        )
        assert code == 0
        assert rep["value_bits_per_letter"] > 0


class TestSubprocessEntry:
    def test_module_invocation(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "uctseries", "estimate",
             "--in", str(DATA / "two_samples.txt"), "--query", "01"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        rep = json.loads(proc.stdout)
        assert rep["query"]["prob"] == pytest.approx(0.32812, abs=1e-3)

    def test_reject_exit_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "uctseries", "test-independence",
             "--in", str(DATA / "alternating.txt"), "--order", "0",
             "--alpha", "0.01"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 1
