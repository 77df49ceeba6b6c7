import json

from umourre.cli import main
from umourre.registry import CHECKS, PLUMBING


def write_config(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def shift_config(tmp_path, out="out"):
    return write_config(tmp_path, {
        "model": {"name": "shift"},
        "suite": [
            {"op": "certify_mourre", "params": {"K": 32}},
            {"op": "verify_identity_a"},
        ],
        "output_dir": str(tmp_path / out),
    })


class TestRun:
    def test_pass_suite_exit_zero(self, tmp_path, capsys):
        cfg = shift_config(tmp_path)
        assert main(["run", "--config", cfg]) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        names = [c["name"] for c in report["checks"]]
        assert names == ["certify_mourre", "verify_identity_a"]
        assert all(c["status"] == "pass" for c in report["checks"])
        cm = report["checks"][0]["payload"]
        assert abs(cm["a_estimate"] - 1.0) < 1e-12
        assert all("anchor" in c and c["anchor"] for c in report["checks"])

    def test_empty_suite_valid(self, tmp_path):
        cfg = write_config(tmp_path, {"model": {"name": "shift"}, "suite": [],
                                      "output_dir": str(tmp_path / "o")})
        assert main(["run", "--config", cfg]) == 0
        report = json.loads((tmp_path / "o" / "report.json").read_text())
        assert report["checks"] == []

    def test_unknown_key_exit_two(self, tmp_path):
        cfg = write_config(tmp_path, {"model": {"name": "shift"}, "bogus": 1})
        assert main(["run", "--config", cfg]) == 2

    def test_parse_error_exit_two_with_position(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"model": {"name": "shift"},\n  "suite": [}')
        assert main(["run", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_tolerance_range_enforced(self, tmp_path):
        cfg = write_config(tmp_path, {"model": {"name": "shift"},
                                      "tolerances": {"virial": 1.0}})
        assert main(["run", "--config", cfg]) == 2

    def test_unknown_model_param_rejected(self, tmp_path):
        cfg = write_config(tmp_path, {"model": {"name": "shift", "K": 4}})
        assert main(["run", "--config", cfg]) == 2

    def test_constant_h_term_exit_one(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {
            "model": {"name": "cocycle", "m": 1,
                      "h_hat": {"0": [0.3, 0.0], "1": [0.0, -0.08]},
                      "theta": 0.6180339887498949, "K": 16},
            "suite": [{"op": "ergodic_average_bound"}],
            "output_dir": str(tmp_path / "o"),
        })
        assert main(["run", "--config", cfg]) == 1
        assert "ergodic_average_bound" in capsys.readouterr().err

    def test_jobs_flag_keeps_csv_identical(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"name": "shift"},
            "suite": [{"op": "delta_factorization", "params": {"K": 10, "count": 8}}],
        })
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "s1")]) == 0
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "s2"),
                     "--jobs", "4"]) == 0
        a = (tmp_path / "s1" / "delta_factorization.csv").read_bytes()
        b = (tmp_path / "s2" / "delta_factorization.csv").read_bytes()
        assert a == b

    def test_eigenvalue_table_schema(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"name": "free_evolution", "T": 1.0, "Xi": 1.5, "M": 64},
            "suite": [{"op": "count_window_eigenvalues"}],
            "output_dir": str(tmp_path / "o"),
        })
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
        header = (tmp_path / "o" / "count_window_eigenvalues.csv").read_text().splitlines()[1]
        assert header.split(",")[:3] == ["angle", "multiplicity_estimate",
                                         "virial_residual"]

    def test_csv_deterministic(self, tmp_path):
        cfg = write_config(tmp_path, {
            "model": {"name": "shift"},
            "suite": [{"op": "delta_factorization", "params": {"K": 10, "count": 6}}],
            "output_dir": str(tmp_path / "a"),
        })
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["run", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        a = (tmp_path / "a" / "delta_factorization.csv").read_bytes()
        b = (tmp_path / "b" / "delta_factorization.csv").read_bytes()
        assert a == b
        assert a.splitlines()[0].startswith(b"# config_hash=")


class TestListChecks:
    def test_pinned_registry_entries(self, capsys):
        assert main(["list-checks"]) == 0
        out = capsys.readouterr().out
        assert "verify_identity_a" in out
        assert "the operator $H_\\theta$ is of class $C^1(A)$" in out
        assert "mourre_constant_cocycle" in out
        assert "U^*[P_n,U]≥π" in out
        assert "lap_sweep" in out
        assert "exist in the weak* topology" in out

    def test_anchor_completeness(self):
        for spec in CHECKS.values():
            assert spec.anchor and (spec.anchor == PLUMBING or len(spec.anchor) > 3)


class TestReproduce:
    def test_roundtrip(self, tmp_path):
        cfg = shift_config(tmp_path)
        assert main(["run", "--config", cfg]) == 0
        assert main(["reproduce", str(tmp_path / "out" / "report.json")]) == 0

    def test_corrupted_report_exit_three(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["reproduce", str(bad)]) == 3
        bad.write_text('{"version": "0.1.0"}')
        assert main(["reproduce", str(bad)]) == 3

    def test_version_mismatch_exit_three(self, tmp_path):
        cfg = shift_config(tmp_path)
        main(["run", "--config", cfg])
        path = tmp_path / "out" / "report.json"
        report = json.loads(path.read_text())
        report["version"] = "0.0.0"
        path.write_text(json.dumps(report))
        assert main(["reproduce", str(path)]) == 3

    def test_payload_drift_exit_three(self, tmp_path):
        cfg = shift_config(tmp_path)
        main(["run", "--config", cfg])
        path = tmp_path / "out" / "report.json"
        report = json.loads(path.read_text())
        report["checks"][0]["payload"]["a_estimate"] = 0.5
        path.write_text(json.dumps(report))
        assert main(["reproduce", str(path)]) == 3
