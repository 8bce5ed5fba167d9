import json
from datetime import datetime

import pandas as pd
import pytest

import src.config as config_module
import src.main as main_module
import src.services.checks as checks_module
from src.main import EXIT_CHECK_FAILED, EXIT_IO, EXIT_OK, EXIT_USAGE, main
from src.models.errors import QuadratureError
from src.models.run import CheckReport
from src.services.storage import MANIFEST_SUFFIX, ResultStorage, manifest_path_for
from src.utils.digest import file_digest, fingerprint


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    root = tmp_path / "results"
    monkeypatch.setenv(config_module.OUTPUT_DIR_ENV, str(root))
    return root


class TestConfig:
    def test_missing_file(self, tmp_path, monkeypatch):
        monkeypatch.setattr(config_module, "CONFIG_FILE", tmp_path / "missing.yml")
        with pytest.raises(FileNotFoundError):
            config_module.load_settings()

    def test_invalid_value(self, tmp_path, monkeypatch):
        path = tmp_path / "config.yml"
        path.write_text("mc_chunk_size: 0\n", encoding="utf-8")
        monkeypatch.setattr(config_module, "CONFIG_FILE", path)
        with pytest.raises(ValueError):
            config_module.load_settings()

    def test_partial_file_uses_defaults(self, tmp_path, monkeypatch):
        path = tmp_path / "config.yml"
        path.write_text("log_level: DEBUG\nworkers: 4\n", encoding="utf-8")
        monkeypatch.setattr(config_module, "CONFIG_FILE", path)
        loaded = config_module.load_settings()
        assert loaded.log_level == "debug"
        assert loaded.workers == 4
        assert loaded.mc_seed == 42

    def test_output_dir_override(self, output_dir):
        assert config_module.settings.resolve_output_dir() == output_dir


class TestResultStorage:
    def test_save_frame_writes_manifest(self, output_dir):
        storage = ResultStorage()
        frame = pd.DataFrame({"t": [0.0, 1.0], "p_suc": [0.0, 0.123456789012345]})
        parameters = {"scheme": "1cw", "eta": 0.5}
        path = storage.save_frame(frame, "sweep.csv", "sweep", parameters, datetime.now(), scheme="1cw")
        assert path.parent.parent == output_dir.resolve()
        text = path.read_text(encoding="utf-8")
        assert "\r\n" not in text
        assert "0.123456789012345" in text

        manifest = storage.load_manifest(path)
        assert manifest.output_file == "sweep.csv"
        assert manifest.output_digest == file_digest(path)
        assert manifest.parameters_digest == fingerprint(parameters)
        assert manifest.scheme == "1cw"
        assert {"python", "numpy", "scipy"} <= set(manifest.environment)

    def test_save_json_to_explicit_path(self, tmp_path, output_dir):
        target = tmp_path / "custom" / "result.json"
        path = ResultStorage().save_json({"fidelity": 0.85, "label": "Ψ+"}, "x.json", "analytic", {}, datetime.now(), out=target)
        assert path == target
        assert json.loads(target.read_text(encoding="utf-8")) == {"fidelity": 0.85, "label": "Ψ+"}
        assert manifest_path_for(target).name == "result" + MANIFEST_SUFFIX

    def test_missing_manifest(self, tmp_path):
        assert ResultStorage(tmp_path).load_manifest(tmp_path / "none.csv") is None

    def test_run_ids_are_unique(self, tmp_path):
        storage = ResultStorage(tmp_path)
        ids = {storage.generate_run_id() for _ in range(100)}
        assert len(ids) == 100
        assert all(len(i) == 12 for i in ids)


class TestCli:
    def test_analytic(self, capsys, output_dir):
        assert main(["analytic", "--scheme", "1cw", "--p1", "0.15", "--eta", "0.005"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["p_suc"] == pytest.approx(1.498875e-3, rel=1e-6)

    def test_sweep_writes_csv(self, capsys, tmp_path, output_dir):
        out = tmp_path / "sweep.csv"
        code = main(["sweep", "--scheme", "1cw", "--param", "t", "--start", "0", "--stop", "2", "--steps", "5", "--eta", "0.3", "--out", str(out)])
        assert code == EXIT_OK
        frame = pd.read_csv(out)
        assert list(frame["t"]) == [0.0, 0.5, 1.0, 1.5, 2.0]
        assert manifest_path_for(out).exists()

    def test_purify(self, capsys, output_dir):
        assert main(["purify", "--p1", "0.2", "--eta", "0.01", "--steps-J", "2"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_pairs"] == 4
        assert payload["fidelity"] > 0.99

    def test_benchmark(self, capsys, output_dir):
        assert main(["benchmark", "--preset", "yb171-twophoton"]) == EXIT_OK
        payload = json.loads(capsys.readouterr().out)
        assert payload["seconds_per_event"] == pytest.approx(38.56, rel=1e-3)

    def test_usage_errors(self, capsys, output_dir):
        assert main([]) == EXIT_USAGE
        assert main(["analytic", "--scheme", "5ph"]) == EXIT_USAGE
        assert main(["analytic", "--scheme", "1cw", "--eta", "0.1"]) == EXIT_USAGE
        assert main(["analytic", "--scheme", "1cw", "--eta", "1.5", "--p1", "0.1"]) == EXIT_USAGE
        assert main(["sweep", "--scheme", "1cw"]) == EXIT_USAGE
        assert main(["check", "--suite", "nonsense"]) == EXIT_USAGE

    def test_check_pass(self, capsys, output_dir):
        assert main(["check", "--suite", "purify-oracle"]) == EXIT_OK

    def test_check_failure(self, capsys, output_dir, monkeypatch):
        failing = CheckReport(suite="completeness", passed=False, max_deviation=1.0, tolerance=1e-8)
        monkeypatch.setitem(checks_module.SUITES, "completeness", lambda: failing)
        assert main(["check", "--suite", "completeness"]) == EXIT_CHECK_FAILED

    def test_io_error(self, tmp_path, output_dir):
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        out = blocker / "nested" / "result.json"
        assert main(["analytic", "--scheme", "1cw", "--p1", "0.1", "--eta", "0.1", "--out", str(out)]) == EXIT_IO

    def test_quadrature_failure(self, capsys, output_dir, monkeypatch):
        def diverging(*args, **kwargs):
            raise QuadratureError("click sector: maximum number of subdivisions reached")

        monkeypatch.setattr(main_module, "scenario_probabilities", diverging)
        argv = ["unravel", "--scheme", "1cw", "--eta", "0.5", "--t", "1", "--method", "quadrature"]
        assert main(argv) == EXIT_USAGE
        assert capsys.readouterr().out == ""
