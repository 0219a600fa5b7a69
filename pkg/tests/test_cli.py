"""Command-line interface: subcommands, config precedence, exit codes."""
import json
import subprocess
import sys

import pytest

from lenrepro.cli import main


def run_cli(argv, monkeypatch=None, env=None):
    if env:
        for k, v in env.items():
            monkeypatch.setenv(k, v)
    return main(argv)


class TestSchedule:
    def test_default_schedule_csv(self, tmp_path):
        out = tmp_path / "schedule.csv"
        assert main(["schedule", "--seed", "3", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "index,nominal_length_cm,first_dot_cm,is_practice"
        assert len(lines) == 70  # header + 3 practice + 66 main
        assert sum(1 for li in lines[1:] if li.endswith(",1")) == 3

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["schedule", "--seed", "3", "--out", str(a)])
        main(["schedule", "--seed", "3", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestSimulateAnalyze:
    def test_zero_noise_roundtrip(self, tmp_path):
        trials = tmp_path / "trials.csv"
        outdir = tmp_path / "analysis"
        rc = main([
            "simulate", "--seed", "5", "--participants", "3",
            "--conditions", "a,b", "--wf", "0", "--motor-sd", "0",
            "--out", str(trials),
        ])
        assert rc == 0
        header = trials.read_text().splitlines()[0]
        assert header == ("participant_id,condition,trial_index,"
                          "nominal_length_cm,actual_length_cm,response_cm")
        rc = main(["analyze", "--in", str(trials), "--out", str(outdir)])
        assert rc == 0
        cond = (outdir / "conditions.csv").read_text().splitlines()
        assert len(cond) == 3
        for line in cond[1:]:
            fields = line.split(",")
            assert fields[1] == "3"
            assert fields[2] == "0.000000"  # perfect observer: ri = 0
        report = (outdir / "report.txt").read_text()
        assert "## paired contrasts" in report

    def test_simulate_requires_seed(self, tmp_path, capsys):
        rc = main(["simulate", "--out", str(tmp_path / "t.csv")])
        assert rc == 1
        assert capsys.readouterr().err.startswith("error:")


class TestFit:
    def test_fit_from_plain_summary(self, tmp_path):
        from lenrepro.fitting import FitConfig
        from lenrepro.model import (
            DEFAULT_STIMULI, GaussianBelief, NoiseModel, predict_errors,
        )
        b, c, _ = predict_errors(
            NoiseModel.weber(0.2), GaussianBelief(10, 1.5), DEFAULT_STIMULI,
            FitConfig().motor,
        )
        summary = tmp_path / "obs.csv"
        summary.write_text(f"condition,bias,cv\nsolo,{b!r},{c!r}\n")
        outdir = tmp_path / "fit"
        rc = main(["fit", "--in", str(summary), "--out", str(outdir)])
        assert rc == 0
        report = (outdir / "fit_report.txt").read_text()
        assert "shared_sigma_p_cm: 1.500000" in report
        assert "solo: wf=0.200000" in report
        residuals = (outdir / "residuals.csv").read_text().splitlines()
        assert residuals[0] == "sigma_p,total_residual"
        assert len(residuals) == 100

    def test_fit_requires_input(self, capsys):
        assert main(["fit"]) == 1
        assert "error:" in capsys.readouterr().err


class TestCurves:
    def test_single_point_endpoint(self, tmp_path):
        outdir = tmp_path / "curves"
        rc = main([
            "curves", "--sigma-p", "1.5", "--wf-max", "0",
            "--ri-max", "0", "--out", str(outdir),
        ])
        assert rc == 0
        err = (outdir / "error_curves.csv").read_text().splitlines()
        assert err == ["sigma_p,wf,bias,cv",
                       "1.500000,0.000000,0.000000,0.120000"]
        ri = (outdir / "ri_curves.csv").read_text().splitlines()
        assert ri == ["sigma_p,wf,ri", "1.500000,0.000000,0.000000"]
        surf = (outdir / "rmse_surface.csv").read_text().splitlines()
        assert surf == ["wf,ri,normalized_rmse", "0.000000,0.000000,1.000000"]

    def test_default_curve_set(self, tmp_path):
        outdir = tmp_path / "curves"
        assert main(["curves", "--out", str(outdir)]) == 0
        err = (outdir / "error_curves.csv").read_text().splitlines()
        assert len(err) == 1 + 4 * 121  # 4 prior widths x inclusive wf grid
        surf = (outdir / "rmse_surface.csv").read_text().splitlines()
        # undefined cells (wf = 0 with ri > 0) are left empty
        assert any(line.endswith(",") for line in surf[1:])


class TestConfigPrecedence:
    def test_flag_beats_env_beats_file(self, tmp_path, monkeypatch):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"reps": 2, "practice": 0, "seed": 1}))
        monkeypatch.setenv("LENREPRO_REPS", "3")

        out = tmp_path / "s.csv"
        main(["schedule", "--config", str(cfg), "--out", str(out)])
        assert len(out.read_text().splitlines()) == 1 + 11 * 3  # env wins file

        main(["schedule", "--config", str(cfg), "--reps", "4", "--out", str(out)])
        assert len(out.read_text().splitlines()) == 1 + 11 * 4  # flag wins env

        monkeypatch.delenv("LENREPRO_REPS")
        main(["schedule", "--config", str(cfg), "--out", str(out)])
        assert len(out.read_text().splitlines()) == 1 + 11 * 2  # file wins default

    def test_dump_config_round_trip(self, tmp_path):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        dump = tmp_path / "effective.json"
        main(["schedule", "--seed", "9", "--reps", "2", "--out", str(out1),
              "--dump-config", str(dump)])
        effective = json.loads(dump.read_text())
        assert effective["reps"] == 2 and effective["seed"] == 9
        # rerunning from the dumped config reproduces the output exactly
        dump2 = dict(effective)
        dump2.pop("out")
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps(dump2))
        main(["schedule", "--config", str(cfg), "--out", str(out2)])
        assert out1.read_bytes() == out2.read_bytes()

    def test_per_condition_config_keys(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({
            "seed": 4, "participants": 2, "conditions": "solo,social",
            "wf": 0.3, "social.wf": 0.1, "motor_sd": 0.0,
        }))
        trials = tmp_path / "t.csv"
        outdir = tmp_path / "an"
        main(["simulate", "--config", str(cfg), "--out", str(trials)])
        main(["analyze", "--in", str(trials), "--out", str(outdir), "--k", "inf"])
        rows = {}
        for line in (outdir / "conditions.csv").read_text().splitlines()[1:]:
            fields = line.split(",")
            rows[fields[0]] = float(fields[2])
        assert rows["social"] < rows["solo"]


class TestPipelineDeterminism:
    def test_full_pipeline_byte_identical(self, tmp_path):
        outputs = []
        for workers, tag in (("1", "w1"), ("4", "w4")):
            trials = tmp_path / f"trials_{tag}.csv"
            adir = tmp_path / f"analysis_{tag}"
            fdir = tmp_path / f"fit_{tag}"
            main(["simulate", "--seed", "11", "--participants", "6",
                  "--conditions", "individual,social", "--wf", "0.25",
                  "--workers", workers, "--out", str(trials)])
            main(["analyze", "--in", str(trials), "--out", str(adir)])
            main(["fit", "--in", str(adir / "conditions.csv"),
                  "--trials-per-stimulus", "6", "--out", str(fdir)])
            outputs.append((
                trials.read_bytes(),
                (adir / "report.txt").read_bytes(),
                (adir / "per_participant.csv").read_bytes(),
                (fdir / "fit_report.txt").read_bytes(),
            ))
        assert outputs[0] == outputs[1]


class TestExitCodes:
    def test_usage_error_is_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "lenrepro.cli", "frobnicate"],
            capture_output=True,
        )
        assert proc.returncode == 2

    def test_missing_subcommand_is_2(self):
        proc = subprocess.run(
            [sys.executable, "-m", "lenrepro.cli"], capture_output=True
        )
        assert proc.returncode == 2

    def test_runtime_error_is_1_with_single_line(self, capsys):
        rc = main(["analyze", "--in", "/nonexistent/trials.csv"])
        assert rc == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert err.strip().count("\n") == 0

    def test_entry_point_installed(self):
        proc = subprocess.run(["lenrepro", "--help"], capture_output=True)
        assert proc.returncode == 0
        assert b"schedule" in proc.stdout
