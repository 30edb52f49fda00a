import socket

import pytest

from otterlink.cli import (EXIT_CONFIG, EXIT_CONNECT, EXIT_OK, main)
from otterlink.logbag import read_records

FAST_BENCH = """
[bench]
duration = 15
target_laps = 0.05
"""


def write_config(tmp_path, text=FAST_BENCH):
    path = tmp_path / "run.ini"
    path.write_text(text, encoding="utf-8")
    return str(path)


class TestExitCodes:
    def test_bad_config_file(self, tmp_path, capsys):
        assert main(["--config", "/does/not/exist.ini", "run",
                     "--embedded"]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "[bench]\nlaps = 2\n")
        assert main(["--config", cfg, "run", "--embedded"]) == EXIT_CONFIG

    def test_sim_rejects_out_of_band_rate(self, tmp_path, capsys):
        assert main(["sim", "--rate", "50", "--duration", "0.1"]) \
            == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_replay_missing_file(self, capsys):
        assert main(["replay", "/no/such/file.olog"]) == EXIT_CONFIG

    def test_run_socket_mode_unreachable_bind(self, tmp_path, capsys):
        # occupy the telemetry port so the client cannot bind
        blocker = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        blocker.bind(("127.0.0.1", 0))
        port = blocker.getsockname()[1]
        cfg = write_config(
            tmp_path, f"[transport]\ntelem_port = {port}\n[bench]\n"
                      "duration = 1\n")
        try:
            assert main(["--config", cfg, "run"]) == EXIT_CONNECT
        finally:
            blocker.close()


class TestEmbeddedRun:
    def test_baseline_run_writes_log_and_csv(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        log = tmp_path / "mission.olog"
        csv_out = tmp_path / "metrics.csv"
        code = main(["--config", cfg, "run", "--embedded",
                     "--controller", "baseline", "--log", str(log),
                     "--metrics-csv", str(csv_out)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "rms_cross_track_m" in out
        records, corrupt = read_records(log)
        assert corrupt == 0 and records
        text = csv_out.read_text(encoding="utf-8")
        assert text.startswith("metric,value\n")
        assert "solve_time" not in text

    def test_waypoint_file_path(self, tmp_path, capsys):
        waypoints = tmp_path / "line.txt"
        waypoints.write_text("# simple line\n0,0\n0,30\n", encoding="utf-8")
        cfg = write_config(tmp_path, "[bench]\nduration = 10\n"
                                     "target_laps = 0\n")
        code = main(["--config", cfg, "run", "--embedded",
                     "--controller", "baseline", "--path", str(waypoints)])
        assert code == EXIT_OK

    def test_malformed_waypoint_file(self, tmp_path, capsys):
        waypoints = tmp_path / "bad.txt"
        waypoints.write_text("0,0\nnot-a-number\n", encoding="utf-8")
        assert main(["run", "--embedded", "--path", str(waypoints)]) \
            == EXIT_CONFIG


class TestReplayCommand:
    @pytest.fixture()
    def logfile(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        log = tmp_path / "mission.olog"
        assert main(["--config", cfg, "run", "--embedded",
                     "--controller", "baseline", "--log", str(log)]) \
            == EXIT_OK
        capsys.readouterr()
        return log

    def test_fast_replay(self, logfile, capsys):
        assert main(["replay", str(logfile), "--speed", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "replayed" in out
        assert "otter_gps" in out

    def test_csv_export(self, logfile, tmp_path, capsys):
        out_csv = tmp_path / "gps.csv"
        assert main(["replay", str(logfile), "--csv-topic", "otter_gps",
                     "--out", str(out_csv)]) == EXIT_OK
        header = out_csv.read_text(encoding="utf-8").splitlines()[0]
        assert header == "t,utc,lat,lon,alt"

    def test_csv_export_unknown_topic(self, logfile, capsys):
        assert main(["replay", str(logfile), "--csv-topic", "sonar"]) \
            == EXIT_CONFIG
