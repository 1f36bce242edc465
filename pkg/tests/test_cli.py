import json

import pytest

from conftest import needs_raw, needs_root
from rtflood.cli import EXIT_CONFIG, EXIT_PRIVILEGE, EXIT_RUNTIME, main

CONFIG = """\
experiments:
  - id: quick-sf
    architecture: single_core
    scheduler: {policy: fifo, priority: 99}
    attack: {kind: syn_flood, rate_pps: 100000}
    phase_duration_s: 60
    gap_s: 5
  - id: quick-c
    architecture: co_processor
    attack: {kind: arp_flood}
    phase_duration_s: 60
"""


def test_matrix_then_analyze(tmp_path, capsys):
    out = tmp_path / "m"
    assert main(["matrix", "--attacks", "syn_flood", "--stress", "off", "--scale", "1/300", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "SYN flooding" in text and "Idle" in text
    for code in ("SD", "SF", "SR", "DD", "DF", "DR", "C"):
        assert f"\n{code} " in text or text.startswith(code)
    assert (out / "matrix_idle_load.csv").exists() and not (out / "matrix_stress.csv").exists()
    assert main(["analyze", str(out)]) == 0
    assert "stored tables reproduced: yes" in capsys.readouterr().out


def test_analyze_detects_tampering(tmp_path, capsys):
    out = tmp_path / "m"
    main(["matrix", "--attacks", "arp_flood", "--stress", "on", "--scale", "1/600", "--out", str(out)])
    csv_path = out / "matrix_stress.csv"
    csv_path.write_text(csv_path.read_text().replace("1000000", "1000001", 1))
    capsys.readouterr()
    assert main(["analyze", str(out)]) == EXIT_RUNTIME
    assert "reproduced: NO" in capsys.readouterr().out


def test_run_config_file(tmp_path, capsys):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(CONFIG)
    assert main(["run", "--config", str(cfg), "--scale", "1/60", "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "quick-sf" / "attack.jsonl").exists()
    assert "ARP flooding" in capsys.readouterr().out


def test_run_with_params_override(tmp_path, capsys):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(CONFIG)
    params = tmp_path / "p.yaml"
    params.write_text("sim_params:\n  rng_seed: 7\n")
    assert main(["run", "--config", str(cfg), "--scale", "1/300", "--out", str(tmp_path / "r"),
                 "--params", str(params)]) == 0
    meta = json.loads((tmp_path / "r" / "quick-sf" / "run.json").read_text())
    assert meta["sim_params"]["rng_seed"] == 7


@pytest.mark.parametrize("text", ["id: [unclosed\n", "id: a\narchitecture: quad\n", "experiments: []\n"])
def test_bad_config_exit_code(tmp_path, capsys, text):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text)
    assert main(["run", "--config", str(cfg)]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


@pytest.mark.parametrize("scale", ["0", "abc", "1/0", "-2"])
def test_bad_scale(scale, capsys):
    assert main(["matrix", "--scale", scale]) == EXIT_CONFIG


def test_unknown_attack(capsys):
    assert main(["matrix", "--attacks", "smurf"]) == EXIT_CONFIG


def test_bad_params_file(tmp_path, capsys):
    p = tmp_path / "p.yaml"
    p.write_text("- 1\n")
    assert main(["calibrate", "--code", "C", "--params", str(p)]) == EXIT_CONFIG


def test_calibrate(capsys):
    assert main(["calibrate", "--code", "C", "--phase-s", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "1.000 /   1.000" in out and "C+stress" in out


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    caps = json.loads(capsys.readouterr().out)
    assert caps["sim_kernel"] in ("c", "py") and "policies" in caps


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "matrix" in capsys.readouterr().out


def test_stress_noop(capsys):
    assert main(["stress", "--workers", "0", "--duration", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["workers"] == 0


def test_stress_absent_core(capsys):
    assert main(["stress", "--pin", "4096", "--duration", "0.1"]) == EXIT_CONFIG


def test_scan_empty_range(capsys):
    assert main(["scan", "--target", "127.0.0.1", "--ports", "5-4"]) == EXIT_CONFIG


def test_flood_missing_interface(capsys):
    assert main(["flood", "arp", "--iface", "nonexistent0", "--target", "10.0.0.1", "--duration", "0.1"]) == EXIT_CONFIG


@needs_raw
def test_flood_syn_telemetry(tmp_path, capsys):
    out = tmp_path / "t.jsonl"
    assert main(["flood", "syn", "--target", "127.0.0.1", "--rate", "500", "--duration", "1", "--port", "9",
                 "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["sent_total"] > 0
    assert json.loads(out.read_text().splitlines()[-1])["summary"]["sent_total"] == summary["sent_total"]


@needs_root
def test_privilege_exit_code():
    from test_rtagent import in_child

    code = in_child(main, ["flood", "syn", "--target", "127.0.0.1", "--rate", "10", "--duration", "0.1"], drop=True)
    assert code == EXIT_PRIVILEGE


@needs_root
def test_real_run_unprivileged_is_runtime_failure(tmp_path):
    import os
    import tempfile

    from test_rtagent import in_child

    out = tempfile.mkdtemp()
    os.chmod(out, 0o777)
    cfg = os.path.join(out, "exp.yaml")
    with open(cfg, "w") as fh:
        fh.write("id: r\narchitecture: single_core\nbackend: real\nphase_duration_s: 1\n")
    # the failed run is recorded in the matrix and the command reports it
    assert in_child(main, ["run", "--config", cfg, "--out", os.path.join(out, "a")], drop=True) == EXIT_RUNTIME
