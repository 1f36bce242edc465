import os
import socket

import pytest


def _raw_ok() -> bool:
    try:
        socket.socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_RAW).close()
        return True
    except OSError:
        return False


def _fifo_ok() -> bool:
    pid = os.fork()
    if pid == 0:
        try:
            os.sched_setscheduler(0, os.SCHED_FIFO, os.sched_param(1))
            os._exit(0)
        except OSError:
            os._exit(1)
    _, status = os.waitpid(pid, 0)
    return os.waitstatus_to_exitcode(status) == 0


RAW_SOCKETS = _raw_ok()
RT_POLICIES = _fifo_ok()
CI = bool(os.environ.get("CI"))

needs_raw = pytest.mark.skipif(not RAW_SOCKETS or CI, reason="raw sockets unavailable (or CI)")
needs_rt = pytest.mark.skipif(not RT_POLICIES, reason="real-time scheduling not permitted")
needs_root = pytest.mark.skipif(os.geteuid() != 0, reason="needs root to drop privileges")


@pytest.fixture
def artifacts(tmp_path, monkeypatch):
    monkeypatch.setenv("RTFLOOD_ARTIFACTS", str(tmp_path / "artifacts"))
    return tmp_path / "artifacts"


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    skipped = [r.nodeid.split("::")[-1] for r in terminalreporter.stats.get("skipped", [])
               if "test_acceptance" in r.nodeid]
    if mod is None or not (mod.RESULTS or skipped):
        return
    terminalreporter.section("acceptance")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
    for name in skipped:
        terminalreporter.write_line(f"SKIP  {name} (privilege-gated)")
