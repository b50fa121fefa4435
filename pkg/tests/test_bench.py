import subprocess
import sys
from pathlib import Path

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_flow.py"


def test_flow_benchmark_runs():
    out = subprocess.run([sys.executable, str(BENCH), "--repeat", "1", "--size", "48"],
                         capture_output=True, text=True, timeout=300)
    assert out.returncode == 0, out.stderr
    assert "python" in out.stdout and "full flow" in out.stdout
