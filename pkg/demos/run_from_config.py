"""
Driving a full experiment from a config file
============================================

The CLI and the library share one entry point: a JSON config names the
problem, the method, and an output directory, and the run leaves behind
metrics.csv / summary.json / theta_trace.csv / xhat.bin.  This script
writes such a config, runs it through the command-line interface, and
inspects the artifacts.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from hypermarg.metrics import read_csv, read_xhat

outdir = Path(tempfile.mkdtemp(prefix="hypermarg-demo-"))
cfg = {
    "problem": {"kind": "tomo", "s": 6, "n_src": 5, "n_rec": 6, "seed": 1},
    "method": {
        "name": "m3c",
        "theta0": "center",
        "outer_iters": 15,
        "inner_iters": 2,
        "n_probes": 16,
        "seed": 0,
        "tol": 1e-4,
    },
    "output": {"directory": str(outdir)},
}
cfg_path = outdir / "config.json"
cfg_path.write_text(json.dumps(cfg, indent=2))

# Equivalent to `hypermarg run config.json` on an installed package.
proc = subprocess.run(
    [sys.executable, "-m", "hypermarg.cli", "run", str(cfg_path)],
    capture_output=True, text=True)
print(f"exit status: {proc.returncode}")
print(f"stdout:      {proc.stdout.strip()}")
print()

summary = json.loads((outdir / "summary.json").read_text())
print("summary.json:")
for key in ("problem", "method", "converged", "total_iter", "total_matvecs_A",
            "total_matvecs_Q", "rel_error"):
    print(f"  {key:>16} = {summary[key]}")
print()

fields, rows = read_csv(outdir / "metrics.csv")
print(f"metrics.csv: {len(rows)} rows, columns = {fields}")
print("per-iteration forward-map cost:",
      [int(r["matvecs_A"]) for r in rows])
print()

xhat = read_xhat(outdir / "xhat.bin")
print(f"xhat.bin: {xhat.size} float64 values, "
      f"|xhat| = {np.linalg.norm(xhat):.4f}")
print()
print(f"artifacts left in {outdir}")
