"""Drop spreading onto a thin precursor: the run stops with the degeneracy exit code."""

import argparse
import json
from pathlib import Path

from thinfilm import runner
from thinfilm.checkpoint import read_checkpoint
from thinfilm.config import PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--precursor", type=float, default=1e-6, help="scenario.h_mean")
    ap.add_argument("--out", default="results/degenerate")
    a = ap.parse_args()
    cfg = PRESETS["degenerate"].with_values({"scenario.h_mean": a.precursor})
    res = runner.run(cfg, Path(a.out))
    ck = read_checkpoint(res.files["last"])
    print(json.dumps({"exit_code": res.exit_code, "status": res.summary["status"],
                      "t_stop": ck.t, "steps": ck.step, "min_h_last": float(ck.h.min()),
                      "message": res.summary.get("error", {}).get("message")}, indent=2))


if __name__ == "__main__":
    main()
