"""Run S1 and S1-small and compare the fitted decay rate with the linear prediction."""

import argparse
import json
from pathlib import Path

from thinfilm import runner
from thinfilm.config import PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results/s1")
    a = ap.parse_args()
    table = {}
    for name in ("S1", "S1-small"):
        cfg = PRESETS[name].with_values({"output.name": name.lower(), "stability.n_max": 256})
        res = runner.run(cfg, Path(a.out))
        s = res.summary
        table[name] = {
            "exit_code": res.exit_code, "steps": s["accepted_steps"],
            "mass_drift": s["conservation_drift"], "energy": s["energy"],
            "max_dissipation_term": s["max_dissipation_term"],
            "omega_fit": s["decay"]["omega_fit"], "r2": s["decay"]["r2"],
            "omega_pred": s["stability"]["omega_pred"],
            "ratio": s["decay"]["omega_pred_ratio"],
        }
    print(json.dumps(table, indent=2))
    (Path(a.out) / "comparison.json").write_text(json.dumps(table, indent=2) + "\n")


if __name__ == "__main__":
    main()
