"""Convergence of the discrete dissipation identity over the (n, dt) refinement ladder."""

import argparse
import json
from pathlib import Path

from thinfilm import runner
from thinfilm.config import S1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--rungs", type=int, default=3, help="ladder length (n doubles, dt halves)")
    ap.add_argument("--out", default="results/ladder.json")
    a = ap.parse_args()
    ladder = [(64 * 2 ** k, 4e-6 / 2 ** k) for k in range(a.rungs)]
    rep = runner.dissipation_ladder(S1, ladder, a.steps)
    print(f"{'n':>6} {'dt':>9} {'total':>10} {'time':>10} {'space':>10}")
    for r in rep["rows"]:
        print(f"{r['n']:>6} {r['dt']:>9.1e} {r['total']:>10.3e} {r['time']:>10.3e} "
              f"{r['space']:>10.3e}")
    for k, v in rep["orders"].items():
        print(f"order ({k}): " + ", ".join(f"{x:.4f}" for x in v))
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    Path(a.out).write_text(json.dumps(rep, indent=2) + "\n")


if __name__ == "__main__":
    main()
