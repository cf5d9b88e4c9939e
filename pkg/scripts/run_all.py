"""Run the shipped experiment configs through the ``levytrace`` CLI.

    python scripts/run_all.py                      # every config, results in ./results
    python scripts/run_all.py prop1 cone_lemmas    # a subset
    python scripts/run_all.py --workers 4 --out /tmp/lt

Each experiment gets its own output directory holding the CSV tables, the
``*.plot`` files and ``summary.txt``.  The script prints the exit status
and wall time per experiment and exits with the worst status seen.
"""
import argparse
import sys
import time
from pathlib import Path

from levytrace.cli import main as cli_main

CONFIGS = Path(__file__).resolve().parent / "configs"
# cheap deterministic runs first, the long Monte Carlo ladders last
ORDER = ["prop1", "cone_lemmas", "kernel_oracle", "cf_test", "scaling_certs", "halfspace", "c_H",
         "trace_ladder", "trace_ball"]
SEVERITY = {0: 0, 3: 1, 2: 2, 1: 3}


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("names", nargs="*", help=f"configs to run (default: {' '.join(ORDER)})")
    p.add_argument("--out", default="results")
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)
    names = args.names or ORDER
    worst = 0
    for name in names:
        cfg = CONFIGS / f"{name}.ini"
        if not cfg.exists():
            print(f"unknown config {name!r}", file=sys.stderr)
            return 1
        print(f"== {name}", flush=True)
        start = time.perf_counter()
        code = cli_main(["run", str(cfg), "--workers", str(args.workers),
                         "--out", str(Path(args.out) / name)])
        print(f"-- {name}: exit {code} in {time.perf_counter() - start:.0f}s", flush=True)
        if SEVERITY[code] > SEVERITY[worst]:
            worst = code
    return worst


if __name__ == "__main__":
    sys.exit(main())
