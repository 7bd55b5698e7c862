"""Run the bundled presets through the CLI and collect CSVs under results/.

    python3 scripts/run_presets.py                    # every preset, preset frame counts
    python3 scripts/run_presets.py tep-vs-load --frames 2000 --workers 4
"""

import argparse
import sys
import time
from pathlib import Path

from otfsra.cli import main as cli_main
from otfsra.cli import preset_names

COMMAND = {
    "grid": "design",
    "collision-bounds": "bound",
    "bound-vs-radius": "bound",
    "tep-vs-load": "simulate",
    "tep-vs-doppler": "simulate",
    "tep-vs-n1": "simulate",
}


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("presets", nargs="*", default=sorted(COMMAND))
    p.add_argument("--out-dir", default="results")
    p.add_argument("--frames", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int)
    args = p.parse_args(argv)

    unknown = set(args.presets) - set(preset_names())
    if unknown:
        p.error(f"unknown presets {sorted(unknown)}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in args.presets:
        cmd = COMMAND.get(name, "simulate")
        ext = "txt" if cmd == "design" else "csv"
        argv_cli = [cmd, "--config", name, "--out", str(out_dir / f"{name}.{ext}"), "--seed", str(args.seed)]
        if args.frames is not None:
            argv_cli += ["--frames", str(args.frames)]
        if args.workers is not None:
            argv_cli += ["--workers", str(args.workers)]
        t0 = time.perf_counter()
        code = cli_main(argv_cli)
        print(f"{name:18s} {cmd:9s} exit={code} {time.perf_counter() - t0:7.1f}s", file=sys.stderr)
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(main())
