#!/usr/bin/env python3
"""Run the four figure-style experiments at desk scale.

Writes CSV/JSON artifacts under out/fig1 .. out/fig4 (about 10-20 minutes on
two cores with the defaults; pass --fine for publication-density maps). If
the plotting companion package is installed, every metadata file is rendered
to a PNG alongside its data.
"""

import argparse
import shutil
import subprocess
import sys
from pathlib import Path

from dynelim.cli import main as dynelim_main


def run(argv):
    print(f"$ dynelim {' '.join(argv)}", flush=True)
    rc = dynelim_main(argv)
    if rc != 0:
        sys.exit(rc)


def render_all(out_dir: Path):
    render = shutil.which("render")
    if render is None:
        print("render command not found; skipping images (pip install ./plots)")
        return
    for meta in sorted(out_dir.glob("**/*_meta.json")):
        cmd = [render, str(meta)]
        if meta.name == "fringes_meta.json":
            cmd.append("--normalize")
        print(f"$ {' '.join(cmd)}", flush=True)
        subprocess.run(cmd, check=True)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--jobs", default="2")
    parser.add_argument("--fine", action="store_true",
                        help="publication-density maps (hours, not minutes)")
    args = parser.parse_args()
    out = Path(args.out_dir)
    fine = ["--fine"] if args.fine else []

    run(["--out-dir", str(out / "fig1"), "dynamics"])
    run(["--out-dir", str(out / "fig2"), "--jobs", args.jobs,
         "infidelity-map", "--scheme", "de", "--populations", *fine])
    run(["--out-dir", str(out / "fig2_ae"), "--jobs", args.jobs,
         "infidelity-map", "--scheme", "ae", "--populations", *fine])
    run(["--out-dir", str(out / "fig3"), "--jobs", args.jobs, "robustness"])
    run(["--out-dir", str(out / "fig4"), "--jobs", args.jobs, "ramsey", *fine])
    render_all(out)


if __name__ == "__main__":
    main()
