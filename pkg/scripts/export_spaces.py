"""Write every built-in space (plus a few variants) as JSON space files.

    python3 scripts/export_spaces.py spaces/
"""

import argparse
from pathlib import Path

from sigmaspace.catalog import BUILTIN_NAMES, builtin_space
from sigmaspace.cli import dumps

VARIANTS = {
    "esp_m3_alpha2": ("esp", {"m": 3, "alpha": 2.0}),
    "normal_form_alpha0.5": ("normal_form", {"alpha": 0.5}),
    "distorted_normal_seed7": ("distorted_normal", {"alpha": 2.0, "seed": 7}),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir", type=Path)
    args = ap.parse_args(argv)
    args.outdir.mkdir(parents=True, exist_ok=True)
    jobs = {name: (name, {}) for name in BUILTIN_NAMES} | VARIANTS
    for stem, (name, params) in jobs.items():
        path = args.outdir / f"{stem}.json"
        path.write_text(dumps(builtin_space(name, params).to_json()) + "\n")
        print(path)


if __name__ == "__main__":
    main()
