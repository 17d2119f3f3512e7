#!/usr/bin/env python3
"""Regenerate the published decay-parameter and stability-range tables.

Writes TSV/JSON files under out/tables/ and prints the stability tables to
stdout for a quick visual check.
"""

import sys
from pathlib import Path

from gradedproj.cli import main


def run(out_dir: str = "out/tables") -> int:
    code = main(["tables", "--out", out_dir])
    if code != 0:
        return code
    for name in ("table2_stability_2d.tsv", "table3_stability_3d.tsv"):
        print(f"\n== {name} ==")
        for line in Path(out_dir, name).read_text().splitlines():
            if not line.startswith("#"):
                print(line)
    return 0


if __name__ == "__main__":
    sys.exit(run(*sys.argv[1:]))
