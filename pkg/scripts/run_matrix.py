"""Run the experiment matrix and print its summary table.

    python scripts/run_matrix.py scripts/configs/matrix.toml --out-dir results/matrix

Equivalent to ``granular-cooling report <config> --out-dir <dir>``.
"""

import sys

from granular_cooling.cli import main

if __name__ == "__main__":
    sys.exit(main(["report", *sys.argv[1:]]))
