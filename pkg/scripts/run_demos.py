"""Regenerate all demonstration CSV bundles under one directory.

    python3 scripts/run_demos.py results/demos
"""
import sys
from pathlib import Path

from restartdfo.cli import DEMOS, main

if __name__ == "__main__":
    out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/demos")
    for name in DEMOS:
        print("==", name)
        code = main(["demo", name, "--output-dir", str(out / name)])
        if code:
            sys.exit(code)
