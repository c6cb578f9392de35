"""Regenerate tests/golden/help_*.txt after an intentional CLI change."""
import contextlib
import io
from pathlib import Path

from restartdfo.cli import main

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"
COMMANDS = ["", "solve", "run", "profile", "demo", "list-problems", "validate-trace"]


def help_text(command: str) -> str:
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.suppress(SystemExit):
        main(([command] if command else []) + ["--help"])
    return buf.getvalue()


if __name__ == "__main__":
    GOLDEN.mkdir(exist_ok=True)
    for cmd in COMMANDS:
        path = GOLDEN / ("help_%s.txt" % (cmd or "main"))
        path.write_text(help_text(cmd))
        print("wrote", path)
