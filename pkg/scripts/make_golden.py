"""Regenerate the CLI golden files under tests/golden.

Run after an intentional change to report formats or sampling streams; the
CLI tests compare against these files byte for byte.
"""

import json
from pathlib import Path

from gwsubtree.cli import parse_config, run

GOLDEN = Path(__file__).resolve().parent.parent / "tests" / "golden"


def cases():
    trees = str(GOLDEN / "trees.txt")
    for name, argv in json.loads((GOLDEN / "cases.json").read_text()):
        yield name, [a.replace("{trees}", trees) for a in argv]


def main():
    for name, argv in cases():
        status, text = run(parse_config(argv))
        if status:
            raise SystemExit(f"{name}: exit {status}: {text}")
        (GOLDEN / f"{name}.out").write_text(text)
        print(f"wrote {name}.out")


if __name__ == "__main__":
    main()
