#!/usr/bin/env python3
"""Prepend cmake/license_header.txt to C++ sources that lack a copyright line."""

import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
DIRS = ("core", "tools", "tests", "benchmarks")
SUFFIXES = {".hpp", ".cpp"}


def main() -> int:
    header = (ROOT / "cmake" / "license_header.txt").read_text().rstrip() + "\n\n"
    changed = 0
    for d in DIRS:
        for path in sorted((ROOT / d).rglob("*")):
            if path.suffix not in SUFFIXES or not path.is_file():
                continue
            text = path.read_text()
            if "// Copyright" in text:
                continue
            path.write_text(header + text)
            changed += 1
            print(path.relative_to(ROOT))
    print(f"{changed} file(s) updated", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
