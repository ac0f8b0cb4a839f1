#!/usr/bin/env python3
"""Place MovieLens-100K ratings at <data-dir>/ml-100k/u.data.

Uses the copy bundled in the recbole wheel when grouplens.org is unreachable.
The GroupLens license forbids redistribution, so the file is never committed.
"""
import argparse
import pathlib
import subprocess
import sys
import tempfile
import urllib.request
import zipfile

GROUPLENS = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
WHEEL_MEMBER = "recbole/dataset_example/ml-100k/ml-100k.inter"


def from_grouplens(dest: pathlib.Path) -> bool:
    try:
        with tempfile.TemporaryDirectory() as tmp:
            archive = pathlib.Path(tmp) / "ml-100k.zip"
            urllib.request.urlretrieve(GROUPLENS, archive)
            with zipfile.ZipFile(archive) as z:
                dest.write_bytes(z.read("ml-100k/u.data"))
        return True
    except Exception as exc:  # network failures fall through to the wheel
        print(f"grouplens download failed: {exc}", file=sys.stderr)
        return False


def from_wheel(dest: pathlib.Path) -> bool:
    with tempfile.TemporaryDirectory() as tmp:
        cmd = [sys.executable, "-m", "pip", "download", "--no-deps",
               "--only-binary=:all:", "-d", tmp, "recbole==1.2.1"]
        if subprocess.run(cmd, capture_output=True).returncode != 0:
            return False
        wheel = next(pathlib.Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as z:
            lines = z.read(WHEEL_MEMBER).decode().splitlines()
    # atomic-file header line, then the u.data rows verbatim
    dest.write_text("\n".join(lines[1:]) + "\n")
    return True


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--data-dir", default="data")
    args = parser.parse_args()
    dest = pathlib.Path(args.data_dir) / "ml-100k" / "u.data"
    if dest.exists():
        print(f"{dest} already present")
        return 0
    dest.parent.mkdir(parents=True, exist_ok=True)
    if from_grouplens(dest) or from_wheel(dest):
        n = sum(1 for _ in dest.open())
        print(f"wrote {dest} ({n} ratings)")
        return 0 if n == 100000 else 1
    print("could not obtain ml-100k", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
