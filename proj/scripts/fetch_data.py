#!/usr/bin/env python3
"""Downloads the benchmark datasets into data/ (see data/README.md).

Usage: fetch_data.py [rice|ionosphere|mnist|all]

Everything uses the Python standard library only. If a download fails
(offline machine, moved URL), data/README.md describes the layout to
assemble by hand from any mirror.
"""

import gzip
import io
import sys
import urllib.request
import zipfile
from pathlib import Path

DATA_DIR = Path(__file__).resolve().parent.parent / "data"

RICE_URL = "https://archive.ics.uci.edu/static/public/545/rice+cammeo+and+osmancik.zip"
IONOSPHERE_URL = "https://archive.ics.uci.edu/static/public/52/ionosphere.zip"
MNIST_BASE = "https://ossci-datasets.s3.amazonaws.com/mnist/"
MNIST_FILES = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
]


def download(url):
    print(f"  downloading {url}")
    with urllib.request.urlopen(url, timeout=120) as response:
        return response.read()


def arff_to_csv(text):
    """Strips the ARFF header; the @data section is already comma-separated."""
    rows = []
    in_data = False
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("%"):
            continue
        if line.lower().startswith("@data"):
            in_data = True
            continue
        if in_data:
            rows.append(line)
    return rows


def fetch_rice():
    target = DATA_DIR / "rice.csv"
    if target.exists():
        print(f"  {target} already present")
        return
    archive = zipfile.ZipFile(io.BytesIO(download(RICE_URL)))
    name = next(n for n in archive.namelist() if n.lower().endswith(".arff"))
    rows = arff_to_csv(archive.read(name).decode("utf-8"))
    widths = {len(r.split(",")) for r in rows}
    if len(rows) != 3810 or widths != {8}:
        raise RuntimeError(f"unexpected rice shape: {len(rows)} rows, widths {widths}")
    target.write_text("\n".join(rows) + "\n")
    print(f"  wrote {target} ({len(rows)} rows)")


def fetch_ionosphere():
    target = DATA_DIR / "ionosphere.csv"
    if target.exists():
        print(f"  {target} already present")
        return
    archive = zipfile.ZipFile(io.BytesIO(download(IONOSPHERE_URL)))
    rows = [
        line.strip()
        for line in archive.read("ionosphere.data").decode("utf-8").splitlines()
        if line.strip()
    ]
    widths = {len(r.split(",")) for r in rows}
    if len(rows) != 351 or widths != {35}:
        raise RuntimeError(
            f"unexpected ionosphere shape: {len(rows)} rows, widths {widths}")
    target.write_text("\n".join(rows) + "\n")
    print(f"  wrote {target} ({len(rows)} rows)")


def fetch_mnist():
    mnist_dir = DATA_DIR / "mnist"
    mnist_dir.mkdir(parents=True, exist_ok=True)
    for name in MNIST_FILES:
        target = mnist_dir / name
        if target.exists():
            print(f"  {target} already present")
            continue
        raw = gzip.decompress(download(MNIST_BASE + name + ".gz"))
        magic = int.from_bytes(raw[:4], "big")
        if magic not in (0x803, 0x801):
            raise RuntimeError(f"{name}: bad IDX magic {magic:#x}")
        target.write_bytes(raw)
        print(f"  wrote {target} ({len(raw)} bytes)")


def main():
    which = sys.argv[1] if len(sys.argv) > 1 else "all"
    steps = {
        "rice": [fetch_rice],
        "ionosphere": [fetch_ionosphere],
        "mnist": [fetch_mnist],
        "all": [fetch_rice, fetch_ionosphere, fetch_mnist],
    }
    if which not in steps:
        print(__doc__)
        return 2
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    failed = False
    for step in steps[which]:
        print(step.__name__.replace("fetch_", "") + ":")
        try:
            step()
        except Exception as e:  # keep going; report what's missing at the end
            failed = True
            print(f"  FAILED: {e}")
    if failed:
        print("\nsome downloads failed; see data/README.md for the expected "
              "layout and alternative mirrors")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
