#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into the
ADVDATA1 container used by advflow.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/convert_npm_mnist.py package/src/digits data/

Writes digits_train.advd and digits_test.advd (8004 and 1996 images for the
10k-digit package). Every fifth sample of each class goes to the test
split; both splits are then shuffled with a fixed seed so the files are
reproducible.
"""
import json
import random
import struct
import sys
from pathlib import Path

SIZE = 28
CLASSES = 10


def write_container(path, samples):
    with open(path, "wb") as f:
        f.write(b"ADVDATA1")
        f.write(struct.pack("<5I", len(samples), SIZE, SIZE, 1, CLASSES))
        for pixels, _ in samples:
            f.write(pixels)
        f.write(bytes(label for _, label in samples))


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    src, dst = Path(sys.argv[1]), Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for label in range(CLASSES):
        values = json.loads((src / f"{label}.json").read_text())["data"]
        count = len(values) // (SIZE * SIZE)
        for i in range(count):
            chunk = values[i * SIZE * SIZE:(i + 1) * SIZE * SIZE]
            pixels = bytes(min(255, max(0, round(v * 255))) for v in chunk)
            (test if i % 5 == 4 else train).append((pixels, label))
    rng = random.Random(20190601)
    rng.shuffle(train)
    rng.shuffle(test)
    write_container(dst / "digits_train.advd", train)
    write_container(dst / "digits_test.advd", test)
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()
