#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package into IDX files.

Usage: mnist_from_npm.py <package-dir> <out-dir>

Writes `images-idx3-ubyte.gz` and `labels-idx1-ubyte.gz` (10,000 samples,
interleaved by digit in a fixed order) to <out-dir>.
"""
import gzip
import json
import struct
import sys
from pathlib import Path


def main() -> None:
    pkg, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    per_digit = []
    for d in range(10):
        data = json.loads((pkg / "src" / "digits" / f"{d}.json").read_text())["data"]
        n = len(data) // 784
        per_digit.append([bytes(round(v * 255) for v in data[i * 784:(i + 1) * 784]) for i in range(n)])
    images, labels = [], []
    cursor = [0] * 10
    while any(cursor[d] < len(per_digit[d]) for d in range(10)):
        for d in range(10):
            if cursor[d] < len(per_digit[d]):
                images.append(per_digit[d][cursor[d]])
                labels.append(d)
                cursor[d] += 1
    with gzip.open(out / "images-idx3-ubyte.gz", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(images), 28, 28))
        f.write(b"".join(images))
    with gzip.open(out / "labels-idx1-ubyte.gz", "wb") as f:
        f.write(struct.pack(">II", 0x801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} samples to {out}")


if __name__ == "__main__":
    main()
