#!/usr/bin/env python3
"""Convert the digit JSON files shipped with the `mnist` npm package into IDX
image/label files.

Each input file <digit>.json holds {"data": [...]} with 784 floats per image
(pixel / 255, rounded to three decimals). Images are interleaved by digit
(0, 1, ..., 9, 0, 1, ...) so any prefix of the output is class balanced.

usage: mnist_json_to_idx.py DIGITS_DIR OUT_PREFIX [--per-digit N]
"""

import argparse
import json
import struct
from pathlib import Path

PIXELS = 28 * 28


def load_digit(path):
    values = json.loads(path.read_text())["data"]
    if len(values) % PIXELS:
        raise SystemExit(f"{path}: {len(values)} values is not a multiple of {PIXELS}")
    return [values[i:i + PIXELS] for i in range(0, len(values), PIXELS)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("digits_dir", type=Path)
    ap.add_argument("out_prefix")
    ap.add_argument("--per-digit", type=int, default=500)
    args = ap.parse_args()

    per_digit = [load_digit(args.digits_dir / f"{d}.json")[: args.per_digit] for d in range(10)]
    count = min(len(images) for images in per_digit)

    pixels = bytearray()
    labels = bytearray()
    for i in range(count):
        for digit, images in enumerate(per_digit):
            pixels.extend(max(0, min(255, round(v * 255))) for v in images[i])
            labels.append(digit)

    n = len(labels)
    Path(f"{args.out_prefix}-images.idx3-ubyte").write_bytes(struct.pack(">IIII", 0x803, n, 28, 28) + pixels)
    Path(f"{args.out_prefix}-labels.idx1-ubyte").write_bytes(struct.pack(">II", 0x801, n) + labels)
    print(f"wrote {n} images")


if __name__ == "__main__":
    main()
