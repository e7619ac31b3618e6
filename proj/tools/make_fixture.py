#!/usr/bin/env python3
"""Writes data/digits_1000.idx: the first 1000 scikit-learn 8x8 digit images as
an unsigned-byte IDX file (1000 x 8 x 8)."""

import argparse
import pathlib
import struct

import numpy as np
from sklearn.datasets import load_digits


def write_idx_u8(path: pathlib.Path, array: np.ndarray) -> None:
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">BBBB", 0, 0, 0x08, array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    path.write_bytes(header + array.tobytes())


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=1000)
    parser.add_argument(
        "--output",
        type=pathlib.Path,
        default=pathlib.Path(__file__).resolve().parent.parent / "data" / "digits_1000.idx",
    )
    args = parser.parse_args()

    images = load_digits().images[: args.count]
    # Pixel intensities are 0..16; stretch them to the byte range.
    scaled = np.rint(images * (255.0 / 16.0)).astype(np.uint8)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    write_idx_u8(args.output, scaled)
    print(f"wrote {args.output} with shape {scaled.shape}")


if __name__ == "__main__":
    main()
