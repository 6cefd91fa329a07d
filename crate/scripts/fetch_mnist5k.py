#!/usr/bin/env python3
"""Write the 5,000-image MNIST subset (500 images per digit) as IDX files.

The subset ships inside the `mlxtend` wheel as a gzipped CSV; this script
downloads the wheel with pip, extracts the CSV and re-encodes it in the
standard big-endian IDX container.

    python3 scripts/fetch_mnist5k.py data/mnist5k
"""
import glob
import gzip
import io
import os
import struct
import subprocess
import sys
import tempfile
import zipfile


def main(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q", "-d", tmp, "mlxtend"]
        )
        wheel = zipfile.ZipFile(glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0])
        raw = gzip.decompress(wheel.read("mlxtend/data/data/mnist_5k.csv.gz"))
    rows = [line.split(",") for line in io.StringIO(raw.decode()).read().splitlines() if line]
    pixels = bytearray()
    labels = bytearray()
    for row in rows:
        values = [int(float(v)) for v in row]
        assert len(values) == 785
        pixels.extend(values[:784])
        labels.append(values[784])
    n = len(rows)
    with open(os.path.join(out_dir, "images-idx3-ubyte"), "wb") as f:
        f.write(struct.pack(">IIII", 2051, n, 28, 28))
        f.write(pixels)
    with open(os.path.join(out_dir, "labels-idx1-ubyte"), "wb") as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(labels)
    print(f"wrote {n} images to {out_dir}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/mnist5k")
