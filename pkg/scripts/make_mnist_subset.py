"""Rebuild data/mnist-5k from the MNIST sample bundled in the mlxtend wheel.

mlxtend ships 5000 MNIST digits (500 per class, BSD-3-Clause) as a CSV.
This script splits them 400/100 per class into train/test and writes
standard gzipped IDX files, so the inference harness reads real MNIST
through the same loader it would use for the full t10k files.

    pip download --no-deps mlxtend -d /tmp/wheels
    python scripts/make_mnist_subset.py /tmp/wheels/mlxtend-*.whl
"""
import argparse
import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
from lmul_lab.nn.idx import write_idx  # noqa: E402

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("wheel")
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "data" / "mnist-5k"))
    ap.add_argument("--test-per-class", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    raw = gzip.decompress(zipfile.ZipFile(args.wheel).read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",")
    pixels = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = [], []
    for digit in range(10):
        rows = np.flatnonzero(labels == digit)
        test_idx.extend(rows[-args.test_per_class:])
        train_idx.extend(rows[:-args.test_per_class])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for split, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx(out / f"{split}-images-idx3-ubyte.gz", pixels[idx])
        write_idx(out / f"{split}-labels-idx1-ubyte.gz", labels[idx])
        print(f"{split}: {len(idx)} samples")


if __name__ == "__main__":
    main()
