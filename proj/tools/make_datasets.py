#!/usr/bin/env python3
"""Build the 10k-image MNIST and Fashion-MNIST subsets used by the experiment suite.

Sources are the `mnist` and `fashion-mnist` npm packages, which ship the
images as per-class JSON arrays. Output is gzip-compressed IDX, shuffled with
a fixed seed so batches are not class-sorted.

    npm pack mnist fashion-mnist && tar xzf ...
    python3 tools/make_datasets.py --mnist-pkg mnist/package \
        --fashion-pkg fashion/package --out data
"""

import argparse
import gzip
import json
import os
import struct

import numpy as np


def write_idx(path, images, labels_path, labels):
    n, rows, cols = images.shape
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())
    with gzip.GzipFile(labels_path, "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.astype(np.uint8).tobytes())


def load_mnist(pkg):
    images, labels = [], []
    for digit in range(10):
        with open(os.path.join(pkg, "src", "digits", f"{digit}.json")) as f:
            flat = np.asarray(json.load(f)["data"], dtype=np.float64)
        # Stored as pixel/255 rounded to three decimals.
        imgs = np.rint(flat.reshape(-1, 784) * 255.0).clip(0, 255)
        images.append(imgs)
        labels.append(np.full(len(imgs), digit))
    return np.concatenate(images), np.concatenate(labels)


def load_fashion(pkg, per_class, rng):
    images, labels = [], []
    for cls in range(10):
        with open(os.path.join(pkg, "src", "clothes", f"{cls}.json")) as f:
            rows = [r for r in json.load(f)["data"] if len(r) == 784]
        rows = np.asarray(rows, dtype=np.uint8)
        pick = rng.choice(len(rows), size=per_class, replace=False)
        images.append(rows[np.sort(pick)])
        labels.append(np.full(per_class, cls))
    return np.concatenate(images), np.concatenate(labels)


def emit(out_dir, images, labels, rng):
    order = rng.permutation(len(labels))
    os.makedirs(out_dir, exist_ok=True)
    write_idx(os.path.join(out_dir, "images-idx3-ubyte.gz"),
              images[order].reshape(-1, 28, 28),
              os.path.join(out_dir, "labels-idx1-ubyte.gz"),
              labels[order])
    print(out_dir, len(labels), np.bincount(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--mnist-pkg")
    ap.add_argument("--fashion-pkg")
    ap.add_argument("--out", default="data")
    ap.add_argument("--fashion-per-class", type=int, default=1000)
    args = ap.parse_args()
    rng = np.random.RandomState(20190611)
    if args.mnist_pkg:
        x, y = load_mnist(args.mnist_pkg)
        emit(os.path.join(args.out, "mnist10k"), x, y, rng)
    if args.fashion_pkg:
        x, y = load_fashion(args.fashion_pkg, args.fashion_per_class, rng)
        emit(os.path.join(args.out, "fashion10k"), x, y, rng)


if __name__ == "__main__":
    main()
