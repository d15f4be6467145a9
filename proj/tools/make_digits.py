#!/usr/bin/env python3
"""Build a 28x28 handwritten-digit dataset in (gzipped) IDX format.

Source images are scikit-learn's bundled 8x8 digits (a real handwritten
digit corpus that ships offline). Each 28x28 sample is an upscaled source
image with a small random rotation, shift and intensity jitter. Train and
test draw from disjoint source images so augmentation cannot leak.

Usage: make_digits.py OUTDIR [n_train] [n_test] [seed]
"""
import gzip
import struct
import sys

import numpy as np
from scipy import ndimage
from sklearn.datasets import load_digits


def write_idx_images(path, images):
    with gzip.open(path, "wb") as f:
        f.write(struct.pack(">iiii", 2051, len(images), 28, 28))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path, labels):
    with gzip.open(path, "wb") as f:
        f.write(struct.pack(">ii", 2049, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def render(img8, rng):
    x = ndimage.zoom(img8 / 16.0, 28 / 8, order=1)
    x = ndimage.rotate(x, rng.uniform(-12, 12), reshape=False, order=1)
    x = ndimage.shift(x, (rng.uniform(-2, 2), rng.uniform(-2, 2)), order=1)
    x *= rng.uniform(0.8, 1.0)
    return np.clip(x * 255, 0, 255)


def build(pool_x, pool_y, n, rng):
    idx = rng.integers(0, len(pool_x), size=n)
    images = np.stack([render(pool_x[i], rng) for i in idx])
    return images, pool_y[idx]


def main():
    out = sys.argv[1]
    n_train = int(sys.argv[2]) if len(sys.argv) > 2 else 10000
    n_test = int(sys.argv[3]) if len(sys.argv) > 3 else 2000
    seed = int(sys.argv[4]) if len(sys.argv) > 4 else 7
    rng = np.random.default_rng(seed)

    d = load_digits()
    order = rng.permutation(len(d.images))
    split = int(0.85 * len(order))
    tr, te = order[:split], order[split:]

    xi, yi = build(d.images[tr], d.target[tr], n_train, rng)
    write_idx_images(f"{out}/train-images-idx3-ubyte.gz", xi)
    write_idx_labels(f"{out}/train-labels-idx1-ubyte.gz", yi)
    xi, yi = build(d.images[te], d.target[te], n_test, rng)
    write_idx_images(f"{out}/t10k-images-idx3-ubyte.gz", xi)
    write_idx_labels(f"{out}/t10k-labels-idx1-ubyte.gz", yi)
    print(f"wrote {n_train} train / {n_test} test images to {out}")


if __name__ == "__main__":
    main()
