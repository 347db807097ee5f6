#!/usr/bin/env python3
"""Builds MNIST IDX files from the npm `mnist` package (10k real digits).

The canonical IDX distribution needs direct HTTP access, which build sandboxes
often lack; the npm registry mirror usually works. The package ships the
digits as JSON with intensities rounded to 3 decimals of v/255, which this
script inverts exactly back to bytes.

Writes train-images-idx3-ubyte / train-labels-idx1-ubyte (first 80% of every
class) and t10k-images-idx3-ubyte / t10k-labels-idx1-ubyte (the rest), so the
standard loaders - and the train/val disjointness guarantee - apply unchanged.

Usage: fetch_mnist.py --out data/mnist [--tgz mnist-1.1.0.tgz]
"""

import argparse
import json
import struct
import subprocess
import sys
import tarfile
import tempfile
from pathlib import Path

TRAIN_FRACTION = 0.8


def obtain_tarball(workdir: Path, tgz: str | None) -> Path:
    if tgz:
        return Path(tgz)
    subprocess.run(
        ["npm", "pack", "mnist@1.1.0"],
        cwd=workdir,
        check=True,
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    return workdir / "mnist-1.1.0.tgz"


def load_digits(tarball: Path) -> dict[int, list[bytes]]:
    digits: dict[int, list[bytes]] = {}
    with tarfile.open(tarball, "r:gz") as tf:
        for d in range(10):
            member = tf.extractfile(f"package/src/digits/{d}.json")
            assert member is not None
            values = json.load(member)["data"]
            assert len(values) % 784 == 0
            images = []
            for i in range(0, len(values), 784):
                # exact inverse of round(v*255)/255 rounded to 3 decimals
                images.append(bytes(round(v * 255) for v in values[i : i + 784]))
            digits[d] = images
    return digits


def write_idx(out_dir: Path, stem: str, images: list[bytes], labels: list[int]) -> None:
    assert len(images) == len(labels)
    with open(out_dir / f"{stem}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(img)
    with open(out_dir / f"{stem}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory for IDX files")
    parser.add_argument("--tgz", help="pre-downloaded mnist npm tarball")
    args = parser.parse_args()

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if (out_dir / "train-images-idx3-ubyte").exists():
        print(f"{out_dir} already populated; nothing to do")
        return 0

    with tempfile.TemporaryDirectory() as tmp:
        tarball = obtain_tarball(Path(tmp), args.tgz)
        if not tarball.exists():
            print("could not obtain the mnist npm package", file=sys.stderr)
            return 1
        digits = load_digits(tarball)

    train_images: list[bytes] = []
    train_labels: list[int] = []
    val_images: list[bytes] = []
    val_labels: list[int] = []
    for d in range(10):
        images = digits[d]
        cut = int(len(images) * TRAIN_FRACTION)
        train_images.extend(images[:cut])
        train_labels.extend([d] * cut)
        val_images.extend(images[cut:])
        val_labels.extend([d] * (len(images) - cut))

    write_idx(out_dir, "train", train_images, train_labels)
    write_idx(out_dir, "t10k", val_images, val_labels)
    print(
        f"wrote {len(train_images)} train and {len(val_images)} val digits to {out_dir}"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
