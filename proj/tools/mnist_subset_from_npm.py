#!/usr/bin/env python3
# Copyright 2026 The pcflow Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Builds an IDX-format MNIST subset from the `mnist` npm package.

The npm package ships 10 000 real MNIST digits as JSON arrays of pixel
intensities in [0, 1] (three decimals). This script shuffles them with a
fixed seed and writes a 9 000 / 1 000 train/test split in the standard IDX
layout, so `pcflow-bench --dataset mnist --data-dir DIR` can read it.

Usage:
    python3 tools/mnist_subset_from_npm.py --out data/mnist
    python3 tools/mnist_subset_from_npm.py --package /path/to/mnist-1.1.0.tgz --out data/mnist
"""

import argparse
import json
import pathlib
import random
import struct
import subprocess
import tarfile
import tempfile

SIDE = 28
PIXELS = SIDE * SIDE


def fetch_package(workdir: pathlib.Path) -> pathlib.Path:
    subprocess.run(["npm", "pack", "mnist@1.1.0"], cwd=workdir, check=True,
                   stdout=subprocess.DEVNULL)
    return next(workdir.glob("mnist-*.tgz"))


def read_digits(tgz: pathlib.Path):
    samples = []
    with tarfile.open(tgz) as tar:
        for digit in range(10):
            member = tar.extractfile(f"package/src/digits/{digit}.json")
            data = json.load(member)["data"]
            if len(data) % PIXELS != 0:
                raise ValueError(f"digit {digit}: ragged pixel array")
            for start in range(0, len(data), PIXELS):
                pixels = bytes(min(255, max(0, round(v * 255)))
                               for v in data[start:start + PIXELS])
                samples.append((pixels, digit))
    return samples


def write_idx(prefix: pathlib.Path, samples):
    with open(f"{prefix}-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(samples), SIDE, SIDE))
        for pixels, _ in samples:
            f.write(pixels)
    with open(f"{prefix}-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(samples)))
        f.write(bytes(label for _, label in samples))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--package", type=pathlib.Path,
                        help="local mnist-*.tgz; fetched with `npm pack` if omitted")
    parser.add_argument("--out", type=pathlib.Path, default=pathlib.Path("data/mnist"))
    parser.add_argument("--test-size", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        tgz = args.package or fetch_package(pathlib.Path(tmp))
        samples = read_digits(tgz)

    random.Random(args.seed).shuffle(samples)
    test, train = samples[:args.test_size], samples[args.test_size:]
    args.out.mkdir(parents=True, exist_ok=True)
    write_idx(args.out / "train", train)
    write_idx(args.out / "t10k", test)
    print(f"wrote {len(train)} train / {len(test)} test samples to {args.out}")


if __name__ == "__main__":
    main()
