#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The tsattn Authors
"""Writes seeded Gaussian Q (N x d) and K (M x d) TSA1 files for a layout."""

import argparse
import json
import random
import struct


def write_tsa(path, rows, cols, values):
    with open(path, "wb") as f:
        f.write(b"TSA1" + bytes([0x01, 0x02, 0x00, 0x00]))
        f.write(struct.pack("<II", rows, cols))
        f.write(struct.pack("<%df" % len(values), *values))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--layout", required=True)
    ap.add_argument("--d", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--q", default="q.tsa")
    ap.add_argument("--k", default="k.tsa")
    args = ap.parse_args()

    with open(args.layout) as f:
        layout = json.load(f)
    video = layout["video"]
    n = video["frames"] * video["height"] * video["width"]
    m = layout["text"]["num_tokens"]
    rng = random.Random(args.seed)
    write_tsa(args.q, n, args.d, [rng.gauss(0.0, 1.0) for _ in range(n * args.d)])
    write_tsa(args.k, m, args.d, [rng.gauss(0.0, 1.0) for _ in range(m * args.d)])


if __name__ == "__main__":
    main()
