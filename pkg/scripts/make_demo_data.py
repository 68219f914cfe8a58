#!/usr/bin/env python3
"""Generate a demo_data/ directory with inputs for every CLI subcommand.

Usage: python scripts/make_demo_data.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np

from neurotopo import GrayImage, RoiPolyline
from neurotopo.pnm import save_image


def rounded_rect(img, x0, y0, w, h, value=200):
    img[y0 : y0 + h, x0 : x0 + w] = value
    for cx, cy in ((x0, y0), (x0 + w - 1, y0), (x0, y0 + h - 1), (x0 + w - 1, y0 + h - 1)):
        img[cy, cx] = 0


def main(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)

    # 5x5 mask with two components and three holes (homology demo)
    rows = ("01001", "10100", "01010", "00101", "00010")
    px = np.array([[255 if c == "1" else 0 for c in row] for row in rows], dtype=np.uint8)
    save_image(GrayImage(px), out_dir / "speckle.pgm", "P2")

    # synapse channels: three coincident puncta on the dendrite, two off it
    red = np.zeros((1024, 1024), dtype=np.uint8)
    green = np.zeros((1024, 1024), dtype=np.uint8)
    rng = np.random.default_rng(1)
    dendrite = [(100, 512), (800, 512), (800, 200)]
    for cx, cy in ((300, 512), (500, 512), (700, 512), (200, 100), (900, 900)):
        red[cy - 2 : cy + 3, cx - 2 : cx + 3] = 220
        green[cy - 2 : cy + 3, cx - 2 : cx + 3] = 190
    red += (rng.random(red.shape) * 20).astype(np.uint8)
    green += (rng.random(green.shape) * 20).astype(np.uint8)
    save_image(GrayImage(red), out_dir / "red.pgm", "P5")
    save_image(GrayImage(green), out_dir / "green.pgm", "P5")
    (out_dir / "roi.json").write_text(RoiPolyline(tuple(dendrite), band_width=4).to_json())

    # nucleus field with a neuron channel covering half the nuclei
    nuclei = np.zeros((512, 512), dtype=np.uint8)
    neurons = np.zeros_like(nuclei)
    slots = rng.choice(7 * 7, size=24, replace=False)
    for i, slot in enumerate(slots):
        gy, gx = divmod(int(slot), 7)
        x0 = 20 + gx * 64 + int(rng.integers(0, 24))
        y0 = 20 + gy * 64 + int(rng.integers(0, 24))
        rounded_rect(nuclei, x0, y0, 13, 8)
        if i % 2 == 0:
            rounded_rect(neurons, x0, y0, 13, 8)
    save_image(GrayImage(nuclei), out_dir / "nuclei.pgm", "P5")
    save_image(GrayImage(neurons), out_dir / "neurons.pgm", "P5")

    # dashed cross for the locate demo
    cross = np.zeros((256, 256), dtype=np.uint8)
    cx = cy = 137
    cross[cy - 1 : cy + 2, cx - 1 : cx + 2] = 255
    for k in range(1, 33):
        if k % 5 in (0, 1, 2):
            cross[cy, cx + k] = cross[cy, cx - k] = 200
            cross[cy + k, cx] = cross[cy - k, cx] = 200
    save_image(GrayImage(cross), out_dir / "culture.pgm", "P5")

    # z-stack: persistent blob plus one transient speck per slice
    for i in range(4):
        s = np.zeros((256, 256), dtype=np.uint8)
        rounded_rect(s, 60, 60, 40, 30, value=220)
        rounded_rect(s, 150 + 10 * i, 150, 6, 5, value=70)
        save_image(GrayImage(s), out_dir / f"stack{i}.pgm", "P5")

    print(f"demo inputs written to {out_dir}/")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_data"))
