"""Compare the diagrams that different RGB-to-gray conversions produce for one image.

    python scripts/conversion_sensitivity.py                  # built-in crafted image
    python scripts/conversion_sensitivity.py photo.png --crop 0,0,200,200
"""

from __future__ import annotations

import argparse
import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from morsegrid import diagram_of
from morsegrid.color import Average, Luminosity, PreprocessSpec, Surjection, Weighted, preprocess, to_gray
from morsegrid.export import bar_count, render_diagram
from morsegrid.image_io import RgbImage, read_rgb
from morsegrid.persistence import bottleneck_distance


@dataclass
class SensitivityConfig:
    image: Path | None = None
    crop: tuple[int, int, int, int] | None = None
    weights: str = "1/2,1/4,1/4"
    outdir: Path | None = None


def crafted() -> RgbImage:
    """Rings in separate channels plus blobs whose centers only some methods see as minima."""
    px = np.zeros((15, 22, 3), dtype=np.int64)
    px[1:6, 1:6] = (240, 0, 0)
    px[2:5, 2:5] = 0
    px[1:6, 8:13] = (0, 200, 0)
    px[2:5, 9:12] = 0
    px[8:14, 1:7] = (0, 0, 250)
    px[9:13, 2:6] = 0
    px[9:12, 9:12] = (90, 90, 90)
    px[10, 10] = (0, 30, 0)
    px[1:4, 15:18] = (90, 0, 90)
    px[2, 16] = (0, 150, 0)
    px[6:9, 15:18] = (200, 0, 0)
    px[7, 16] = (90, 90, 90)
    px[11:14, 15:18] = (200, 0, 0)
    px[12, 16] = (90, 90, 90)
    return RgbImage(px)


def run(cfg: SensitivityConfig):
    img = crafted() if cfg.image is None else read_rgb(cfg.image.read_bytes())
    img = preprocess(img, PreprocessSpec(crop=cfg.crop))
    w = Weighted.parse(cfg.weights)
    methods = [
        Average(),
        Luminosity(),
        Weighted(w.wr, w.wg, w.wb, name=f"weighted({cfg.weights})"),
        Surjection.from_function(lambda r, g, b: max(r, g, b), 16, name="max-channel"),
    ]
    diagrams = {m.name: diagram_of(to_gray(img, m)) for m in methods}
    print(f"image {img.width}x{img.height}")
    for name, D in sorted(diagrams.items(), key=lambda kv: -bar_count(kv[1])):
        dims = [len(D.in_dim(0)), len(D.in_dim(1))]
        print(f"  {name:<24} bars={bar_count(D):<5} dim0={dims[0]:<5} dim1={dims[1]}")
    print("bottleneck distances (dim 0 / dim 1):")
    for a, b in itertools.combinations(diagrams, 2):
        d0 = bottleneck_distance(diagrams[a], diagrams[b], 0)
        d1 = bottleneck_distance(diagrams[a], diagrams[b], 1)
        print(f"  {a} vs {b}: {float(d0):g} / {float(d1):g}")
    if cfg.outdir:
        cfg.outdir.mkdir(parents=True, exist_ok=True)
        for name, D in diagrams.items():
            safe = "".join(c if c.isalnum() else "_" for c in name)
            (cfg.outdir / f"{safe}.svg").write_bytes(render_diagram(D, title=name))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("image", nargs="?", type=Path, default=None)
    p.add_argument("--crop", type=lambda s: tuple(int(v) for v in s.split(",")), default=None)
    p.add_argument("--weights", default=SensitivityConfig.weights)
    p.add_argument("--outdir", type=Path, default=None, help="write one barcode SVG per method")
    a = p.parse_args()
    run(SensitivityConfig(a.image, a.crop, a.weights, a.outdir))


if __name__ == "__main__":
    main()
