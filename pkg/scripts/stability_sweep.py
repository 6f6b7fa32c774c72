"""Bottleneck distance between diagrams of an image and its bounded perturbations.

    python scripts/stability_sweep.py --images 200 --max-size 16
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass

import numpy as np

from morsegrid import diagram_of
from morsegrid.image_io import GrayImage
from morsegrid.persistence import bottleneck_distance


@dataclass
class SweepConfig:
    images: int = 200
    max_size: int = 12
    eps: tuple[int, ...] = (1, 2, 3, 4, 5)
    seed: int = 0


def run(cfg: SweepConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    dist = {e: ([], []) for e in cfg.eps}
    for _ in range(cfg.images):
        h, w = rng.integers(1, cfg.max_size + 1, 2)
        base = rng.integers(0, 256, (h, w))
        D = diagram_of(GrayImage(base))
        for e in cfg.eps:
            noisy = np.clip(base + rng.integers(-e, e + 1, (h, w)), 0, 255)
            E = diagram_of(GrayImage(noisy))
            for dim in (0, 1):
                dist[e][dim].append(float(bottleneck_distance(D, E, dim)))
    violations = 0
    print(f"{cfg.images} images up to {cfg.max_size}x{cfg.max_size}")
    print("eps  dim  mean   max   violations")
    for e in cfg.eps:
        for dim in (0, 1):
            d = np.array(dist[e][dim])
            bad = int((d > e).sum())
            violations += bad
            print(f"{e:>3}  {dim:>3}  {d.mean():5.2f}  {d.max():4g}  {bad}")
    return violations


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--images", type=int, default=SweepConfig.images)
    p.add_argument("--max-size", type=int, default=SweepConfig.max_size)
    p.add_argument("--eps", type=int, nargs="+", default=list(SweepConfig.eps))
    p.add_argument("--seed", type=int, default=SweepConfig.seed)
    a = p.parse_args()
    raise SystemExit(1 if run(SweepConfig(a.images, a.max_size, tuple(a.eps), a.seed)) else 0)


if __name__ == "__main__":
    main()
