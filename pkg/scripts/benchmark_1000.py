"""Time each pipeline stage on large grayscale images.

    python scripts/benchmark_1000.py --size 1000 --kind noise smooth
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from morsegrid import diagram_of
from morsegrid.cubical import build_complex
from morsegrid.export import write_csv, write_txt
from morsegrid.image_io import GrayImage
from morsegrid.morse import build_gradient, build_morse_complex
from morsegrid.persistence import compute_persistence


@dataclass
class BenchConfig:
    size: int = 1000
    kinds: list[str] = field(default_factory=lambda: ["noise", "smooth"])
    seed: int = 0
    tiebreak: str = "row"


def make_image(kind: str, size: int, seed: int) -> GrayImage:
    rng = np.random.default_rng(seed)
    noise = rng.integers(0, 256, (size, size))
    if kind == "noise":
        return GrayImage(noise)
    if kind == "smooth":
        blurred = gaussian_filter(noise.astype(float), sigma=8)
        lo, hi = blurred.min(), blurred.max()
        return GrayImage(np.round((blurred - lo) / (hi - lo) * 255).astype(np.int64))
    if kind == "constant":
        return GrayImage(np.full((size, size), 128))
    raise ValueError(f"unknown image kind {kind!r}")


def run(cfg: BenchConfig):
    diagram_of(GrayImage(np.zeros((3, 3), dtype=np.int64)))  # compile kernels
    for kind in cfg.kinds:
        img = make_image(kind, cfg.size, cfg.seed)
        stamps = [("start", time.perf_counter())]
        K = build_complex(img)
        stamps.append(("complex", time.perf_counter()))
        G = build_gradient(K, cfg.tiebreak)
        stamps.append(("gradient", time.perf_counter()))
        M = build_morse_complex(G)
        stamps.append(("morse", time.perf_counter()))
        D = compute_persistence(M)
        stamps.append(("persistence", time.perf_counter()))
        write_txt(D), write_csv(D)
        stamps.append(("export", time.perf_counter()))
        parts = " ".join(f"{name}={b - a:.2f}s" for (_, a), (name, b) in zip(stamps, stamps[1:]))
        counts = G.counts()
        print(
            f"{kind:>8} {cfg.size}x{cfg.size}: total={stamps[-1][1] - stamps[0][1]:.2f}s {parts} "
            f"critical={counts} cells={sum(K.count(d) for d in range(3))} pairs={len(D)}"
        )


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=BenchConfig.size)
    p.add_argument("--kind", nargs="+", default=BenchConfig().kinds, choices=["noise", "smooth", "constant"])
    p.add_argument("--seed", type=int, default=BenchConfig.seed)
    p.add_argument("--tiebreak", default=BenchConfig.tiebreak)
    a = p.parse_args()
    run(BenchConfig(a.size, a.kind, a.seed, a.tiebreak))


if __name__ == "__main__":
    main()
