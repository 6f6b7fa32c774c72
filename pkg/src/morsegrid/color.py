"""RGB to grayscale conversion and the screenshot clean-up steps.

All arithmetic that feeds a rounding step is done on exact integers or
fractions, so the round-half-up convention is applied to the true value and
never to a binary float approximation of it (0.21 * 255 is 53.55 exactly,
not 53.549999...).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm

import numpy as np

from morsegrid.errors import CropError, IncompleteSurjection
from morsegrid.image_io import GrayImage, RgbImage


def round_half_up(num: np.ndarray, den: int) -> np.ndarray:
    """Round num/den to the nearest integer, halves upward (num >= 0, den > 0)."""
    return (2 * num + den) // (2 * den)


@dataclass(frozen=True)
class Weighted:
    """Linear combination ``wr*R + wg*G + wb*B`` with rational weights summing to 1."""

    wr: Fraction
    wg: Fraction
    wb: Fraction
    name: str = "weighted"

    def __post_init__(self):
        ws = tuple(Fraction(str(w)) if isinstance(w, float) else Fraction(w) for w in (self.wr, self.wg, self.wb))
        if any(w < 0 for w in ws):
            raise ValueError(f"weights must be nonnegative, got {ws}")
        if sum(ws) != 1:
            raise ValueError(f"weights must sum to exactly 1, got {sum(ws)}")
        object.__setattr__(self, "wr", ws[0])
        object.__setattr__(self, "wg", ws[1])
        object.__setattr__(self, "wb", ws[2])

    @classmethod
    def parse(cls, text: str) -> "Weighted":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected three comma separated weights, got {text!r}")
        return cls(*(Fraction(p) for p in parts))

    def integer_weights(self) -> tuple[tuple[int, int, int], int]:
        den = lcm(self.wr.denominator, self.wg.denominator, self.wb.denominator)
        return tuple(int(w * den) for w in (self.wr, self.wg, self.wb)), den


def Average() -> Weighted:
    return Weighted(Fraction(1, 3), Fraction(1, 3), Fraction(1, 3), name="average")


def Luminosity() -> Weighted:
    return Weighted(Fraction(21, 100), Fraction(72, 100), Fraction(7, 100), name="luminosity")


@dataclass(frozen=True)
class Surjection:
    """Lookup table from (quantized) RGB to gray.

    ``table`` maps ``(r_bin, g_bin, b_bin)`` to a gray level, where a channel
    value v falls in bin ``v // bin_width``. ``bin_width=1`` is the full
    256**3 table. Every bin must be present; see :meth:`lut`.
    """

    table: dict = field(hash=False)
    bin_width: int = 1
    name: str = "surjection"

    def __post_init__(self):
        if not 1 <= self.bin_width <= 256:
            raise ValueError(f"bin width must be in 1..256, got {self.bin_width}")
        for key, g in self.table.items():
            if not 0 <= g <= 255:
                raise ValueError(f"table value {g} for key {key} outside [0, 255]")

    @property
    def bins(self) -> int:
        return -(-256 // self.bin_width)

    def lut(self) -> np.ndarray:
        """Dense (bins, bins, bins) uint8 array; raises on the first missing key."""
        n = self.bins
        lut = np.full((n, n, n), -1, dtype=np.int16)
        for (r, g, b), v in self.table.items():
            if 0 <= r < n and 0 <= g < n and 0 <= b < n:
                lut[r, g, b] = v
        missing = np.argwhere(lut < 0)
        if missing.size:
            raise IncompleteSurjection(tuple(int(k) for k in missing[0]))
        return lut.astype(np.uint8)

    @classmethod
    def from_function(cls, f, bin_width: int = 1, name: str = "surjection") -> "Surjection":
        """Tabulate ``f(r, g, b)`` at the center of every bin (clipped to 255)."""
        n = -(-256 // bin_width)
        centers = [min(i * bin_width + bin_width // 2, 255) for i in range(n)]
        table = {
            (i, j, k): int(f(centers[i], centers[j], centers[k]))
            for i in range(n) for j in range(n) for k in range(n)
        }
        return cls(table, bin_width, name)

    @classmethod
    def from_csv(cls, text: str) -> "Surjection":
        """Parse ``r,g,b,gray`` lines, optionally preceded by a ``bin_width=N`` line."""
        bin_width = 1
        table = {}
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) == 1 and row[0].strip().startswith("bin_width="):
                bin_width = int(row[0].split("=", 1)[1])
                continue
            if len(row) != 4:
                raise ValueError(f"line {lineno}: expected r,g,b,gray")
            if [x.strip().lower() for x in row] == ["r", "g", "b", "gray"]:
                continue
            try:
                r, g, b, v = (int(x) for x in row)
            except ValueError:
                raise ValueError(f"line {lineno}: non-integer field") from None
            table[(r, g, b)] = v
        return cls(table, bin_width)


ConversionMethod = Weighted | Surjection


def to_gray(img: RgbImage, method: ConversionMethod) -> GrayImage:
    px = img.pixels.astype(np.int64)
    if isinstance(method, Surjection):
        lut = method.lut()
        q = px // method.bin_width
        return GrayImage(lut[q[..., 0], q[..., 1], q[..., 2]])
    (wr, wg, wb), den = method.integer_weights()
    num = wr * px[..., 0] + wg * px[..., 1] + wb * px[..., 2]
    return GrayImage(np.clip(round_half_up(num, den), 0, 255))


def compare_methods(img: RgbImage, methods) -> list[GrayImage]:
    methods = list(methods)
    if not methods:
        raise ValueError("compare_methods needs at least one conversion method")
    return [to_gray(img, m) for m in methods]


# --------------------------------------------------------------------------
# preprocessing


@dataclass(frozen=True)
class PreprocessSpec:
    crop: tuple[int, int, int, int] | None = None  # x, y, w, h
    background_colors: frozenset = frozenset()
    tolerance: int = 0
    saturate: bool = False
    contrast_stretch: bool = False

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("background tolerance must be >= 0")
        object.__setattr__(self, "background_colors", frozenset(tuple(c) for c in self.background_colors))


def crop(img: RgbImage, x: int, y: int, w: int, h: int) -> RgbImage:
    if w < 1 or h < 1 or x < 0 or y < 0 or x + w > img.width or y + h > img.height:
        raise CropError(f"crop ({x}, {y}, {w}, {h}) outside {img.width}x{img.height} image")
    return RgbImage(img.pixels[y:y + h, x:x + w])


def mask_background(img: RgbImage, colors, tolerance: int = 0) -> RgbImage:
    px = img.pixels.astype(np.int16)
    hit = np.zeros(px.shape[:2], dtype=bool)
    for c in colors:
        hit |= np.all(np.abs(px - np.asarray(c, dtype=np.int16)) <= tolerance, axis=2)
    out = img.pixels.copy()
    out[hit] = 0
    return RgbImage(out)


def saturate(img: RgbImage) -> RgbImage:
    """Push HSV saturation to 1 keeping hue and value.

    Achromatic pixels (r == g == b) have no hue to keep and are left alone.
    With S = 1 the smallest channel becomes 0, the largest keeps its value,
    and the middle channel is placed to preserve the hue.
    """
    px = img.pixels.astype(np.int64)
    hi = px.max(axis=2)
    lo = px.min(axis=2)
    chroma = hi - lo
    out = px.copy()
    colored = chroma > 0
    if colored.any():
        order = np.argsort(px, axis=2, kind="stable")
        mid = np.take_along_axis(px, order[..., 1:2], axis=2)[..., 0]
        # hue fixes (mid - lo) / (hi - lo); rescale it onto [0, hi]
        new_mid = np.where(colored, round_half_up(np.where(colored, (mid - lo) * hi, 0), np.maximum(chroma, 1)), 0)
        new = np.zeros_like(px)
        np.put_along_axis(new, order[..., 2:3], hi[..., None], axis=2)
        np.put_along_axis(new, order[..., 1:2], new_mid[..., None], axis=2)
        out[colored] = new[colored]
    return RgbImage(out)


def stretch_contrast(img: RgbImage) -> RgbImage:
    """Per-channel linear map of the observed [min, max] onto [0, 255]."""
    px = img.pixels.astype(np.int64)
    out = px.copy()
    for c in range(3):
        ch = px[..., c]
        lo, hi = int(ch.min()), int(ch.max())
        if hi > lo:
            out[..., c] = round_half_up((ch - lo) * 255, hi - lo)
    return RgbImage(out)


def preprocess(img: RgbImage, spec: PreprocessSpec) -> RgbImage:
    """Crop, mask background to black, saturate, stretch contrast (in that order)."""
    if spec.crop is not None:
        img = crop(img, *spec.crop)
    if spec.background_colors:
        img = mask_background(img, spec.background_colors, spec.tolerance)
    if spec.saturate:
        img = saturate(img)
    if spec.contrast_stretch:
        img = stretch_contrast(img)
    return img


def histogram_summary(img: GrayImage) -> dict:
    v = img.values
    return {
        "min": int(v.min()),
        "max": int(v.max()),
        "mean": round(float(v.mean()), 3),
        "distinct": int(np.unique(v).size),
    }
