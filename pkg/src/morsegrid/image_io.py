"""Netpbm (PGM/PPM) and PNG readers plus PGM/PPM writers.

Images are held as read-only ``uint8`` numpy arrays, row-major with the
origin at the top-left pixel: ``values[y, x]`` for gray, ``pixels[y, x, c]``
for RGB.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np
from numba import njit

from morsegrid.errors import ParseError, TruncatedError, UnsupportedDepth, UnsupportedFormat

_WHITESPACE = b" \t\n\r\v\f"


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.uint8)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GrayImage:
    values: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"gray image must be a nonempty 2D grid, got shape {v.shape}")
        if v.dtype != np.uint8:
            if v.size and (v.min() < 0 or v.max() > 255):
                raise ValueError("gray values must lie in [0, 255]")
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def from_list(cls, width: int, height: int, values) -> "GrayImage":
        v = np.asarray(list(values), dtype=np.int64)
        if v.size != width * height:
            raise ValueError(f"expected {width * height} values, got {v.size}")
        return cls(v.reshape(height, width))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.values.shape, self.values.tobytes()))

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True, eq=False)
class RgbImage:
    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError(f"rgb image must have shape (h, w, 3), got {p.shape}")
        if p.dtype != np.uint8:
            if p.min() < 0 or p.max() > 255:
                raise ValueError("channel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", _frozen(p))

    @classmethod
    def from_list(cls, width: int, height: int, triples) -> "RgbImage":
        p = np.asarray(list(triples), dtype=np.int64)
        if p.shape != (width * height, 3):
            raise ValueError(f"expected {width * height} rgb triples")
        return cls(p.reshape(height, width, 3))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RgbImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))

    def __repr__(self):
        return f"RgbImage({self.width}x{self.height})"


# --------------------------------------------------------------------------
# netpbm


class _Tokens:
    """Whitespace/comment aware tokenizer over a netpbm byte buffer."""

    def __init__(self, data: bytes, pos: int = 0):
        self.data = data
        self.pos = pos

    def skip(self):
        data, n = self.data, len(self.data)
        while self.pos < n:
            c = data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == 0x23:  # '#': comment runs to end of line
                while self.pos < n and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                break

    def integer(self, what: str) -> int:
        self.skip()
        start = self.pos
        data, n = self.data, len(self.data)
        while self.pos < n and 0x30 <= data[self.pos] <= 0x39:
            self.pos += 1
        if self.pos == start:
            if start >= n:
                raise ParseError(start, f"unexpected end of data reading {what}")
            raise ParseError(start, f"expected decimal integer for {what}")
        if self.pos < n and data[self.pos] not in _WHITESPACE and data[self.pos] != 0x23:
            raise ParseError(self.pos, f"garbage after {what}")
        return int(data[start:self.pos])


def _scale(raw: np.ndarray, maxval: int) -> np.ndarray:
    if maxval == 255:
        return raw.astype(np.uint8)
    # round-half-up of v * 255 / maxval in exact integer arithmetic
    raw = raw.astype(np.int64)
    return ((2 * raw * 255 + maxval) // (2 * maxval)).astype(np.uint8)


def _read_netpbm(data: bytes, channels: int, magics: tuple[bytes, bytes]) -> np.ndarray:
    if len(data) < 2:
        raise ParseError(0, "file too short for a magic number")
    magic = bytes(data[:2])
    if magic not in magics:
        raise ParseError(0, f"bad magic {magic!r}, expected one of {magics}")
    binary = magic == magics[1]
    tok = _Tokens(data, 2)
    if len(data) > 2 and data[2] not in _WHITESPACE and data[2] != 0x23:
        raise ParseError(2, "magic number must be followed by whitespace")
    width = tok.integer("width")
    height = tok.integer("height")
    maxval_pos = tok.pos
    maxval = tok.integer("maxval")
    if width < 1 or height < 1:
        raise ParseError(maxval_pos, f"nonpositive dimensions {width}x{height}")
    if maxval < 1:
        raise ParseError(maxval_pos, "maxval must be positive")
    if maxval > 255:
        raise UnsupportedDepth(f"maxval {maxval} exceeds 255; only 8-bit images are supported")
    count = width * height * channels
    if binary:
        if tok.pos >= len(data):
            raise TruncatedError("no pixel data after header")
        start = tok.pos + 1  # exactly one whitespace byte separates header and raster
        payload = data[start:start + count]
        if len(payload) < count:
            raise TruncatedError(f"expected {count} bytes of pixel data, got {len(payload)}")
        raw = np.frombuffer(bytes(payload), dtype=np.uint8)
        bad = np.flatnonzero(raw > maxval)
    else:
        body = bytes(data[tok.pos:])
        if b"#" in body:
            # comments inside the raster are rare; fall back to the slow tokenizer
            vals = []
            for _ in range(count):
                try:
                    vals.append(tok.integer("sample"))
                except ParseError as exc:
                    if exc.offset >= len(data):
                        raise TruncatedError(f"expected {count} samples, got {len(vals)}") from None
                    raise
            raw = np.asarray(vals, dtype=np.int64)
            tok.skip()
            if tok.pos != len(data):
                raise ParseError(tok.pos, "trailing data after raster")
        else:
            parts = body.split()
            if len(parts) < count:
                raise TruncatedError(f"expected {count} samples, got {len(parts)}")
            if len(parts) > count:
                raise ParseError(len(data), "trailing data after raster")
            try:
                if not all(p.isdigit() for p in parts):
                    raise ValueError
                raw = np.asarray([int(p) for p in parts], dtype=np.int64)
            except ValueError:
                raise ParseError(tok.pos, "non-numeric sample in raster") from None
        bad = np.flatnonzero(raw > maxval)
    if bad.size:
        raise ParseError(tok.pos, f"sample {int(raw[bad[0]])} exceeds maxval {maxval}")
    shape = (height, width) if channels == 1 else (height, width, channels)
    return _scale(raw, maxval).reshape(shape)


def read_pgm(data: bytes) -> GrayImage:
    """Parse a P2 (ASCII) or P5 (binary) PGM; samples are rescaled to 0..255."""
    return GrayImage(_read_netpbm(data, 1, (b"P2", b"P5")))


def read_ppm(data: bytes) -> RgbImage:
    return RgbImage(_read_netpbm(data, 3, (b"P3", b"P6")))


def _ascii_raster(rows: np.ndarray) -> bytes:
    lines = [" ".join(str(int(v)) for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode("ascii")


def write_pgm(img: GrayImage, mode: str = "binary") -> bytes:
    header = f"{img.width} {img.height}\n255\n".encode("ascii")
    if mode == "ascii":
        return b"P2\n" + header + _ascii_raster(img.values)
    if mode == "binary":
        return b"P5\n" + header + img.values.tobytes()
    raise ValueError(f"unknown PGM mode {mode!r}")


def write_ppm(img: RgbImage, mode: str = "binary") -> bytes:
    header = f"{img.width} {img.height}\n255\n".encode("ascii")
    if mode == "ascii":
        return b"P3\n" + header + _ascii_raster(img.pixels.reshape(img.height, -1))
    if mode == "binary":
        return b"P6\n" + header + img.pixels.tobytes()
    raise ValueError(f"unknown PPM mode {mode!r}")


# --------------------------------------------------------------------------
# PNG

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


@njit(cache=True)
def _unfilter(raw, height, stride, bpp):
    out = np.zeros((height, stride), dtype=np.uint8)
    pos = 0
    for y in range(height):
        ftype = raw[pos]
        pos += 1
        for x in range(stride):
            v = np.int64(raw[pos + x])
            a = np.int64(out[y, x - bpp]) if x >= bpp else 0
            b = np.int64(out[y - 1, x]) if y > 0 else 0
            c = np.int64(out[y - 1, x - bpp]) if (x >= bpp and y > 0) else 0
            if ftype == 0:
                pred = 0
            elif ftype == 1:
                pred = a
            elif ftype == 2:
                pred = b
            elif ftype == 3:
                pred = (a + b) // 2
            elif ftype == 4:
                p = a + b - c
                pa = abs(p - a)
                pb = abs(p - b)
                pc = abs(p - c)
                if pa <= pb and pa <= pc:
                    pred = a
                elif pb <= pc:
                    pred = b
                else:
                    pred = c
            else:
                return out, y
            out[y, x] = (v + pred) & 0xFF
        pos += stride
    return out, -1


def read_png(data: bytes) -> RgbImage:
    """Decode a non-interlaced 8-bit gray, RGB or palette PNG."""
    if data[:8] != _PNG_SIGNATURE:
        raise ParseError(0, "missing PNG signature")
    pos = 8
    ihdr = None
    palette = None
    idat = []
    while True:
        if pos + 8 > len(data):
            raise TruncatedError("PNG ended before IEND chunk")
        length, ctype = struct.unpack(">I4s", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + length]
        if len(body) < length or pos + 12 + length > len(data):
            raise TruncatedError(f"chunk {ctype!r} truncated")
        (crc,) = struct.unpack(">I", data[pos + 8 + length:pos + 12 + length])
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise ParseError(pos, f"CRC mismatch in chunk {ctype!r}")
        if ctype == b"IHDR":
            ihdr = struct.unpack(">IIBBBBB", body)
        elif ctype == b"PLTE":
            palette = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3)
        elif ctype == b"IDAT":
            idat.append(body)
        elif ctype == b"IEND":
            break
        pos += 12 + length
    if ihdr is None:
        raise ParseError(8, "PNG has no IHDR chunk")
    width, height, depth, color_type, _, _, interlace = ihdr
    if depth != 8:
        raise UnsupportedDepth(f"PNG bit depth {depth}; only 8-bit channels are supported")
    if interlace != 0:
        raise UnsupportedFormat("interlaced PNG")
    channels = {0: 1, 2: 3, 3: 1}.get(color_type)
    if channels is None:
        raise UnsupportedFormat(f"PNG color type {color_type} (alpha channels are not supported)")
    try:
        raw = np.frombuffer(zlib.decompress(b"".join(idat)), dtype=np.uint8)
    except zlib.error as exc:
        raise ParseError(pos, f"bad zlib stream: {exc}") from None
    stride = width * channels
    if raw.size < height * (stride + 1):
        raise TruncatedError("PNG image data shorter than declared size")
    rows, bad_row = _unfilter(raw, height, stride, channels)
    if bad_row >= 0:
        raise ParseError(pos, f"unknown filter type in row {bad_row}")
    if color_type == 0:
        px = np.repeat(rows.reshape(height, width, 1), 3, axis=2)
    elif color_type == 2:
        px = rows.reshape(height, width, 3)
    else:
        if palette is None:
            raise ParseError(8, "palette PNG without PLTE chunk")
        if rows.max() >= len(palette):
            raise ParseError(pos, "palette index out of range")
        px = palette[rows]
    return RgbImage(px)


def read_rgb(data: bytes, format: str | None = None) -> RgbImage:
    """Read an RGB raster; ``format`` is ``"ppm"``, ``"png"`` or None to sniff."""
    if format is None:
        format = "png" if data[:8] == _PNG_SIGNATURE else "ppm"
    if format == "ppm":
        return read_ppm(data)
    if format == "png":
        return read_png(data)
    raise UnsupportedFormat(f"unsupported image format {format!r}")


def read_any(data: bytes) -> RgbImage | GrayImage:
    """Sniff the magic bytes and decode; PGM yields a GrayImage."""
    if data[:2] in (b"P2", b"P5"):
        return read_pgm(data)
    if data[:2] in (b"P3", b"P6"):
        return read_ppm(data)
    if data[:8] == _PNG_SIGNATURE:
        return read_png(data)
    raise UnsupportedFormat("unrecognized image file (expected PGM, PPM or PNG)")
