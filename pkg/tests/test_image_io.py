import io
import zlib

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from morsegrid.errors import ParseError, TruncatedError, UnsupportedDepth, UnsupportedFormat
from morsegrid.image_io import GrayImage, RgbImage, read_any, read_pgm, read_png, read_ppm, read_rgb, write_pgm, write_ppm


def test_read_p2_example():
    img = read_pgm(b"P2\n2 2\n255\n0 128\n255 7\n")
    assert (img.width, img.height) == (2, 2)
    assert img.values.ravel().tolist() == [0, 128, 255, 7]


def test_maxval_rescale():
    assert read_pgm(b"P2\n1 1\n1\n1\n").values.tolist() == [[255]]
    # 3 * 255 / 6 = 127.5 rounds up
    assert read_pgm(b"P2\n1 1\n6\n3\n").values.tolist() == [[128]]


def test_p5_matches_p2():
    p5 = b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])
    assert read_pgm(p5) == read_pgm(b"P2\n2 2\n255\n0 128\n255 7\n")


def test_write_pgm_examples():
    assert write_pgm(GrayImage.from_list(1, 1, [0]), "ascii") == b"P2\n1 1\n255\n0\n"
    assert write_pgm(GrayImage.from_list(2, 1, [255, 0]), "binary") == b"P5\n2 1\n255\n\xff\x00"


def test_comments_and_whitespace_runs():
    data = b"P2 # magic\n# a comment line\n  2\t\t2 \n# another\n255\n0   128\n\n255 7"
    assert read_pgm(data).values.ravel().tolist() == [0, 128, 255, 7]


@pytest.mark.parametrize(
    "data, exc",
    [
        (b"P7\n1 1\n255\n0\n", ParseError),
        (b"P2\nx 1\n255\n0\n", ParseError),
        (b"P2\n2 2\n255\n0 1 2\n", TruncatedError),
        (b"P5\n2 2\n255\n\x00\x01", TruncatedError),
        (b"P2\n1 1\n65535\n0\n", UnsupportedDepth),
        (b"P2\n1 1\n10\n11\n", ParseError),
        (b"P2\n0 1\n255\n", ParseError),
        (b"P2\n1 1\n255\n0 9\n", ParseError),
    ],
)
def test_malformed(data, exc):
    with pytest.raises(exc):
        read_pgm(data)


def test_parse_error_carries_offset():
    with pytest.raises(ParseError) as info:
        read_pgm(b"P2\n1 z\n255\n0\n")
    assert info.value.offset == 5


def test_read_p3_example():
    img = read_rgb(b"P3\n1 1\n255\n10 20 30\n", "ppm")
    assert img.pixels.tolist() == [[[10, 20, 30]]]


@st.composite
def gray_images(draw, max_side=8):
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    return GrayImage(draw(arrays(np.uint8, (h, w))))


@st.composite
def rgb_images(draw, max_side=6):
    h = draw(st.integers(1, max_side))
    w = draw(st.integers(1, max_side))
    return RgbImage(draw(arrays(np.uint8, (h, w, 3))))


@given(gray_images(), st.sampled_from(["ascii", "binary"]))
def test_pgm_round_trip(img, mode):
    assert read_pgm(write_pgm(img, mode)) == img


@given(rgb_images(), st.sampled_from(["ascii", "binary"]))
def test_ppm_round_trip(img, mode):
    assert read_ppm(write_ppm(img, mode)) == img


def test_random_5x5_and_4x3(rng):
    g = GrayImage(rng.integers(0, 256, (5, 5)))
    assert read_pgm(write_pgm(g, "ascii")) == g == read_pgm(write_pgm(g, "binary"))
    c = RgbImage(rng.integers(0, 256, (3, 4, 3)))
    assert read_rgb(write_ppm(c), "ppm") == c


@given(st.integers(1, 255), st.data())
def test_rescale_monotone(maxval, data):
    v1 = data.draw(st.integers(0, maxval))
    v2 = data.draw(st.integers(v1, maxval))
    a = read_pgm(f"P2\n2 1\n{maxval}\n{v1} {v2}\n".encode()).values.ravel()
    assert a[0] <= a[1]


def _pil_png(arr, mode) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(arr, mode).save(buf, format="PNG")
    return buf.getvalue()


def test_png_grayscale_content_gives_equal_channels(rng):
    g = rng.integers(0, 256, (7, 9)).astype(np.uint8)
    img = read_rgb(_pil_png(g, "L"), "png")
    assert np.array_equal(img.pixels[..., 0], g)
    assert np.array_equal(img.pixels[..., 1], g) and np.array_equal(img.pixels[..., 2], g)


def test_png_rgb_matches_reference_encoder(rng):
    arr = rng.integers(0, 256, (11, 13, 3)).astype(np.uint8)
    assert np.array_equal(read_png(_pil_png(arr, "RGB")).pixels, arr)


def test_png_palette(rng):
    arr = rng.integers(0, 256, (10, 10, 3)).astype(np.uint8)
    pal = Image.fromarray(arr, "RGB").quantize(colors=64)  # > 16 entries keeps 8-bit indices
    buf = io.BytesIO()
    pal.save(buf, format="PNG")
    expected = np.asarray(pal.convert("RGB"))
    assert np.array_equal(read_png(buf.getvalue()).pixels, expected)


def _raw_png(rows: bytes, width, height, color_type, depth=8):
    import struct

    def chunk(t, body):
        return struct.pack(">I", len(body)) + t + body + struct.pack(">I", zlib.crc32(t + body) & 0xFFFFFFFF)

    ihdr = struct.pack(">IIBBBBB", width, height, depth, color_type, 0, 0, 0)
    return b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", ihdr) + chunk(b"IDAT", zlib.compress(rows)) + chunk(b"IEND", b"")


def test_png_every_filter_type():
    # one gray row per filter type, each encoding the same values 10, 20, 30
    want = np.array([[10, 20, 30]] * 5, dtype=np.uint8)
    rows = bytes([0, 10, 20, 30])  # none
    rows += bytes([1, 10, 10, 10])  # sub
    rows += bytes([2, 0, 0, 0])  # up
    rows += bytes([3, 5, 5, 5])  # average: 10-5, 20-(10+20)//2, 30-(20+30)//2
    rows += bytes([4, 0, 0, 0])  # paeth picks the equal row above
    got = read_png(_raw_png(rows, 3, 5, 0)).pixels[..., 0]
    assert np.array_equal(got, want)


def test_png_rejects_alpha_and_16_bit():
    with pytest.raises(UnsupportedFormat):
        read_png(_raw_png(bytes([0, 1, 2, 3, 4]), 1, 1, 6))
    with pytest.raises(UnsupportedDepth):
        read_png(_raw_png(bytes([0, 1, 2]), 1, 1, 0, depth=16))


def test_png_crc_and_truncation():
    good = _raw_png(bytes([0, 7]), 1, 1, 0)
    bad = bytearray(good)
    bad[30] ^= 0xFF
    with pytest.raises(ParseError):
        read_png(bytes(bad))
    with pytest.raises(TruncatedError):
        read_png(good[:-12])


def test_unsupported_format_names():
    with pytest.raises(UnsupportedFormat):
        read_rgb(b"P3\n1 1\n255\n1 2 3\n", "jpeg")
    with pytest.raises(UnsupportedFormat):
        read_any(b"\xff\xd8\xff")


def test_images_are_immutable():
    img = GrayImage.from_list(2, 1, [1, 2])
    with pytest.raises(ValueError):
        img.values[0, 0] = 9
