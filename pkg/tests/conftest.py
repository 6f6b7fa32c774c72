import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from morsegrid.color import Surjection
from morsegrid.image_io import GrayImage, RgbImage

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def gray(rows) -> GrayImage:
    return GrayImage(np.asarray(rows, dtype=np.int64))


def ring(n=3, border=0, center=255) -> GrayImage:
    v = np.full((n, n), border, dtype=np.int64)
    v[1:-1, 1:-1] = center
    return GrayImage(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)


def crafted_image() -> RgbImage:
    """Rings drawn in separate channels so each conversion sees a different topology.

    The three small blobs on the right each hold a darker center pixel that
    is a local minimum under some conversions and not under others.
    """
    px = np.zeros((15, 22, 3), dtype=np.int64)
    px[1:6, 1:6] = (240, 0, 0)  # red ring
    px[2:5, 2:5] = 0
    px[1:6, 8:13] = (0, 200, 0)  # green ring
    px[2:5, 9:12] = 0
    px[8:14, 1:7] = (0, 0, 250)  # blue ring
    px[9:13, 2:6] = 0
    px[9:12, 9:12] = (90, 90, 90)  # gray blob, a minimum under every method
    px[10, 10] = (0, 30, 0)
    px[1:4, 15:18] = (90, 0, 90)  # minimum under average only
    px[2, 16] = (0, 150, 0)
    px[6:9, 15:18] = (200, 0, 0)  # minimum under the max-channel table only
    px[7, 16] = (90, 90, 90)
    px[11:14, 15:18] = (200, 0, 0)
    px[12, 16] = (90, 90, 90)
    return RgbImage(px)


def max_channel():
    return Surjection.from_function(lambda r, g, b: max(r, g, b), 16, name="max-channel")


@pytest.fixture
def crafted_rgb() -> RgbImage:
    return crafted_image()
