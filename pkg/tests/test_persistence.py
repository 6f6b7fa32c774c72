import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from morsegrid import diagram_of
from morsegrid.cubical import build_complex, cell_dim
from morsegrid.errors import OracleTooLarge
from morsegrid.image_io import GrayImage
from morsegrid.morse import build_gradient, build_morse_complex
from morsegrid.persistence import (
    INF,
    PersistenceDiagram,
    PersistencePair,
    betti_numbers,
    bottleneck_distance,
    compute_persistence,
    oracle_persistence,
)

from conftest import gray, ring
from oracles import brute_bottleneck, diagram_betti, sublevel_betti

images = arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 255))


def both(img):
    return diagram_of(img), oracle_persistence(build_complex(img))


def test_constant_image():
    D, O = both(GrayImage(np.full((4, 5), 13)))
    assert D.multiset() == O.multiset() == [(0, 13, INF)]
    assert D.pairs[0].creator == (0, 0) and D.pairs[0].destructor is None


def test_ring():
    D, O = both(ring())
    assert D.multiset() == O.multiset() == [(0, 0, INF), (1, 0, 255)]
    loop = D.in_dim(1)[0]
    assert cell_dim(loop.creator) == 1 and cell_dim(loop.destructor) == 2


def test_strip_elder_rule():
    D, O = both(gray([[0, 9, 2, 9, 4]]))
    assert D.multiset() == O.multiset() == [(0, 0, INF), (0, 2, 9), (0, 4, 9)]


def test_oracle_small_cases():
    assert oracle_persistence(build_complex(gray([[6]]))).multiset() == [(0, 6, INF)]
    O = oracle_persistence(build_complex(gray([[3, 8]])))
    assert O.multiset() == [(0, 3, INF)]
    assert O.multiset(keep_zero=True) == [(0, 3, INF), (0, 8, 8)]
    assert [p for p in O if p.zero_length][0].creator == (2, 0)


def test_oracle_size_bound():
    img = GrayImage(np.zeros((60, 60), dtype=np.uint8))
    with pytest.raises(OracleTooLarge):
        oracle_persistence(build_complex(img))
    oracle_persistence(build_complex(GrayImage(np.zeros((3, 3), dtype=np.uint8))), max_cells=25)


@settings(max_examples=200)
@given(images)
def test_morse_route_matches_oracle(values):
    D, O = both(GrayImage(values))
    assert D.multiset() == O.multiset()


@settings(max_examples=100)
@given(images)
def test_tiebreak_invariance(values):
    img = GrayImage(values)
    ms = {tb: diagram_of(img, tb).multiset() for tb in ("row", "column", "reverse")}
    assert ms["row"] == ms["column"] == ms["reverse"]


@settings(max_examples=100)
@given(images)
def test_diagram_structure(values):
    D = diagram_of(GrayImage(values))
    ess = D.essential()
    assert [(p.dimension) for p in ess] == [0]
    assert ess[0].birth == int(values.min())
    for p in D:
        assert p.dimension in (0, 1)
        assert cell_dim(p.creator) == p.dimension
        if not p.essential:
            assert p.birth <= p.death
            assert cell_dim(p.destructor) == p.dimension + 1
        if p.dimension == 0:
            assert p.birth >= ess[0].birth
    assert list(D.pairs) == sorted(D.pairs, key=PersistencePair.sort_key)


@settings(max_examples=40)
@given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.integers(0, 5)))
def test_betti_and_euler_at_every_level(values):
    ms = diagram_of(GrayImage(values)).multiset()
    for t in np.unique(values):
        betti, counts = sublevel_betti(values.astype(int), int(t))
        assert diagram_betti(ms, t) == betti
        b = diagram_betti(ms, t)
        assert b[0] - b[1] == counts[0] - counts[1] + counts[2]


def test_betti_numbers_of_images():
    for img in (ring(), GrayImage(np.full((3, 4), 2)), gray([[0, 9, 2, 9, 4]])):
        M = build_morse_complex(build_gradient(build_complex(img)))
        assert betti_numbers(M) == (1, 0)


def test_zero_length_pairs_are_retained_and_flagged():
    rng = np.random.default_rng(5)
    found = False
    for _ in range(200):
        D = diagram_of(GrayImage(rng.integers(0, 3, (5, 5))))
        z = [p for p in D if p.zero_length]
        found |= bool(z)
        assert len(D.visible()) == len(D) - len(z)
    assert found


def test_bottleneck_examples():
    D = diagram_of(ring())
    assert bottleneck_distance(D, D, 0) == 0 == bottleneck_distance(D, D, 1)
    one = PersistenceDiagram((PersistencePair(1, 10, 20, (1, 0), (1, 1)),))
    empty = PersistenceDiagram(())
    assert bottleneck_distance(one, empty, 1) == 5
    assert bottleneck_distance(empty, one, 1) == 5
    assert isinstance(bottleneck_distance(one, empty, 1), Fraction)


def test_bottleneck_essential_mismatch_is_infinite():
    a = PersistenceDiagram((PersistencePair(0, 1, INF, (0, 0)),))
    assert bottleneck_distance(a, PersistenceDiagram(()), 0) == math.inf


def test_constant_shift(rng):
    # dim 0: the essential classes sit 3 apart, so the distance is exactly 3;
    # dim 1: short bars may go to the diagonal for less, so only the bound holds
    for _ in range(30):
        v = rng.integers(0, 253, (rng.integers(2, 9), rng.integers(2, 9)))
        D1, D2 = diagram_of(GrayImage(v)), diagram_of(GrayImage(v + 3))
        assert bottleneck_distance(D1, D2, 0) == 3
        assert bottleneck_distance(D1, D2, 1) <= 3
    r = ring(5, border=10, center=200)
    assert bottleneck_distance(diagram_of(r), diagram_of(GrayImage(r.values.astype(int) + 3)), 1) == 3


def test_bottleneck_matches_brute_force():
    r = random.Random(11)
    for _ in range(200):
        def diag(n):
            pts = []
            for _ in range(n):
                b = r.randint(0, 12)
                pts.append((b, b + r.randint(1, 10)))
            return pts

        f1, f2 = diag(r.randint(0, 3)), diag(r.randint(0, 3))
        D1 = PersistenceDiagram(tuple(PersistencePair(1, b, d, (i, 0), (i, 1)) for i, (b, d) in enumerate(f1)))
        D2 = PersistenceDiagram(tuple(PersistencePair(1, b, d, (i, 0), (i, 1)) for i, (b, d) in enumerate(f2)))
        assert float(bottleneck_distance(D1, D2, 1)) == brute_bottleneck(f1, f2)


@settings(max_examples=60)
@given(arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8))), st.integers(1, 5), st.randoms())
def test_stability(values, eps, rand):
    noise = np.asarray([rand.randint(-eps, eps) for _ in range(values.size)]).reshape(values.shape)
    other = np.clip(values.astype(int) + noise, 0, 255)
    D1, D2 = diagram_of(GrayImage(values)), diagram_of(GrayImage(other))
    for dim in (0, 1):
        assert bottleneck_distance(D1, D2, dim) <= eps


def test_compute_persistence_on_worked_example():
    from test_morse import worked_example_complex

    D = compute_persistence(worked_example_complex())
    assert D.multiset() == [(0, 0, INF), (1, 14, INF), (1, 29, 30), (1, 31, INF), (1, 32, INF), (1, 35, INF), (1, 36, INF)]
