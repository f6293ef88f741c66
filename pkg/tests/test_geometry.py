import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relu_pwa.config import DEFAULT_TOL, Caps, ResourceLimitError
from relu_pwa.geometry import (
    AffineMap,
    Polyhedron,
    PolyUnion,
    affine_image,
    affine_preimage,
    bounding_box,
    bounding_box_prefilter,
    chebyshev_center,
    contains_polyhedron,
    essential_hrep,
    intersect,
    invariance_check,
    merge_union,
    project,
    remove_duplicates,
    union_difference,
    vertices_2d,
)

from helpers import lift_feasible, vertex_enumeration_facets


def interval(lo, hi):
    return Polyhedron.from_box([lo], [hi])


def as_interval(p):
    lo, hi = bounding_box(p)
    return float(lo[0]), float(hi[0])


def random_polygon(rng, extra=8):
    """Box [-2,2]^2 plus random cuts at distance 0.3..2.5 from the origin."""
    ang = rng.uniform(0, 2 * np.pi, size=extra)
    A = np.vstack([np.vstack([np.eye(2), -np.eye(2)]), np.column_stack([np.cos(ang), np.sin(ang)])])
    b = np.concatenate([2 * np.ones(4), rng.uniform(0.3, 2.5, size=extra)])
    perm = rng.permutation(A.shape[0])
    return Polyhedron(A[perm], b[perm])


def row_set(A, b, digits=7):
    return {tuple(np.round(np.append(a, bi), digits)) for a, bi in zip(A, b)}


# -- essential H-representation ----------------------------------------------


def test_essential_interval_example():
    p = Polyhedron([[1.0], [1.0], [-1.0]], [1.0, 2.0, 1.0])
    e = essential_hrep(p)
    assert row_set(e.A, e.b) == {(1.0, 1.0), (-1.0, 1.0)}


def test_prefilter_removes_far_cut():
    p = Polyhedron(np.vstack([np.eye(2), -np.eye(2), [[1.0, 1.0]]]), [1, 1, 1, 1, 10])
    reduced, removed = bounding_box_prefilter(p)
    assert removed == [4]
    assert reduced.n_constraints == 4


def test_essential_empty_returns_sentinel():
    e = essential_hrep(interval(1, 0))
    assert e.n_constraints == 1 and not e.A.any() and e.b[0] < 0
    assert e.is_empty()


def test_duplicates_and_scaled_rows_collapse():
    p = Polyhedron([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -3.0]], [1, 2, 1, 1, 3])
    e = essential_hrep(p)
    assert e.n_constraints == 4
    assert remove_duplicates(p.normalized()).n_constraints == 4


def test_essential_matches_vertex_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = random_polygon(rng)
        pn = p.normalized()
        expected = vertex_enumeration_facets(pn.A, pn.b)
        e = essential_hrep(p)
        assert row_set(e.A, e.b) == row_set(pn.A[expected], pn.b[expected])


def test_zero_row_handling():
    ok = Polyhedron([[0.0, 0.0], [1.0, 0.0]], [1.0, 1.0])
    assert essential_hrep(ok).n_constraints == 1
    bad = Polyhedron([[0.0, 0.0], [1.0, 0.0]], [-1.0, 1.0])
    assert essential_hrep(bad).is_empty()


# -- elementary sets -----------------------------------------------------------


def test_chebyshev_center_of_square():
    x, r = chebyshev_center(Polyhedron.from_box([0, 0], [2, 2]))
    np.testing.assert_allclose(x, [1, 1], atol=1e-9)
    assert r == pytest.approx(1.0)
    assert chebyshev_center(interval(1, 0)) is None


def test_bounding_box_unbounded():
    lo, hi = bounding_box(Polyhedron([[1.0, 0.0]], [1.0]))
    assert hi[0] == 1 and np.isinf(lo[0]) and np.isinf(hi[1])
    assert bounding_box(interval(1, 0)) is None


def test_contains_and_slack():
    sq = Polyhedron.from_box([0, 0], [1, 1])
    assert sq.contains([0.5, 0.5])
    np.testing.assert_array_equal(sq.contains([[0.5, 0.5], [2, 0]]), [True, False])
    assert sq.slack([[0.5, 0.5]]).shape == (1, 4)


def test_dict_round_trip():
    sq = Polyhedron.from_box([0, 0], [1, 1])
    again = Polyhedron.from_dict(sq.to_dict())
    np.testing.assert_array_equal(again.A, sq.A)
    u = PolyUnion([sq, sq])
    assert len(PolyUnion.from_dict(u.to_dict())) == 2


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        intersect(interval(0, 1), Polyhedron.from_box([0, 0], [1, 1]))
    with pytest.raises(ValueError):
        Polyhedron([[1.0, 0.0]], [1.0, 2.0])


# -- maps ----------------------------------------------------------------------


def test_preimage_and_image_of_scaling():
    m = AffineMap([[2.0]], [1.0])
    pre = affine_preimage(interval(1, 3), m)
    assert as_interval(pre) == pytest.approx((0, 1))
    img = affine_image(interval(0, 1), m)
    assert as_interval(img) == pytest.approx((1, 3))


def test_singular_image_is_a_segment():
    m = AffineMap([[1.0, 1.0], [0.0, 0.0]], [0.0, 0.5])
    img = affine_image(Polyhedron.from_box([0, 0], [1, 1]), m)
    lo, hi = bounding_box(img)
    np.testing.assert_allclose(lo, [0, 0.5], atol=1e-9)
    np.testing.assert_allclose(hi, [2, 0.5], atol=1e-9)


def test_image_to_lower_dimension():
    m = AffineMap([[1.0, -1.0]], [0.0])
    img = affine_image(Polyhedron.from_box([0, 0], [1, 1]), m)
    assert as_interval(img) == pytest.approx((-1, 1))


def test_image_vertices_match_mapped_vertices():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = random_polygon(rng)
        C = rng.normal(size=(2, 2))
        d = rng.normal(size=2)
        img = essential_hrep(affine_image(p, AffineMap(C, d)))
        mapped = vertices_2d(p) @ C.T + d
        got = vertices_2d(img)
        assert got.shape == mapped.shape
        for v in mapped:
            assert np.min(np.linalg.norm(got - v, axis=1)) < 1e-6


# -- projection ------------------------------------------------------------------


def test_projection_example():
    tri = Polyhedron([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])
    assert as_interval(project(tri, [0])) == pytest.approx((0, 1))


def test_projection_matches_lift_feasibility():
    rng = np.random.default_rng(3)
    for trial in range(4):
        dim = 3 + trial % 2
        k = 2
        n_rows = 12
        A = rng.normal(size=(n_rows, dim))
        b = rng.uniform(0.5, 1.5, size=n_rows)
        A = np.vstack([A, np.eye(dim), -np.eye(dim)])
        b = np.concatenate([b, 2 * np.ones(2 * dim)])
        keep = list(range(k))
        proj = project(Polyhedron(A, b), keep)
        X = rng.uniform(-2.2, 2.2, size=(1000, k))
        slack = proj.slack(X)
        band = np.min(np.abs(slack), axis=1) < 1e-6
        for x, inside, skip in zip(X, proj.contains(X), band):
            if skip:
                continue
            assert inside == lift_feasible(A, b, keep, x)


def test_projection_keep_order_and_validation():
    box = Polyhedron.from_box([0, 1, 2], [1, 2, 3])
    p = project(box, [2, 0])
    lo, hi = bounding_box(p)
    np.testing.assert_allclose(lo, [2, 0], atol=1e-9)
    np.testing.assert_allclose(hi, [3, 1], atol=1e-9)
    with pytest.raises(ValueError):
        project(box, [3])


def test_projection_row_cap():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(60, 3))
    A[:30, 2] = np.abs(A[:30, 2]) + 0.1
    A[30:, 2] = -np.abs(A[30:, 2]) - 0.1
    with pytest.raises(ResourceLimitError):
        project(Polyhedron(A, np.ones(60)), [0, 1], caps=Caps(projection_rows=100))


# -- unions ----------------------------------------------------------------------


def test_interval_difference():
    d = union_difference(PolyUnion([interval(0, 2)]), PolyUnion([interval(1, 3)]))
    assert len(d) == 1 and as_interval(d[0]) == pytest.approx((0, 1))
    assert len(union_difference(PolyUnion([interval(0, 1)]), PolyUnion([interval(-1, 2)]))) == 0


def test_difference_matches_sampling_partition():
    rng = np.random.default_rng(21)
    for _ in range(10):
        a = PolyUnion([random_polygon(rng, 4) for _ in range(2)])
        b = PolyUnion([Polyhedron.from_box(c - 0.8, c + 0.8) for c in rng.uniform(-1.5, 1.5, size=(3, 2))])
        d = union_difference(a, b)
        X = rng.uniform(-2.5, 2.5, size=(3000, 2))
        near = np.zeros(len(X), dtype=bool)
        for p in list(a) + list(b) + list(d):
            pn = p.normalized()
            near |= np.min(np.abs(pn.slack(X)), axis=1) < 1e-7
        expected = a.contains(X) & ~b.contains(X)
        got = d.contains(X)
        assert not np.any((expected != got) & ~near)


def test_merge_adjacent_intervals():
    m = merge_union(PolyUnion([interval(0, 1), interval(1, 2)]))
    assert len(m) == 1 and as_interval(m[0]) == pytest.approx((0, 2))


def test_merge_keeps_nonconvex_union():
    L = PolyUnion([Polyhedron.from_box([0, 0], [2, 1]), Polyhedron.from_box([0, 1], [1, 2])])
    assert len(merge_union(L)) == 2
    squares = PolyUnion([Polyhedron.from_box([0, 0], [1, 1]), Polyhedron.from_box([1, 0], [2, 1])])
    assert len(merge_union(squares)) == 1


def test_containment():
    assert contains_polyhedron(interval(0, 3), interval(1, 2))
    assert not contains_polyhedron(interval(0, 1.5), interval(1, 2))


# -- invariance --------------------------------------------------------------------


def test_invariance_check():
    s = interval(-1, 1)
    assert invariance_check(s, AffineMap([[0.5]], [0.0]))
    assert not invariance_check(s, AffineMap([[2.0]], [0.0]))
    with pytest.raises(ValueError):
        invariance_check(Polyhedron([[1.0]], [1.0]), AffineMap([[0.5]], [0.0]))


def test_vertices_of_square():
    v = vertices_2d(Polyhedron.from_box([0, 0], [1, 1]))
    assert v.shape == (4, 2)
    with pytest.raises(ValueError):
        vertices_2d(interval(0, 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_essential_rows_are_needed_and_set_unchanged(seed):
    rng = np.random.default_rng(seed)
    p = random_polygon(rng, 6)
    e = essential_hrep(p)
    X = rng.uniform(-2.5, 2.5, size=(500, 2))
    np.testing.assert_array_equal(p.contains(X, tol=0), e.contains(X, tol=0))
    for i in range(e.n_constraints):
        rest = Polyhedron(np.delete(e.A, i, axis=0), np.delete(e.b, i))
        x, _ = chebyshev_center(intersect(rest, Polyhedron(-e.A[i:i + 1], -e.b[i:i + 1] - 1e-6)), DEFAULT_TOL) or (None, 0)
        assert x is not None
