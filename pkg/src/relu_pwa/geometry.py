"""Polyhedra in H-representation and the set operations built on them.

A :class:`Polyhedron` is ``{x | A x <= b}``.  Rows are kept in the order the
caller supplied; operations that prune rows (duplicate removal, redundancy
removal, projection) always keep the lower-indexed survivor so results are
deterministic.  Unions of polyhedra are plain lists wrapped in
:class:`PolyUnion`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import lp
from .config import DEFAULT_CAPS, ResourceLimitError, resolve

__all__ = [
    "Halfspace",
    "Polyhedron",
    "PolyUnion",
    "AffineMap",
    "normalize_rows",
    "remove_duplicates",
    "essential_hrep",
    "bounding_box",
    "bounding_box_prefilter",
    "chebyshev_center",
    "intersect",
    "affine_image",
    "affine_preimage",
    "project",
    "union_difference",
    "merge_union",
    "invariance_check",
    "contains_polyhedron",
    "vertices_2d",
]


@dataclass(frozen=True)
class Halfspace:
    normal: np.ndarray
    offset: float

    def __iter__(self):
        return iter((self.normal, self.offset))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """The set ``{x | A @ x <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_box(cls, lo, hi) -> "Polyhedron":
        lo = np.asarray(lo, dtype=float).reshape(-1)
        hi = np.asarray(hi, dtype=float).reshape(-1)
        n = lo.shape[0]
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))

    @classmethod
    def empty(cls, dim: int) -> "Polyhedron":
        """Sentinel for the empty set: the single row ``0 @ x <= -1``."""
        return cls(np.zeros((1, dim)), np.array([-1.0]))

    @classmethod
    def universe(cls, dim: int) -> "Polyhedron":
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.A.shape[0]

    def halfspaces(self) -> List[Halfspace]:
        return [Halfspace(a.copy(), float(bi)) for a, bi in zip(self.A, self.b)]

    def slack(self, points) -> np.ndarray:
        """``b - A x`` for each row of ``points``; shape (n_points, n_constraints)."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        return self.b[None, :] - X @ self.A.T

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        X = np.asarray(points, dtype=float)
        single = X.ndim == 1
        s = self.slack(X)
        inside = np.all(s >= -tol, axis=1) if s.shape[1] else np.ones(s.shape[0], bool)
        return bool(inside[0]) if single else inside

    def is_empty(self, tol=None) -> bool:
        return lp.feasible(self.A, self.b, tol) is None

    def has_interior(self, tol=None) -> bool:
        tol = resolve(tol)
        c = chebyshev_center(self, tol)
        return c is not None and c[1] > tol.interior

    def normalized(self, tol=None) -> "Polyhedron":
        A, b, _ = normalize_rows(self.A, self.b, tol)
        return Polyhedron(A, b)

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, data: dict, dim: Optional[int] = None) -> "Polyhedron":
        A = np.asarray(data["A"], dtype=float)
        if A.size == 0:
            A = A.reshape(0, dim if dim is not None else 0)
        return cls(A, np.asarray(data["b"], dtype=float))

    def __repr__(self):
        return f"Polyhedron(dim={self.dim}, n_constraints={self.n_constraints})"


@dataclass(frozen=True, eq=False)
class PolyUnion:
    members: List[Polyhedron] = field(default_factory=list)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __getitem__(self, i):
        return self.members[i]

    def contains(self, points, tol: float = 1e-9) -> np.ndarray:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(X.shape[0], dtype=bool)
        for p in self.members:
            out |= p.contains(X, tol)
        return out

    def to_dict(self) -> dict:
        return {"polys": [p.to_dict() for p in self.members]}

    @classmethod
    def from_dict(cls, data: dict) -> "PolyUnion":
        return cls([Polyhedron.from_dict(p) for p in data["polys"]])


@dataclass(frozen=True, eq=False)
class AffineMap:
    """``x -> matrix @ x + offset``."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        d = np.asarray(self.offset, dtype=float).reshape(-1)
        if C.shape[0] != d.shape[0]:
            raise ValueError("matrix rows and offset length differ")
        object.__setattr__(self, "matrix", C)
        object.__setattr__(self, "offset", d)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.matrix @ x + self.offset
        return x @ self.matrix.T + self.offset

    @property
    def in_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def out_dim(self) -> int:
        return self.matrix.shape[0]


# ---------------------------------------------------------------------------
# row-level helpers


def normalize_rows(A, b, tol=None):
    """Scale each row to unit normal.

    Returns ``(A, b, degenerate)``; degenerate rows (``||a|| <= tol.norm``)
    get ``a = 0`` and keep their offset.
    """
    tol = resolve(tol)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    norms = np.linalg.norm(A, axis=1)
    degenerate = norms <= tol.norm
    scale = np.where(degenerate, 1.0, norms)
    An = A / scale[:, None]
    An[degenerate] = 0.0
    return An, b / scale, degenerate


def _duplicate_groups(A, b, tol):
    """Map each row to the lowest-indexed row equal to it within ``tol.dup``."""
    M = A.shape[0]
    rep = np.arange(M)
    if M < 2:
        return rep
    H = np.column_stack([A, b])
    close = np.all(np.abs(H[:, None, :] - H[None, :, :]) <= tol.dup, axis=2)
    for j in range(M):
        i = int(np.argmax(close[j, : j + 1]))
        rep[j] = rep[i] if i < j else j
    return rep


def _drop_degenerate(A, b, tol):
    """Remove zero rows; returns ``None`` if one of them is infeasible."""
    norms = np.linalg.norm(A, axis=1)
    zero = norms <= tol.norm
    if np.any(b[zero] < -tol.feas):
        return None
    return A[~zero], b[~zero]


def remove_duplicates(poly: Polyhedron, tol=None) -> Polyhedron:
    """Drop rows equal (component-wise within ``tol.dup``) to an earlier row.

    Rows are expected to be normalized already.
    """
    tol = resolve(tol)
    rep = _duplicate_groups(poly.A, poly.b, tol)
    keep = rep == np.arange(rep.shape[0])
    return Polyhedron(poly.A[keep], poly.b[keep])


def chebyshev_center(poly: Polyhedron, tol=None, radius_cap: float = 1e6):
    """Centre and radius of the largest inscribed ball, or ``None`` if empty.

    The radius is capped at ``radius_cap`` so unbounded sets stay solvable.
    """
    tol = resolve(tol)
    A, b = poly.A, poly.b
    n = poly.dim
    norms = np.linalg.norm(A, axis=1)
    A_aux = np.zeros((A.shape[0] + 1, n + 1))
    A_aux[:-1, :n] = A
    A_aux[:-1, n] = norms
    A_aux[-1, n] = 1.0
    b_aux = np.append(b, radius_cap)
    obj = np.zeros(n + 1)
    obj[n] = 1.0
    out = lp.maximize(obj, A_aux, b_aux, tol)
    if not out.optimal:
        return None
    r = out.point[n]
    if r < -tol.feas:
        return None
    return out.point[:n], float(r)


def bounding_box(poly: Polyhedron, tol=None):
    """Axis-aligned bounds from ``2 n`` LPs; ``None`` if the set is empty.

    Unbounded directions come back as ``+/- inf``.
    """
    n = poly.dim
    lo = np.empty(n)
    hi = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = 1.0
        up = lp.maximize(e, poly.A, poly.b, tol)
        if up.status is lp.LpStatus.INFEASIBLE:
            return None
        hi[k] = up.value if up.optimal else np.inf
        down = lp.maximize(-e, poly.A, poly.b, tol)
        lo[k] = -down.value if down.optimal else -np.inf
    return lo, hi


def _box_max(A, lo, hi):
    """Max of each row of ``A @ x`` over the box ``[lo, hi]``."""
    with np.errstate(invalid="ignore"):
        up = np.where(A > 0, A * hi, 0.0) + np.where(A < 0, A * lo, 0.0)
    up = np.where(A == 0, 0.0, up)
    return up.sum(axis=1)


def _box_redundant(A, b, lo, hi, tol):
    return _box_max(A, lo, hi) < b - tol.red


def bounding_box_prefilter(poly: Polyhedron, tol=None) -> Tuple[Polyhedron, List[int]]:
    """Remove rows that cannot be active anywhere on the bounding box.

    A row whose maximum over the box is strictly below its offset is never
    active on the polyhedron, hence redundant.  Returns the reduced polyhedron
    and the indices of the removed rows.
    """
    tol = resolve(tol)
    box = bounding_box(poly, tol)
    if box is None:
        return poly, []
    red = _box_redundant(poly.A, poly.b, box[0], box[1], tol)
    return Polyhedron(poly.A[~red], poly.b[~red]), [int(i) for i in np.flatnonzero(red)]


def _essential_mask(A, b, tol, box=None, candidates=None) -> np.ndarray:
    """Sequential single-row redundancy test over a nonempty set.

    ``box`` (lo, hi) enables the bounding-box prefilter.  Only indices in
    ``candidates`` are LP-tested; the rest are kept as-is.
    """
    M = A.shape[0]
    keep = np.ones(M, dtype=bool)
    if box is not None:
        keep &= ~_box_redundant(A, b, box[0], box[1], tol)
    order = range(M) if candidates is None else candidates
    for i in order:
        if not keep[i]:
            continue
        keep[i] = False
        out = lp.maximize(A[i], A[keep], b[keep], tol)
        if out.status is lp.LpStatus.UNBOUNDED or (out.optimal and out.value > b[i] + tol.red):
            keep[i] = True
        elif out.status is lp.LpStatus.INFEASIBLE:
            raise lp.LpNumericalError("redundancy LP infeasible on a nonempty polyhedron")
    return keep


def essential_hrep(poly: Polyhedron, tol=None, prefilter: bool = True) -> Polyhedron:
    """Minimal H-representation: every remaining row is essential.

    Rows are normalized, zero rows and duplicates dropped, then each row is
    tested by maximizing its normal over the remaining rows.  Returns
    :meth:`Polyhedron.empty` when the set is empty.
    """
    tol = resolve(tol)
    A, b, _ = normalize_rows(poly.A, poly.b, tol)
    kept = _drop_degenerate(A, b, tol)
    if kept is None:
        return Polyhedron.empty(poly.dim)
    A, b = kept
    if lp.feasible(A, b, tol) is None:
        return Polyhedron.empty(poly.dim)
    rep = _duplicate_groups(A, b, tol)
    uniq = rep == np.arange(rep.shape[0])
    A, b = A[uniq], b[uniq]
    box = None
    if prefilter and A.shape[0] > 2 * poly.dim:
        box = bounding_box(Polyhedron(A, b), tol)
    keep = _essential_mask(A, b, tol, box)
    return Polyhedron(A[keep], b[keep])


# ---------------------------------------------------------------------------
# set operations


def intersect(p: Polyhedron, q: Polyhedron) -> Polyhedron:
    if p.dim != q.dim:
        raise ValueError(f"dimension mismatch: {p.dim} vs {q.dim}")
    return Polyhedron(np.vstack([p.A, q.A]), np.concatenate([p.b, q.b]))


def affine_preimage(poly_out: Polyhedron, amap: AffineMap) -> Polyhedron:
    """``{x | A (C x + d) <= b}``."""
    if amap.out_dim != poly_out.dim:
        raise ValueError(f"map output dimension {amap.out_dim} != polyhedron dimension {poly_out.dim}")
    A = poly_out.A @ amap.matrix
    b = poly_out.b - poly_out.A @ amap.offset
    return Polyhedron(A, b)


def affine_image(poly: Polyhedron, amap: AffineMap, tol=None, caps=DEFAULT_CAPS) -> Polyhedron:
    """Image of ``poly`` under ``amap``.

    Invertible square maps use the closed form ``{y | A C^-1 y <= b + A C^-1 d}``;
    anything else projects the lifted set ``{(x, y) | A x <= b, y = C x + d}``.
    """
    tol = resolve(tol)
    C, d = amap.matrix, amap.offset
    if C.shape[1] != poly.dim:
        raise ValueError(f"map input dimension {C.shape[1]} != polyhedron dimension {poly.dim}")
    n, m = poly.dim, C.shape[0]
    if n == m and np.linalg.cond(C) < tol.kappa_max:
        ACi = np.linalg.solve(C.T, poly.A.T).T
        A, b, _ = normalize_rows(ACi, poly.b + ACi @ d, tol)
        return Polyhedron(A, b)
    Z = np.zeros((poly.n_constraints, m))
    I = np.eye(m)
    lifted_A = np.vstack([np.hstack([poly.A, Z]), np.hstack([-C, I]), np.hstack([C, -I])])
    lifted_b = np.concatenate([poly.b, d, -d])
    return project(Polyhedron(lifted_A, lifted_b), range(n, n + m), tol, caps)


def _fm_step(A, b, j, tol):
    col = A[:, j]
    eps = tol.norm
    pos = col > eps
    neg = col < -eps
    zer = ~(pos | neg)
    P = A[pos] / col[pos, None]
    bp = b[pos] / col[pos]
    N = A[neg] / -col[neg, None]
    bn = b[neg] / -col[neg]
    combo_A = (P[:, None, :] + N[None, :, :]).reshape(-1, A.shape[1])
    combo_b = (bp[:, None] + bn[None, :]).reshape(-1)
    new_A = np.vstack([A[zer], combo_A])
    new_b = np.concatenate([b[zer], combo_b])
    return np.delete(new_A, j, axis=1), new_b


def project(poly: Polyhedron, keep_dims: Iterable[int], tol=None, caps=DEFAULT_CAPS) -> Polyhedron:
    """Fourier-Motzkin projection onto ``keep_dims`` (in the given order).

    Dimensions are eliminated one at a time; after each elimination the rows
    are normalized, deduplicated and reduced to an essential set.
    """
    tol = resolve(tol)
    keep = list(keep_dims)
    if not keep or len(set(keep)) != len(keep) or min(keep) < 0 or max(keep) >= poly.dim:
        raise ValueError(f"invalid keep_dims {keep} for dimension {poly.dim}")
    cur = essential_hrep(poly, tol)
    if cur.n_constraints == 1 and not cur.A.any() and cur.b[0] < 0:
        return Polyhedron.empty(len(keep))
    A, b = cur.A, cur.b
    dims = list(range(poly.dim))
    for d in [d for d in range(poly.dim) if d not in keep]:
        j = dims.index(d)
        col = A[:, j]
        n_rows = int(np.sum(np.abs(col) <= tol.norm)) + int(np.sum(col > tol.norm)) * int(np.sum(col < -tol.norm))
        if n_rows > caps.projection_rows:
            raise ResourceLimitError(f"projection needs {n_rows} rows (cap {caps.projection_rows})")
        A, b = _fm_step(A, b, j, tol)
        dims.pop(j)
        reduced = essential_hrep(Polyhedron(A, b), tol)
        A, b = reduced.A, reduced.b
    order = [dims.index(d) for d in keep]
    return Polyhedron(A[:, order], b)


def contains_polyhedron(outer: Polyhedron, inner: Polyhedron, tol=None) -> bool:
    """True iff ``inner`` is a subset of ``outer`` (one LP per row of ``outer``)."""
    tol = resolve(tol)
    for a, bi in zip(outer.A, outer.b):
        out = lp.maximize(a, inner.A, inner.b, tol)
        if out.status is lp.LpStatus.INFEASIBLE:
            return True
        if out.status is lp.LpStatus.UNBOUNDED or out.value > bi + tol.feas * (1.0 + abs(bi)):
            return False
    return True


def _subtract(p: Polyhedron, q: Polyhedron, tol) -> List[Polyhedron]:
    """Closure of ``p \\ q`` as a list of polyhedra with nonempty interior."""
    both = intersect(p, q)
    c = chebyshev_center(both, tol)
    if c is None or c[1] <= tol.interior:
        return [p]
    qe = essential_hrep(q, tol)
    pieces = []
    for i in range(qe.n_constraints):
        a, bi = qe.A[i], qe.b[i]
        A = np.vstack([p.A, qe.A[:i], -a[None, :]])
        b = np.concatenate([p.b, qe.b[:i], [-bi]])
        piece = Polyhedron(A, b)
        c = chebyshev_center(piece, tol)
        if c is not None and c[1] > tol.interior:
            pieces.append(essential_hrep(piece, tol))
    return pieces


def union_difference(a: PolyUnion, b: PolyUnion, tol=None, caps=DEFAULT_CAPS) -> PolyUnion:
    """Closure of ``a \\ b``, as polyhedra with nonempty interior.

    Members of ``b`` are subtracted in order, each one splitting the current
    pieces along its facets in row order.
    """
    tol = resolve(tol)
    dims = {p.dim for p in a} | {q.dim for q in b}
    if len(dims) > 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")
    result: List[Polyhedron] = []
    for p in a:
        pieces = [p]
        for q in b:
            nxt = []
            for piece in pieces:
                nxt.extend(_subtract(piece, q, tol))
            pieces = nxt
            if len(pieces) + len(result) > caps.polys:
                raise ResourceLimitError(f"set difference exceeded {caps.polys} polyhedra")
            if not pieces:
                break
        result.extend(pieces)
    return PolyUnion(result)


def _share_normal(p: Polyhedron, q: Polyhedron, tol) -> bool:
    if p.n_constraints == 0 or q.n_constraints == 0:
        return False
    G = p.A @ q.A.T
    return bool(np.any(np.abs(np.abs(G) - 1.0) <= tol.dup))


def _envelope(p: Polyhedron, q: Polyhedron, tol) -> Polyhedron:
    rows_A, rows_b = [], []
    for src, other in ((p, q), (q, p)):
        for a, bi in zip(src.A, src.b):
            out = lp.maximize(a, other.A, other.b, tol)
            if out.optimal and out.value <= bi + tol.dup:
                rows_A.append(a)
                rows_b.append(bi)
    if not rows_A:
        return Polyhedron.universe(p.dim)
    return Polyhedron(np.array(rows_A), np.array(rows_b))


def merge_union(u: PolyUnion, tol=None, caps=DEFAULT_CAPS) -> PolyUnion:
    """Greedily replace pairs whose union is convex by that union.

    A pair is merged only when its envelope (rows of each member valid for
    the other) minus the pair is empty, i.e. the envelope equals the union.
    """
    tol = resolve(tol)
    members = [essential_hrep(m, tol) for m in u]
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(members):
            j = i + 1
            while j < len(members):
                p, q = members[i], members[j]
                if _share_normal(p, q, tol):
                    env = _envelope(p, q, tol)
                    if env.n_constraints and not union_difference(PolyUnion([env]), PolyUnion([p, q]), tol, caps).members:
                        members[i] = essential_hrep(env, tol)
                        del members[j]
                        changed = True
                        j = i + 1
                        continue
                j += 1
            i += 1
    return PolyUnion(members)


def invariance_check(s: Polyhedron, amap: AffineMap, tol=None) -> bool:
    """True iff the image of ``s`` under ``amap`` lies inside ``s``."""
    tol = resolve(tol)
    if amap.in_dim != s.dim or amap.out_dim != s.dim:
        raise ValueError("invariance check needs a square map on the set's space")
    box = bounding_box(s, tol)
    if box is None:
        return True
    if not (np.all(np.isfinite(box[0])) and np.all(np.isfinite(box[1]))):
        raise ValueError("invariance check requires a bounded set")
    C, d = amap.matrix, amap.offset
    for a, bi in zip(s.A, s.b):
        out = lp.maximize(a @ C, s.A, s.b, tol)
        if out.value + a @ d > bi + tol.feas:
            return False
    return True


def vertices_2d(poly: Polyhedron, tol=None) -> np.ndarray:
    """Vertices of a bounded 2-D polygon in counter-clockwise order."""
    tol = resolve(tol)
    if poly.dim != 2:
        raise ValueError(f"vertices_2d needs a 2-D polyhedron, got dimension {poly.dim}")
    A, b = poly.A, poly.b
    pts = []
    for i in range(A.shape[0]):
        for j in range(i + 1, A.shape[0]):
            M = A[[i, j]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            x = np.linalg.solve(M, b[[i, j]])
            if np.all(A @ x <= b + 1e-7 * (1.0 + np.abs(b))):
                pts.append(x)
    if not pts:
        return np.zeros((0, 2))
    P = np.unique(np.round(np.array(pts), 10), axis=0)
    c = P.mean(axis=0)
    ang = np.arctan2(P[:, 1] - c[1], P[:, 0] - c[0])
    return P[np.argsort(ang)]
