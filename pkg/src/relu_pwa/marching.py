"""Exact PWA decomposition of a ReLU network by breadth-first region marching.

Starting from the activation pattern of a seed point, each region's
essential facets are crossed one at a time to find the patterns of its
neighbours.  Only pattern keys are remembered, so regions can be streamed
out by :func:`march` and dropped by the caller.  Forward and backward
reachability are thin layers over the same loop.
"""
from __future__ import annotations

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import DEFAULT_CAPS, ResourceLimitError, resolve
from .geometry import (
    AffineMap,
    Halfspace,
    Polyhedron,
    PolyUnion,
    _duplicate_groups,
    _essential_mask,
    affine_image,
    affine_preimage,
    bounding_box,
    chebyshev_center,
    essential_hrep,
    intersect,
    normalize_rows,
)
from .network import ReluNetwork, pattern_from_str, pattern_key, pattern_to_str

__all__ = [
    "DOMAIN",
    "Region",
    "PwaFunction",
    "ReachResult",
    "SeedError",
    "NeighborInconsistencyError",
    "polyhedron_from_pattern",
    "neighbor_pattern",
    "march",
    "enumerate_regions",
    "forward_reach",
    "backward_reach",
]

log = logging.getLogger(__name__)

DOMAIN = "domain"
_SEED_MARGIN = 1e-7


class SeedError(ValueError):
    """No usable seed point could be found."""


class NeighborInconsistencyError(RuntimeError):
    """A computed neighbour pattern does not share the facet it was derived from."""


@dataclass(frozen=True, eq=False)
class Region:
    pattern: np.ndarray
    poly: Polyhedron
    map: AffineMap
    neighbor_constraints: Tuple[Tuple[Halfspace, Union[str, Tuple[int, ...]]], ...] = ()
    center: Optional[np.ndarray] = None
    radius: float = 0.0
    index: int = -1

    @property
    def key(self) -> bytes:
        return pattern_key(self.pattern)

    def neuron_facets(self) -> List[Tuple[Halfspace, Tuple[int, ...]]]:
        return [(h, o) for h, o in self.neighbor_constraints if o != DOMAIN]

    def to_dict(self) -> dict:
        return {
            "pattern": pattern_to_str(self.pattern),
            "A": self.poly.A.tolist(),
            "b": self.poly.b.tolist(),
            "C": self.map.matrix.tolist(),
            "d": self.map.offset.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict, index: int = -1) -> "Region":
        C = np.asarray(data["C"], dtype=float)
        A = np.asarray(data["A"], dtype=float).reshape(-1, C.shape[1])
        return cls(
            pattern=pattern_from_str(data["pattern"]),
            poly=Polyhedron(A, np.asarray(data["b"], dtype=float)),
            map=AffineMap(C, np.asarray(data["d"], dtype=float)),
            index=index,
        )


@dataclass(frozen=True, eq=False)
class PwaFunction:
    """``x -> C_k x + d_k`` on region ``k``; regions tessellate ``domain``."""

    domain: Polyhedron
    regions: List[Region]

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def in_dim(self) -> int:
        return self.domain.dim

    @property
    def out_dim(self) -> Optional[int]:
        return self.regions[0].map.out_dim if self.regions else None

    @property
    def is_square(self) -> bool:
        return self.out_dim == self.in_dim

    def membership(self, points, tol: float = 1e-9) -> np.ndarray:
        """Boolean matrix (n_points, n_regions) of region containment."""
        X = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((X.shape[0], len(self.regions)), dtype=bool)
        for k, r in enumerate(self.regions):
            out[:, k] = r.poly.contains(X, tol)
        return out

    def locate(self, points, tol: float = 1e-9) -> np.ndarray:
        """Index of the first region containing each point, ``-1`` if none."""
        M = self.membership(points, tol)
        idx = np.argmax(M, axis=1)
        return np.where(M.any(axis=1), idx, -1)

    def evaluate(self, points, tol: float = 1e-9) -> np.ndarray:
        X = np.atleast_2d(np.asarray(points, dtype=float))
        idx = self.locate(X, tol)
        if np.any(idx < 0):
            raise ValueError("some points lie outside every region")
        out = np.empty((X.shape[0], self.out_dim))
        for k in np.unique(idx):
            sel = idx == k
            out[sel] = self.regions[k].map(X[sel])
        return out

    def to_dict(self) -> dict:
        return {"domain": self.domain.to_dict(), "regions": [r.to_dict() for r in self.regions]}

    @classmethod
    def from_dict(cls, data: dict) -> "PwaFunction":
        domain = Polyhedron.from_dict(data["domain"])
        return cls(domain, [Region.from_dict(r, i) for i, r in enumerate(data["regions"])])


@dataclass(frozen=True, eq=False)
class ReachResult:
    sets: List[PolyUnion]
    status: str
    regions_explored: int
    witness: Optional[Region] = None
    witness_point: Optional[np.ndarray] = None
    witness_target: Optional[int] = None

    @property
    def early_terminated(self) -> bool:
        return self.status == "early_terminated"

    def to_dict(self) -> dict:
        out = {
            "sets": [u.to_dict() for u in self.sets],
            "status": self.status,
            "regions_explored": self.regions_explored,
        }
        if self.witness_point is not None:
            out["witness_point"] = self.witness_point.tolist()
            out["witness_target"] = self.witness_target
            out["witness_region"] = self.witness.to_dict()
        return out


# ---------------------------------------------------------------------------
# per-pattern construction


def _prepare_domain(domain: Polyhedron, tol) -> Polyhedron:
    A, b, degenerate = normalize_rows(domain.A, domain.b, tol)
    if np.any(degenerate & (b < -tol.feas)):
        raise ValueError("domain is empty")
    box = bounding_box(Polyhedron(A[~degenerate], b[~degenerate]), tol)
    if box is None:
        raise ValueError("domain is empty")
    if not (np.all(np.isfinite(box[0])) and np.all(np.isfinite(box[1]))):
        raise ValueError("domain must be bounded")
    return Polyhedron(A[~degenerate], b[~degenerate])


def _pattern_rows(net: ReluNetwork, bits, domain: Polyhedron, tol):
    """Deduplicated constraint rows of a pattern and the origin of each row.

    Neuron rows come first, then domain rows.  Returns ``None`` if a
    degenerate neuron constraint is infeasible, else ``(A, b, origins)``
    where each origin is :data:`DOMAIN` or a tuple of neuron indices.
    """
    _, _, A, b, degenerate = net.halfspace_arrays(bits, tol)
    if np.any(degenerate & (b < -tol.feas)):
        return None
    neurons = np.flatnonzero(~degenerate)
    rows_A = np.vstack([A[neurons], domain.A])
    rows_b = np.concatenate([b[neurons], domain.b])
    source = np.concatenate([neurons, np.full(domain.n_constraints, -1)])
    rep = _duplicate_groups(rows_A, rows_b, tol)
    kept = np.flatnonzero(rep == np.arange(rep.shape[0]))
    origins = []
    for k in kept:
        members = source[rep == k]
        origins.append(DOMAIN if np.any(members < 0) else tuple(int(m) for m in members))
    return rows_A[kept], rows_b[kept], origins


def polyhedron_from_pattern(net: ReluNetwork, bits, domain: Polyhedron, tol=None) -> Polyhedron:
    """All normalized neuron constraints of ``bits`` plus the domain, deduplicated.

    Degenerate neuron constraints are dropped when satisfied; an unsatisfied
    one yields :meth:`Polyhedron.empty`.  Rows are not reduced further.
    """
    tol = resolve(tol)
    dA, db, dz = normalize_rows(domain.A, domain.b, tol)
    rows = _pattern_rows(net, bits, Polyhedron(dA[~dz], db[~dz]), tol)
    if rows is None:
        return Polyhedron.empty(net.input_dim)
    return Polyhedron(rows[0], rows[1])


def _build_region(net: ReluNetwork, bits, domain: Polyhedron, tol) -> Optional[Region]:
    rows = _pattern_rows(net, bits, domain, tol)
    if rows is None:
        return None
    A, b, origins = rows
    cheb = chebyshev_center(Polyhedron(A, b), tol)
    if cheb is None or cheb[1] <= tol.interior:
        return None
    box = bounding_box(Polyhedron(A, b), tol)
    keep = _essential_mask(A, b, tol, box)
    idx = np.flatnonzero(keep)
    facets = tuple((Halfspace(A[i].copy(), float(b[i])), origins[i]) for i in idx)
    return Region(
        pattern=np.asarray(bits, dtype=np.uint8),
        poly=Polyhedron(A[idx], b[idx]),
        map=net.affine_map_for(bits),
        neighbor_constraints=facets,
        center=cheb[0],
        radius=cheb[1],
    )


def neighbor_pattern(net: ReluNetwork, bits, facet: Halfspace, tol=None) -> np.ndarray:
    """Pattern on the far side of ``facet`` (a non-domain essential facet)."""
    return net.neighbor_pattern(bits, facet.normal, facet.offset, tol)


def _check_shared_facet(net, new_bits, facet: Halfspace, domain, tol):
    rows = _pattern_rows(net, new_bits, domain, tol)
    if rows is None:
        raise NeighborInconsistencyError("neighbour pattern has an infeasible degenerate constraint")
    A, b, _ = rows
    target = np.append(-facet.normal, -facet.offset)
    H = np.column_stack([A, b])
    if not np.any(np.all(np.abs(H - target) <= tol.dup, axis=1)):
        raise NeighborInconsistencyError(
            f"neighbour pattern {pattern_to_str(new_bits)} lacks the reversed facet"
        )


def _neighbors(net, region: Region, domain, tol, validate) -> List[np.ndarray]:
    out = []
    for facet, origin in region.neighbor_constraints:
        if origin == DOMAIN:
            continue
        nb = net.neighbor_pattern(region.pattern, facet.normal, facet.offset, tol)
        if np.array_equal(nb, region.pattern):
            raise NeighborInconsistencyError("no neuron matched the facet being crossed")
        if validate:
            _check_shared_facet(net, nb, facet, domain, tol)
        out.append(nb)
    return out


# ---------------------------------------------------------------------------
# seeding


def _off_boundary(net, domain, x, tol) -> bool:
    if np.min(domain.slack(x)) <= tol.interior:
        return False
    pres = net.preactivations(x)
    return not pres or np.min(np.abs(np.concatenate(pres))) >= _SEED_MARGIN


def _choose_seed(net, domain, seed_point, rng, tol, caps) -> np.ndarray:
    if seed_point is not None:
        x = np.asarray(seed_point, dtype=float).reshape(-1)
        if x.shape[0] != net.input_dim:
            raise ValueError(f"seed point has dimension {x.shape[0]}, network expects {net.input_dim}")
        if not domain.contains(x):
            raise SeedError("seed point lies outside the domain")
        if _off_boundary(net, domain, x, tol):
            return x
        # Nudge within a growing ball so the seed stays near the caller's point.
        radius = 1e-6
        for _ in range(caps.seed_attempts):
            u = rng.normal(size=x.shape[0])
            y = x + radius * u / np.linalg.norm(u)
            if _off_boundary(net, domain, y, tol):
                log.info("seed point on a boundary; moved by %.1e", radius)
                return y
            radius *= 1.5
        raise SeedError(f"no usable seed near the given point after {caps.seed_attempts} attempts")
    lo, hi = bounding_box(domain, tol)
    for _ in range(caps.seed_attempts):
        x = rng.uniform(lo, hi)
        if _off_boundary(net, domain, x, tol):
            return x
    raise SeedError(f"no usable seed point after {caps.seed_attempts} attempts")


# ---------------------------------------------------------------------------
# the marching loop


def march(
    net: ReluNetwork,
    domain: Polyhedron,
    seed_point=None,
    *,
    tol=None,
    caps=DEFAULT_CAPS,
    seed: int = 0,
    workers: int = 1,
    expand: Optional[Callable[[Region], bool]] = None,
    validate: bool = False,
) -> Iterator[Region]:
    """Yield every region of ``net`` over ``domain`` exactly once, breadth first.

    ``expand`` decides per region whether its neighbours are queued; by
    default all are.  ``workers > 1`` builds batches of queued patterns in a
    thread pool; batches are taken from the front of the queue and results
    are consumed in queue order, so output order matches the serial loop.
    ``validate`` checks that every neighbour pattern contains the reversed
    facet it was derived from.
    """
    tol = resolve(tol)
    if domain.dim != net.input_dim:
        raise ValueError(f"domain dimension {domain.dim} != network input dimension {net.input_dim}")
    dom = _prepare_domain(domain, tol)
    rng = np.random.default_rng(seed)
    x0 = _choose_seed(net, dom, seed_point, rng, tol, caps)
    start = net.activation_pattern(x0)
    queue = deque([start])
    seen = {pattern_key(start)}
    count = 0
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    build = lambda bits: _build_region(net, bits, dom, tol)
    try:
        while queue:
            take = min(len(queue), 4 * workers) if pool else 1
            batch = [queue.popleft() for _ in range(take)]
            built = list(pool.map(build, batch)) if pool else [build(batch[0])]
            for region in built:
                if region is None:
                    continue
                if count >= caps.regions:
                    raise ResourceLimitError(f"region count exceeded cap {caps.regions}")
                region = replace(region, index=count)
                count += 1
                if expand is None or expand(region):
                    for nb in _neighbors(net, region, dom, tol, validate):
                        key = pattern_key(nb)
                        if key not in seen:
                            seen.add(key)
                            queue.append(nb)
                yield region
    finally:
        if pool is not None:
            pool.shutdown(wait=True)


def enumerate_regions(net: ReluNetwork, domain: Polyhedron, seed_point=None, **kwargs) -> PwaFunction:
    """Full PWA representation of ``net`` on ``domain``."""
    return PwaFunction(domain, list(march(net, domain, seed_point, **kwargs)))


def forward_reach(net: ReluNetwork, domain: Polyhedron, seed_point=None, **kwargs):
    """Return ``(pwa, image)`` with ``image`` the exact image of ``domain``."""
    tol = resolve(kwargs.get("tol"))
    caps = kwargs.get("caps", DEFAULT_CAPS)
    regions, images = [], []
    for region in march(net, domain, seed_point, **kwargs):
        regions.append(region)
        images.append(affine_image(region.poly, region.map, tol, caps))
    return PwaFunction(domain, regions), PolyUnion(images)


def _as_targets(targets) -> List[Polyhedron]:
    if isinstance(targets, Polyhedron):
        return [targets]
    if isinstance(targets, PolyUnion):
        return list(targets)
    return list(targets)


def backward_reach(
    net: ReluNetwork,
    domain: Polyhedron,
    targets: Union[Polyhedron, Sequence[Polyhedron]],
    *,
    early_stop: bool = False,
    connected_from=None,
    certificate=None,
    full_dimensional: bool = False,
    seed_point=None,
    **kwargs,
) -> ReachResult:
    """Preimage of each target within ``domain``, one union per target.

    With ``early_stop`` the search returns at the first region whose piece is
    nonempty, together with a witness point.  With ``connected_from`` the
    marching starts at that point and only expands regions that meet the
    preimage; this is exact only for homeomorphic networks, so a positive
    ``certificate`` is required.  ``full_dimensional`` drops pieces without
    interior from the returned unions.
    """
    tol = resolve(kwargs.get("tol"))
    targets = _as_targets(targets)
    for t in targets:
        if t.dim != net.output_dim:
            raise ValueError(f"target dimension {t.dim} != network output dimension {net.output_dim}")
    if connected_from is not None:
        if certificate is None or not getattr(certificate, "is_homeomorphism", False):
            raise ValueError("connected mode needs a positive homeomorphism certificate")
        seed_point = connected_from

    sets: List[List[Polyhedron]] = [[] for _ in targets]
    pending: dict = {}

    def visit(region: Region) -> bool:
        pieces = []
        for ti, t in enumerate(targets):
            piece = intersect(region.poly, affine_preimage(t, region.map))
            cheb = chebyshev_center(piece, tol)
            if cheb is not None:
                pieces.append((ti, piece, cheb))
        pending[region.index] = pieces
        return bool(pieces)

    expand = visit if connected_from is not None else None
    explored = 0
    for region in march(net, domain, seed_point, expand=expand, **kwargs):
        explored += 1
        pieces = pending.pop(region.index) if expand else (visit(region), pending.pop(region.index))[1]
        for ti, piece, (center, radius) in pieces:
            if early_stop:
                return ReachResult(
                    sets=[PolyUnion([essential_hrep(piece, tol)]) if i == ti else PolyUnion() for i in range(len(targets))],
                    status="early_terminated",
                    regions_explored=explored,
                    witness=region,
                    witness_point=center,
                    witness_target=ti,
                )
            if full_dimensional and radius <= tol.interior:
                continue
            sets[ti].append(essential_hrep(piece, tol))
    return ReachResult([PolyUnion(s) for s in sets], "complete", explored)
