"""Dynamics of square PWA maps: fixed points, ROAs, homeomorphism, invariant sets.

All routines work on a :class:`~relu_pwa.marching.PwaFunction` (or on the
network that produced it when marching has to be redone, as in the
connected backward mode).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from . import lp
from .config import DEFAULT_CAPS, ResourceLimitError, resolve
from .geometry import (
    AffineMap,
    Polyhedron,
    PolyUnion,
    affine_preimage,
    bounding_box,
    chebyshev_center,
    contains_polyhedron,
    essential_hrep,
    intersect,
    invariance_check,
    merge_union,
    project,
    union_difference,
)
from .marching import PwaFunction, Region, backward_reach
from .network import ReluNetwork

__all__ = [
    "FixedPoint",
    "HomeoCertificate",
    "RoaResult",
    "InvariantSetResult",
    "SeedSynthesisError",
    "find_fixed_points",
    "seed_roa",
    "check_homeomorphism",
    "grow_roa",
    "erode",
    "predecessor_set",
    "control_invariant_set",
    "analysis_report",
]

log = logging.getLogger(__name__)


class SeedSynthesisError(RuntimeError):
    """No invariant seed set could be fitted inside the fixed point's region."""


@dataclass(frozen=True, eq=False)
class FixedPoint:
    point: np.ndarray
    region_index: int
    stable: bool
    spectral_radius: float
    interior: bool = True

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "region_index": self.region_index,
            "stable": self.stable,
            "spectral_radius": self.spectral_radius,
            "interior": self.interior,
        }


@dataclass(frozen=True)
class HomeoCertificate:
    is_homeomorphism: bool
    minor_signs: Optional[List[int]]
    failing_region: Optional[int] = None

    def __bool__(self):
        return self.is_homeomorphism

    def to_dict(self) -> dict:
        return {
            "is_homeomorphism": self.is_homeomorphism,
            "minor_signs": self.minor_signs,
            "failing_region": self.failing_region,
        }


@dataclass(frozen=True, eq=False)
class RoaResult:
    fixed_point: FixedPoint
    seed: Polyhedron
    steps: int
    roa: PolyUnion
    history: List[PolyUnion] = field(default_factory=list)
    region_counts_per_step: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fixed_point": self.fixed_point.to_dict(),
            "seed": self.seed.to_dict(),
            "steps": self.steps,
            "roa": self.roa.to_dict(),
            "history": [u.to_dict() for u in self.history],
            "region_counts_per_step": list(self.region_counts_per_step),
        }


class InvariantSetResult(NamedTuple):
    invariant: PolyUnion
    converged: bool
    iterations: int


def _require_square(pwa: PwaFunction):
    if pwa.regions and not pwa.is_square:
        raise ValueError(f"map from dimension {pwa.in_dim} to {pwa.out_dim} is not square")


# ---------------------------------------------------------------------------
# fixed points


def find_fixed_points(pwa: PwaFunction, tol=None, include_boundary: bool = False) -> List[FixedPoint]:
    """Solve ``(I - C_k) x = d_k`` per region and keep interior solutions.

    Regions with (near-)singular ``I - C_k`` are skipped.  Solutions that land
    on a region's boundary are dropped unless ``include_boundary`` is set, in
    which case they come back with ``interior=False``.
    """
    tol = resolve(tol)
    _require_square(pwa)
    out = []
    for k, region in enumerate(pwa.regions):
        C, d = region.map.matrix, region.map.offset
        M = np.eye(C.shape[0]) - C
        if np.linalg.cond(M) >= tol.kappa_max:
            continue
        x = np.linalg.solve(M, d)
        slack = region.poly.slack(x)[0]
        interior = bool(np.all(slack > tol.feas))
        if not interior and not (include_boundary and np.all(slack >= -tol.feas)):
            continue
        if not interior:
            log.warning("fixed point %s lies on the boundary of region %d", x, k)
        rho = float(np.max(np.abs(np.linalg.eigvals(C)))) if C.size else 0.0
        out.append(FixedPoint(x, k, rho < 1.0 - tol.stab, rho, interior))
    return out


# ---------------------------------------------------------------------------
# seed ROA


def _maximal_invariant_subset(A, b, C, tol, max_steps=200):
    """Largest subset of ``{y | A y <= b}`` invariant under ``y -> C y``.

    Adds the rows ``A C^j y <= b`` until a full round of new rows is
    redundant, which certifies invariance.
    """
    rows_A, rows_b = [A], [b]
    power = C.copy()
    for _ in range(max_steps):
        cur_A, cur_b = np.vstack(rows_A), np.concatenate(rows_b)
        new_A = A @ power
        needed = []
        for a, bi in zip(new_A, b):
            res = lp.maximize(a, cur_A, cur_b, tol)
            if not res.optimal or res.value > bi + tol.red:
                needed.append(True)
            else:
                needed.append(False)
        if not any(needed):
            return essential_hrep(Polyhedron(cur_A, cur_b), tol)
        mask = np.array(needed)
        rows_A.append(new_A[mask])
        rows_b.append(b[mask])
        power = power @ C
    raise SeedSynthesisError(f"invariant subset did not settle within {max_steps} steps")


def seed_roa(fp: FixedPoint, region: Region, tol=None, iterations: int = 20) -> Polyhedron:
    """Invariant polytope around a stable fixed point, inside its region.

    The candidate is a box in Lyapunov coordinates, ``|L (x - x*)|_inf <= c``
    with ``P = L^T L`` solving ``C^T P C - P = -I``.  The scale ``c`` is the
    largest one (bisection) keeping the box inside the region.  If the box is
    not invariant under the local linear map, it is shrunk to its maximal
    invariant subset.  The result is checked with :func:`invariance_check`.
    """
    tol = resolve(tol)
    if not fp.stable:
        raise ValueError("seed ROA needs a stable fixed point")
    C, d = region.map.matrix, region.map.offset
    n = C.shape[0]
    x0 = fp.point
    P = solve_discrete_lyapunov(C.T, np.eye(n))
    P = 0.5 * (P + P.T)
    L = np.linalg.cholesky(P).T
    A_unit = np.vstack([L, -L])

    def box(c):
        return Polyhedron(A_unit, c * np.ones(2 * n) + A_unit @ x0)

    bb = bounding_box(region.poly, tol)
    if bb is None:
        raise SeedSynthesisError("fixed point region is empty")
    corners = np.stack([bb[0], bb[1]])
    reach = float(np.max(np.linalg.norm(np.abs(corners - x0).max(axis=0))))
    lo, hi = 0.0, float(np.linalg.norm(L, 2)) * reach
    if contains_polyhedron(region.poly, box(hi), tol):
        lo = hi
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if contains_polyhedron(region.poly, box(mid), tol):
                lo = mid
            else:
                hi = mid
    if lo <= 0.0:
        raise SeedSynthesisError("no positive scale keeps the seed inside the region")
    seed = box(lo)
    local = AffineMap(C, d)
    if not invariance_check(seed, local, tol):
        shifted = _maximal_invariant_subset(A_unit, lo * np.ones(2 * n), C, tol)
        seed = Polyhedron(shifted.A, shifted.b + shifted.A @ x0)
    if not invariance_check(seed, local, tol):
        raise SeedSynthesisError("seed set failed the invariance check")
    return seed


# ---------------------------------------------------------------------------
# homeomorphism


def check_homeomorphism(pwa: PwaFunction, tol=None) -> HomeoCertificate:
    """Leading principal minors of every ``C_k`` must share one nonzero sign per order."""
    tol = resolve(tol)
    _require_square(pwa)
    signs = None
    for k, region in enumerate(pwa.regions):
        C = region.map.matrix
        minors = np.array([np.linalg.det(C[:r, :r]) for r in range(1, C.shape[0] + 1)])
        if np.any(np.abs(minors) <= tol.det):
            return HomeoCertificate(False, signs, k)
        s = [int(v) for v in np.sign(minors)]
        if signs is None:
            signs = s
        elif s != signs:
            return HomeoCertificate(False, signs, k)
    return HomeoCertificate(True, signs)


# ---------------------------------------------------------------------------
# backward iteration helpers


def _preimage_pieces(regions: Sequence[Region], targets: Sequence[Polyhedron], tol) -> List[Polyhedron]:
    out = []
    for region in regions:
        for t in targets:
            piece = intersect(region.poly, affine_preimage(t, region.map))
            cheb = chebyshev_center(piece, tol)
            if cheb is not None and cheb[1] > tol.interior:
                out.append(essential_hrep(piece, tol))
    return out


def grow_roa(
    net: ReluNetwork,
    pwa: PwaFunction,
    fp: FixedPoint,
    seed: Polyhedron,
    steps: int,
    use_connected: bool = False,
    certificate: Optional[HomeoCertificate] = None,
    concatenated: bool = False,
    merge: bool = True,
    tol=None,
    caps=DEFAULT_CAPS,
) -> RoaResult:
    """Grow the seed by ``steps`` backward reachability steps.

    The default iterates one-step preimages through the stored regions.
    ``use_connected`` re-marches each step from the fixed point and expands
    only regions meeting the preimage (needs a positive certificate).
    ``concatenated`` instead takes the preimage of the seed through the
    ``t``-step network for each ``t``, which is useful as a cross-check.
    """
    tol = resolve(tol)
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if use_connected and (certificate is None or not certificate.is_homeomorphism):
        raise ValueError("connected mode needs a positive homeomorphism certificate")
    current = PolyUnion([seed])
    history, counts = [current], []
    for t in range(1, steps + 1):
        if concatenated:
            res = backward_reach(net.concatenate(t), pwa.domain, [seed], full_dimensional=True, tol=tol, caps=caps)
            pieces = [p for u in res.sets for p in u]
            counts.append(res.regions_explored)
        elif use_connected:
            res = backward_reach(
                net,
                pwa.domain,
                list(current),
                connected_from=fp.point,
                certificate=certificate,
                full_dimensional=True,
                tol=tol,
                caps=caps,
            )
            pieces = [p for u in res.sets for p in u]
            counts.append(res.regions_explored)
        else:
            pieces = _preimage_pieces(pwa.regions, list(current), tol)
            counts.append(len(pwa.regions))
        if len(pieces) > caps.polys:
            raise ResourceLimitError(f"ROA union exceeded {caps.polys} polyhedra")
        current = merge_union(PolyUnion(pieces), tol, caps) if merge else PolyUnion(pieces)
        history.append(current)
    return RoaResult(fp, seed, steps, current, history, counts)


# ---------------------------------------------------------------------------
# predecessor and control-invariant sets


def erode(target: Polyhedron, disturbance: Polyhedron, tol=None) -> Polyhedron:
    """``{x | x + w in target for all w in disturbance}`` for a polytopic disturbance."""
    tol = resolve(tol)
    shift = np.empty(target.n_constraints)
    for i, a in enumerate(target.A):
        res = lp.maximize(a, disturbance.A, disturbance.b, tol)
        if not res.optimal:
            raise ValueError("disturbance set must be nonempty and bounded")
        shift[i] = res.value
    return Polyhedron(target.A, target.b - shift)


def _with_interior(polys, tol) -> List[Polyhedron]:
    out = []
    for p in polys:
        c = chebyshev_center(p, tol)
        if c is not None and c[1] > tol.interior:
            out.append(p)
    return out


def predecessor_set(
    pwa_control: PwaFunction,
    target: PolyUnion,
    admissible: PolyUnion,
    state_dim: Optional[int] = None,
    disturbance: Optional[Polyhedron] = None,
    merge: bool = True,
    tol=None,
    caps=DEFAULT_CAPS,
) -> PolyUnion:
    """States with an admissible input that steers into ``target`` in one step.

    ``pwa_control`` maps ``(x, u)`` to the next state.  With ``disturbance``,
    the target is first eroded so the step lands in it for every additive
    disturbance in the set.
    """
    tol = resolve(tol)
    n = state_dim if state_dim is not None else pwa_control.out_dim
    if pwa_control.out_dim is not None and pwa_control.out_dim != n:
        raise ValueError("the control map must output the state")
    targets = list(target)
    if disturbance is not None:
        targets = _with_interior([erode(t, disturbance, tol) for t in targets], tol)
    phi = PolyUnion(_preimage_pieces(pwa_control.regions, targets, tol))
    delta = union_difference(admissible, phi, tol, caps)
    sigma = union_difference(admissible, delta, tol, caps)
    pre = []
    for piece in sigma:
        proj = project(piece, range(n), tol, caps)
        pre.extend(_with_interior([proj], tol))
    result = PolyUnion(pre)
    return merge_union(result, tol, caps) if merge else result


def _lift(states: PolyUnion, input_dim: int) -> List[Polyhedron]:
    return [Polyhedron(np.hstack([p.A, np.zeros((p.n_constraints, input_dim))]), p.b) for p in states]


def control_invariant_set(
    pwa_control: PwaFunction,
    domain_xu: Polyhedron,
    state_dim: int,
    max_iters: int = 20,
    tol=None,
    caps=DEFAULT_CAPS,
) -> InvariantSetResult:
    """Iterate ``X_{i+1} = Pre(X_i)`` from the state projection of ``domain_xu``.

    Inputs are restricted to ``domain_xu`` with the state in ``X_i``, so the
    iterates are nested.  Convergence means both set differences between
    consecutive iterates are empty.
    """
    tol = resolve(tol)
    m = domain_xu.dim - state_dim
    if m < 0:
        raise ValueError("state_dim exceeds the domain dimension")
    current = PolyUnion(_with_interior([essential_hrep(project(domain_xu, range(state_dim), tol, caps), tol)], tol))
    for i in range(1, max_iters + 1):
        admissible = PolyUnion(_with_interior([intersect(domain_xu, q) for q in _lift(current, m)], tol))
        nxt = predecessor_set(pwa_control, current, admissible, state_dim, tol=tol, caps=caps)
        same = not union_difference(nxt, current, tol, caps).members and not union_difference(current, nxt, tol, caps).members
        current = nxt
        if same:
            return InvariantSetResult(current, True, i)
    return InvariantSetResult(current, False, max_iters)


def analysis_report(
    fixed_points: Sequence[FixedPoint] = (),
    certificate: Optional[HomeoCertificate] = None,
    roa: Optional[RoaResult] = None,
    invariant: Optional[InvariantSetResult] = None,
) -> dict:
    out: dict = {"fixed_points": [fp.to_dict() for fp in fixed_points]}
    if certificate is not None:
        out["homeomorphism"] = certificate.to_dict()
    if roa is not None:
        out["roa"] = roa.to_dict()
    if invariant is not None:
        out["invariant"] = {
            "set": invariant.invariant.to_dict(),
            "converged": invariant.converged,
            "iterations": invariant.iterations,
        }
    return out
