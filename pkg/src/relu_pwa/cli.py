"""Command-line front end.

Every command loads a network from JSON, builds the domain from
``--domain-box`` or ``--domain``, runs one pipeline and writes the result
as JSON.  ``verify`` exits 0 when the unsafe set is unreachable (SAFE),
1 when a counterexample exists (UNSAFE) and 2 on any error.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .analysis import (
    analysis_report,
    check_homeomorphism,
    control_invariant_set,
    find_fixed_points,
    grow_roa,
    seed_roa,
)
from .config import DEFAULT_CAPS, DEFAULT_TOL
from .geometry import Polyhedron, PolyUnion, bounding_box, chebyshev_center
from .marching import backward_reach, enumerate_regions, forward_reach
from .network import ReluNetwork
from .svg import render_svg

EXIT_SAFE, EXIT_UNSAFE, EXIT_ERROR = 0, 1, 2

COMMANDS = ("decompose", "forward", "backward", "verify", "fixed-points", "roa", "invariant", "check-homeo")


def parse_box(text: str) -> Polyhedron:
    """``"lo,hi;lo,hi"`` -> axis-aligned box; bounds must be finite with lo < hi."""
    lo, hi = [], []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            a, b = (float(v) for v in part.split(","))
        except ValueError:
            raise ValueError(f"bad box interval {part!r}; expected 'lo,hi'") from None
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"box interval {part!r} must be finite with lo < hi")
        lo.append(a)
        hi.append(b)
    if not lo:
        raise ValueError("empty domain box")
    return Polyhedron.from_box(lo, hi)


def parse_point(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def load_sets(path) -> List[Polyhedron]:
    """A polytope ``{"A", "b"}`` or a union ``{"polys": [...]}`` from JSON."""
    data = json.loads(Path(path).read_text())
    if "polys" in data:
        return list(PolyUnion.from_dict(data))
    return [Polyhedron.from_dict(data)]


def _domain(args) -> Polyhedron:
    if args.domain_box and args.domain:
        raise ValueError("give either --domain-box or --domain, not both")
    if args.domain_box:
        return parse_box(args.domain_box)
    if args.domain:
        return load_sets(args.domain)[0]
    raise ValueError("a domain is required (--domain-box or --domain)")


def _targets(args) -> List[Polyhedron]:
    if not args.target:
        raise ValueError(f"{args.command} needs at least one --target file")
    out = []
    for path in args.target:
        out.extend(load_sets(path))
    return out


def _engine_kwargs(args) -> dict:
    tol = DEFAULT_TOL.with_(feas=args.tol_feas)
    caps = replace(DEFAULT_CAPS, regions=args.region_cap)
    return {"tol": tol, "caps": caps, "seed": args.seed, "workers": args.parallel}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relu-pwa", description="Exact PWA analysis of ReLU networks.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--network", required=True, help="network JSON file")
    p.add_argument("--domain-box", help='input box as "lo,hi;lo,hi;..."')
    p.add_argument("--domain", help="input polytope JSON file")
    p.add_argument("--target", action="append", help="target polytope or union JSON (repeatable)")
    p.add_argument("--steps", type=int, default=1, help="ROA steps or invariant-set iteration limit")
    p.add_argument("--early-stop", action="store_true", help="stop at the first nonempty preimage piece")
    p.add_argument("--connected", action="store_true", help="connected backward marching (homeomorphic nets)")
    p.add_argument("--from", dest="from_point", help='seed point "x1,x2,..." for --connected backward')
    p.add_argument("--state-dim", type=int, help="state dimension for invariant (inputs follow states)")
    p.add_argument("--parallel", type=int, default=1, help="worker threads for marching")
    p.add_argument("--out", help="result JSON path (default: stdout)")
    p.add_argument("--svg", help="write a 2-D SVG plot here")
    p.add_argument("--seed", type=int, default=0, help="random seed for seed-point sampling")
    p.add_argument("--tol-feas", type=float, default=DEFAULT_TOL.feas)
    p.add_argument("--region-cap", type=int, default=DEFAULT_CAPS.regions)
    return p


def _emit(args, payload: dict):
    text = json.dumps(payload)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)


def _svg(args, obj, bounds=None):
    if args.svg:
        Path(args.svg).write_text(render_svg(obj, bounds))


def _box_bounds(domain: Polyhedron):
    lo, hi = bounding_box(domain)
    return [(lo[0], hi[0]), (lo[1], hi[1])]


def _run(args) -> int:
    if args.parallel < 1:
        raise ValueError("--parallel must be at least 1")
    net = ReluNetwork.load(args.network)
    domain = _domain(args)
    kw = _engine_kwargs(args)
    tol = kw["tol"]
    start = time.perf_counter()
    explored = 0
    code = EXIT_SAFE

    if args.command == "decompose":
        pwa = enumerate_regions(net, domain, **kw)
        explored = len(pwa)
        payload = pwa.to_dict()
        _svg(args, pwa)
    elif args.command == "forward":
        pwa, image = forward_reach(net, domain, **kw)
        explored = len(pwa)
        payload = {"pwa": pwa.to_dict(), "image": image.to_dict(), "regions_explored": explored}
        _svg(args, image)
    elif args.command in ("backward", "verify"):
        targets = _targets(args)
        extra = {}
        if args.connected:
            if not args.from_point:
                raise ValueError("--connected needs --from with a point mapping into the target")
            cert = check_homeomorphism(enumerate_regions(net, domain, **kw), tol)
            extra = {"connected_from": parse_point(args.from_point), "certificate": cert}
        res = backward_reach(net, domain, targets, early_stop=args.early_stop, **extra, **kw)
        explored = res.regions_explored
        payload = res.to_dict()
        if args.command == "verify":
            unsafe = res.early_terminated or any(len(u) for u in res.sets)
            code = EXIT_UNSAFE if unsafe else EXIT_SAFE
            payload["verdict"] = "UNSAFE" if unsafe else "SAFE"
            if unsafe and res.witness_point is None:
                piece = next(u[0] for u in res.sets if len(u))
                payload["witness_point"] = chebyshev_center(piece, tol)[0].tolist()
        _svg(args, PolyUnion([p for u in res.sets for p in u]), _box_bounds(domain) if domain.dim == 2 else None)
    elif args.command == "fixed-points":
        pwa = enumerate_regions(net, domain, **kw)
        explored = len(pwa)
        payload = analysis_report(find_fixed_points(pwa, tol))
    elif args.command == "check-homeo":
        pwa = enumerate_regions(net, domain, **kw)
        explored = len(pwa)
        payload = analysis_report(certificate=check_homeomorphism(pwa, tol))
    elif args.command == "roa":
        pwa = enumerate_regions(net, domain, **kw)
        explored = len(pwa)
        stable = [fp for fp in find_fixed_points(pwa, tol) if fp.stable]
        if not stable:
            raise ValueError("no stable interior fixed point found")
        fp = stable[0]
        seed = seed_roa(fp, pwa.regions[fp.region_index], tol)
        cert = check_homeomorphism(pwa, tol) if args.connected else None
        roa = grow_roa(net, pwa, fp, seed, args.steps, use_connected=args.connected, certificate=cert, tol=tol, caps=kw["caps"])
        payload = analysis_report(stable, cert, roa)
        _svg(args, roa.roa, _box_bounds(domain) if domain.dim == 2 else None)
    elif args.command == "invariant":
        if args.state_dim is None:
            raise ValueError("invariant needs --state-dim")
        pwa = enumerate_regions(net, domain, **kw)
        explored = len(pwa)
        inv = control_invariant_set(pwa, domain, args.state_dim, max_iters=args.steps, tol=tol, caps=kw["caps"])
        payload = analysis_report(invariant=inv)
        if args.state_dim == 2:
            _svg(args, inv.invariant, _box_bounds(domain))
    else:  # pragma: no cover - argparse restricts the choices
        raise ValueError(f"unknown command {args.command}")

    elapsed = time.perf_counter() - start
    _emit(args, payload)
    print(f"regions_explored: {explored}", file=sys.stderr if not args.out else sys.stdout)
    print(f"wall_time: {elapsed:.3f} s", file=sys.stderr if not args.out else sys.stdout)
    return code


_NUMERIC_VALUED = ("--domain-box", "--from")


def _join_numeric_values(argv: List[str]) -> List[str]:
    """Glue ``--domain-box -1,1`` into ``--domain-box=-1,1`` so argparse
    does not read a leading minus as an option."""
    out, i = [], 0
    while i < len(argv):
        if argv[i] in _NUMERIC_VALUED and i + 1 < len(argv):
            out.append(f"{argv[i]}={argv[i + 1]}")
            i += 2
        else:
            out.append(argv[i])
            i += 1
    return out


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_numeric_values(argv))
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_SAFE
    try:
        return _run(args)
    except Exception as exc:  # every failure maps to the error exit code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
