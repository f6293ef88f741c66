"""Library-wide numerical tolerances and resource caps."""
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    """Tolerances shared by the LP kernel, the geometry layer and the marcher.

    Every public operation takes an optional ``tol`` argument; ``None`` means
    :data:`DEFAULT_TOL`.
    """

    feas: float = 1e-8        # primal feasibility of LP points
    obj: float = 1e-7         # objective agreement
    dup: float = 1e-7         # component-wise equality of normalized constraints
    red: float = 1e-8         # redundancy margin in the essential-constraint LP
    norm: float = 1e-9        # ||a|| below this is a degenerate (zero) normal
    interior: float = 1e-9    # Chebyshev radius below this counts as no interior
    kappa_max: float = 1e10   # condition number cut-off for "invertible"
    stab: float = 1e-9        # spectral radius margin for stability
    det: float = 1e-12        # |det| below this is treated as zero

    def with_(self, **changes) -> "Tolerances":
        return replace(self, **changes)


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Caps:
    """Resource limits; exceeding one raises :class:`ResourceLimitError`."""

    regions: int = 1_000_000
    projection_rows: int = 10_000
    polys: int = 50_000
    seed_attempts: int = 100


DEFAULT_CAPS = Caps()


def resolve(tol):
    return DEFAULT_TOL if tol is None else tol


class ResourceLimitError(RuntimeError):
    """A configured cap on regions, polyhedra or constraint rows was exceeded."""
