"""Nested Cartesian quad-grid hierarchy, DG mesh, and FV subgrid indexing.

The hierarchy is a stack of uniform quad grids where level l+1 is obtained
from level l by splitting every cell into four children. The DG mesh lives
on one level; the finite-volume subgrid with matching degree-of-freedom
count lives log2(k+1) levels finer, so a degree-k DG cell is covered by
exactly (k+1) x (k+1) FV subcells.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class BoundaryKind(enum.Enum):
    PERIODIC = "periodic"
    SLIP = "slip"


@dataclass(frozen=True)
class Domain2D:
    x_min: float
    x_max: float
    z_min: float
    z_max: float

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        if not self.z_max > self.z_min:
            raise ValueError(f"z_max must exceed z_min, got [{self.z_min}, {self.z_max}]")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.z_max - self.z_min


@dataclass(frozen=True)
class CellIndex:
    level: int
    i: int  # column (x) index
    j: int  # row (z) index


@dataclass(frozen=True)
class Neighbor:
    """One side of a cell: an interior/periodic neighbor or a boundary tag."""

    kind: str  # "interior" | "periodic" | "boundary"
    cell: CellIndex | None = None
    tag: str | None = None


class GridHierarchy:
    """Uniform Cartesian grids from the coarse base (level 0) upward.

    Level l has (base_nx * 2**l) x (base_nz * 2**l) cells; spacings are
    derived from the domain so that dx_l * nx_l recovers the width exactly.
    Immutable after construction.
    """

    def __init__(self, domain: Domain2D, base_nx: int, base_nz: int, n_levels: int):
        if base_nx < 1 or base_nz < 1:
            raise ValueError(f"base grid must be at least 1x1, got {base_nx}x{base_nz}")
        if n_levels < 1:
            raise ValueError(f"need at least one level, got {n_levels}")
        self.domain = domain
        self.base_nx = base_nx
        self.base_nz = base_nz
        self.n_levels = n_levels
        self.nx = [base_nx * 2**l for l in range(n_levels)]
        self.nz = [base_nz * 2**l for l in range(n_levels)]
        self.dx = [domain.width / n for n in self.nx]
        self.dz = [domain.height / n for n in self.nz]

    def ncells(self, level: int) -> int:
        return self.nx[level] * self.nz[level]

    def cell_area(self, level: int) -> float:
        return self.dx[level] * self.dz[level]

    def cell_center(self, c: CellIndex) -> tuple[float, float]:
        x = self.domain.x_min + (c.i + 0.5) * self.dx[c.level]
        z = self.domain.z_min + (c.j + 0.5) * self.dz[c.level]
        return x, z

    def _check(self, c: CellIndex):
        if not 0 <= c.level < self.n_levels:
            raise IndexError(f"level {c.level} outside hierarchy of {self.n_levels} levels")
        if not (0 <= c.i < self.nx[c.level] and 0 <= c.j < self.nz[c.level]):
            raise IndexError(f"cell ({c.i}, {c.j}) outside level-{c.level} grid "
                             f"{self.nx[c.level]}x{self.nz[c.level]}")

    def children(self, c: CellIndex) -> tuple[CellIndex, ...]:
        """The four level-(l+1) cells covering c."""
        self._check(c)
        if c.level >= self.n_levels - 1:
            raise IndexError(f"cell on finest level {c.level} has no children")
        l = c.level + 1
        return tuple(
            CellIndex(l, 2 * c.i + di, 2 * c.j + dj) for dj in (0, 1) for di in (0, 1)
        )

    def parent(self, c: CellIndex) -> CellIndex:
        self._check(c)
        if c.level == 0:
            raise IndexError("level-0 cell has no parent")
        return CellIndex(c.level - 1, c.i // 2, c.j // 2)


@dataclass(frozen=True)
class SubgridMap:
    """Relates the DG mesh level to its finite-volume subgrid level.

    Each DG cell is covered by subcells_per_side**2 FV cells, giving the
    two discretizations the same number of degrees of freedom per component.
    """

    dg_level: int
    fv_level: int
    subcells_per_side: int  # k + 1

    @property
    def subcells_per_dg_cell(self) -> int:
        return self.subcells_per_side**2

    def subcells_of(self, i: int, j: int) -> list[tuple[int, int]]:
        """FV (i, j) index pairs covering DG cell (i, j), row-major."""
        p = self.subcells_per_side
        return [(p * i + di, p * j + dj) for dj in range(p) for di in range(p)]

    def dg_cell_of(self, fi: int, fj: int) -> tuple[int, int]:
        p = self.subcells_per_side
        return fi // p, fj // p


def build_hierarchy(
    domain: Domain2D, base_nx: int, base_nz: int, dg_refine_level: int, k: int
) -> tuple[GridHierarchy, SubgridMap]:
    """Build the grid stack for a degree-k DG mesh at the given refinement.

    Requires k+1 to be a power of two so that the FV subgrid nests into the
    binary coarsening of the hierarchy. The returned hierarchy has
    dg_refine_level + log2(k+1) + 1 grids; the finest is the FV subgrid.
    """
    if dg_refine_level < 0:
        raise ValueError(f"dg_refine_level must be nonnegative, got {dg_refine_level}")
    p = k + 1
    if p < 1 or (p & (p - 1)) != 0:
        raise ValueError(
            f"k + 1 must be a power of two for nested coarsening, got k = {k}"
        )
    extra = int(math.log2(p))
    n_levels = dg_refine_level + extra + 1
    hierarchy = GridHierarchy(domain, base_nx, base_nz, n_levels)
    subgrid = SubgridMap(
        dg_level=dg_refine_level, fv_level=dg_refine_level + extra, subcells_per_side=p
    )
    return hierarchy, subgrid


def neighbors(
    h: GridHierarchy,
    c: CellIndex,
    bc: tuple[BoundaryKind, BoundaryKind, BoundaryKind, BoundaryKind],
) -> tuple[Neighbor, Neighbor, Neighbor, Neighbor]:
    """Neighbors on the four sides (west, east, south, north).

    bc gives the boundary kind per side in the same order. A periodic side
    wraps to the opposite edge of the grid; a slip side yields a boundary
    tag instead of a neighbor.
    """
    h._check(c)
    nx, nz = h.nx[c.level], h.nz[c.level]
    west, east, south, north = bc

    def side(di: int, dj: int, kind: BoundaryKind) -> Neighbor:
        i, j = c.i + di, c.j + dj
        if 0 <= i < nx and 0 <= j < nz:
            return Neighbor("interior", CellIndex(c.level, i, j))
        if kind is BoundaryKind.PERIODIC:
            return Neighbor("periodic", CellIndex(c.level, i % nx, j % nz))
        return Neighbor("boundary", tag=kind.value)

    return (
        side(-1, 0, west),
        side(+1, 0, east),
        side(0, -1, south),
        side(0, +1, north),
    )
