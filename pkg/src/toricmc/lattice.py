"""Lattice graphs for the toric code: vertices, links, stars and plaquettes.

Spins live on the links of the lattice.  A star collects all links incident
to a vertex, a plaquette is a closed cycle of links around an elementary
face.  Four geometries are supported (square, triangular, honeycomb, cubic),
each with periodic or open boundaries.  On the cubic lattice the plaquettes
are the four-link faces of the cubes, not the twelve-link cubes.

All ids are dense, 0-based and deterministic: building the same lattice
twice yields identical id assignments.  Cell coordinates and per-link
displacement vectors are kept in integer unit-cell units so that winding
numbers of percolating clusters can be detected exactly (a closed walk
accumulates a displacement that is a multiple of the lattice period in
each direction).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigurationError

LATTICE_TYPES = ("square", "triangular", "honeycomb", "cubic")
BOUNDARY_TYPES = ("periodic", "open")

# Per unit cell: directed link templates (sublattice_from, cell_delta, sublattice_to).
_CELL_LINKS = {
    "square": [(0, (1, 0), 0), (0, (0, 1), 0)],
    "triangular": [(0, (1, 0), 0), (0, (0, 1), 0), (0, (-1, 1), 0)],
    # honeycomb: sublattice 0 = A, 1 = B; B connects to A of the same cell
    # and to the A sites one cell over in +x and +y.
    "honeycomb": [(0, (0, 0), 1), (1, (1, 0), 0), (1, (0, 1), 0)],
    "cubic": [(0, (1, 0, 0), 0), (0, (0, 1, 0), 0), (0, (0, 0, 1), 0)],
}

# Per unit cell: plaquette templates as cycles of (cell_offset, direction)
# referencing the directed links above by their owner cell.
_CELL_PLAQS = {
    "square": [
        [((0, 0), 0), ((1, 0), 1), ((0, 1), 0), ((0, 0), 1)],
    ],
    "triangular": [
        # up and down triangles of the cell (x, y)
        [((0, 0), 0), ((1, 0), 2), ((0, 0), 1)],
        [((1, 0), 2), ((0, 1), 0), ((1, 0), 1)],
    ],
    "honeycomb": [
        [((0, 0), 1), ((0, 0), 2), ((0, 1), 0), ((0, 1), 1), ((1, 0), 2), ((1, 0), 0)],
    ],
    "cubic": [
        [((0, 0, 0), 0), ((1, 0, 0), 1), ((0, 1, 0), 0), ((0, 0, 0), 1)],  # xy face
        [((0, 0, 0), 0), ((1, 0, 0), 2), ((0, 0, 1), 0), ((0, 0, 0), 2)],  # xz face
        [((0, 0, 0), 1), ((0, 1, 0), 2), ((0, 0, 1), 1), ((0, 0, 0), 2)],  # yz face
    ],
}

_N_SUBLATTICES = {"square": 1, "triangular": 1, "honeycomb": 2, "cubic": 1}


@dataclass(frozen=True)
class Vertex:
    id: int
    cell: tuple
    sublattice: int


@dataclass(frozen=True)
class Link:
    id: int
    u: int
    v: int
    # geometric displacement from u to v in unit-cell coordinates; for a
    # wrapping link this is the true step, not the coordinate difference
    displacement: tuple


@dataclass(frozen=True)
class Lattice:
    """Immutable lattice graph; safe to share between chains."""

    lattice_type: str
    boundaries: str
    L: int
    dim: int
    vertices: list
    links: list
    stars: list           # per vertex: incident link ids
    plaquettes: list      # per plaquette: link ids forming a closed cycle
    winding_directions: list  # lattice periods in cell coordinates ([] if open)
    plaq_type: list = field(repr=False, default_factory=list)
    plaq_anchor: list = field(repr=False, default_factory=list)
    # per plaquette: owner-cell offset (from the anchor) of each member link,
    # aligned with `plaquettes`; used for winding detection on the dual graph
    plaq_link_offsets: list = field(repr=False, default_factory=list)
    link_plaquettes: list = field(repr=False, default_factory=list)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_links(self):
        return len(self.links)

    @property
    def n_plaquettes(self):
        return len(self.plaquettes)


@dataclass(frozen=True)
class FmLoopPair:
    """A closed contractible loop of links and its first half.

    The half/full loop products over link spins feed the loop order
    parameter that distinguishes the deconfined from the trivial phase.
    """

    half_loop: list
    full_loop: list
    perimeter: int


def build_lattice(lattice_type: str, L: int, boundaries: str) -> Lattice:
    """Construct the lattice graph for the given geometry and size.

    L counts unit cells per dimension; L >= 2 is required so that stars and
    plaquettes are well formed.
    """
    if lattice_type not in LATTICE_TYPES:
        raise ConfigurationError(
            f"unknown lattice_type {lattice_type!r}; expected one of {LATTICE_TYPES}")
    if boundaries not in BOUNDARY_TYPES:
        raise ConfigurationError(
            f"unknown boundaries {boundaries!r}; expected one of {BOUNDARY_TYPES}")
    if not isinstance(L, int) or L < 2:
        raise ConfigurationError(f"system size L must be an integer >= 2, got {L!r}")

    dim = 3 if lattice_type == "cubic" else 2
    n_sub = _N_SUBLATTICES[lattice_type]
    periodic = boundaries == "periodic"

    cells = _all_cells(L, dim)
    cell_index = {c: i for i, c in enumerate(cells)}

    vertices = []
    for c in cells:
        for s in range(n_sub):
            vertices.append(Vertex(id=len(vertices), cell=c, sublattice=s))

    def vid(cell, sub):
        return cell_index[cell] * n_sub + sub

    links = []
    link_of = {}  # (cell, direction) -> link id
    for c in cells:
        for d, (sub_from, delta, sub_to) in enumerate(_CELL_LINKS[lattice_type]):
            target, wrapped = _shift_cell(c, delta, L)
            if wrapped and not periodic:
                continue
            lk = Link(id=len(links), u=vid(c, sub_from), v=vid(target, sub_to),
                      displacement=delta)
            link_of[(c, d)] = lk.id
            links.append(lk)

    stars = [[] for _ in vertices]
    for lk in links:
        stars[lk.u].append(lk.id)
        stars[lk.v].append(lk.id)

    plaquettes = []
    plaq_type = []
    plaq_anchor = []
    plaq_link_offsets = []
    for c in cells:
        for t, template in enumerate(_CELL_PLAQS[lattice_type]):
            member_ids = []
            offsets = []
            for offset, d in template:
                owner, wrapped = _shift_cell(c, offset, L)
                if wrapped and not periodic:
                    member_ids = None
                    break
                lid = link_of.get((owner, d))
                if lid is None:
                    member_ids = None
                    break
                member_ids.append(lid)
                offsets.append(offset)
            if member_ids is None:
                continue
            plaquettes.append(member_ids)
            plaq_type.append(t)
            plaq_anchor.append(c)
            plaq_link_offsets.append(offsets)

    link_plaquettes = [[] for _ in links]
    for p, member_ids in enumerate(plaquettes):
        for lid in member_ids:
            link_plaquettes[lid].append(p)

    if periodic:
        winding = [tuple(L if i == k else 0 for i in range(dim)) for k in range(dim)]
    else:
        winding = []

    return Lattice(
        lattice_type=lattice_type, boundaries=boundaries, L=L, dim=dim,
        vertices=vertices, links=links, stars=stars, plaquettes=plaquettes,
        winding_directions=winding, plaq_type=plaq_type, plaq_anchor=plaq_anchor,
        plaq_link_offsets=plaq_link_offsets, link_plaquettes=link_plaquettes)


def build_fm_loops(lattice: Lattice, loop_scale: int) -> FmLoopPair:
    """Build the loop pair for the half/full loop order parameter.

    The full loop is the boundary of a loop_scale x loop_scale block of
    plaquettes anchored at the origin (on the z = 0 plane for the cubic
    lattice); the half loop is a connected sub-path covering half of it.
    """
    if loop_scale < 1:
        raise ConfigurationError(f"loop_scale must be >= 1, got {loop_scale}")
    if 2 * loop_scale > lattice.L:
        raise ConfigurationError(
            f"loop of scale {loop_scale} does not fit on L={lattice.L} "
            "(need loop_scale <= L/2)")

    block = _block_plaquettes(lattice, loop_scale)
    counts = {}
    for p in block:
        for lid in lattice.plaquettes[p]:
            counts[lid] = counts.get(lid, 0) + 1
    boundary = sorted(lid for lid, n in counts.items() if n == 1)
    full = _order_cycle(lattice, boundary)
    half = full[: (len(full) + 1) // 2]
    return FmLoopPair(half_loop=half, full_loop=full, perimeter=len(full))


def _all_cells(L, dim):
    if dim == 2:
        return [(x, y) for y in range(L) for x in range(L)]
    return [(x, y, z) for z in range(L) for y in range(L) for x in range(L)]


def _shift_cell(cell, delta, L):
    """Shift a cell by delta with wraparound; report whether it wrapped."""
    out = []
    wrapped = False
    for c, d in zip(cell, delta):
        t = c + d
        if t < 0 or t >= L:
            wrapped = True
            t %= L
        out.append(t)
    return tuple(out), wrapped


def _block_plaquettes(lattice, R):
    """Plaquette ids of the R x R block of faces anchored at the origin."""
    ids = []
    for p in range(lattice.n_plaquettes):
        a = lattice.plaq_anchor[p]
        if lattice.dim == 3:
            # xy faces (template 0) in the z = 0 plane
            if lattice.plaq_type[p] != 0 or a[2] != 0:
                continue
        if all(0 <= a[k] < R for k in range(2)):
            ids.append(p)
    return ids


def _order_cycle(lattice, link_ids):
    """Order a set of links forming a simple cycle by walking shared vertices."""
    incident = {}
    for lid in link_ids:
        lk = lattice.links[lid]
        incident.setdefault(lk.u, []).append(lid)
        incident.setdefault(lk.v, []).append(lid)
    for lids in incident.values():
        if len(lids) != 2:
            raise ConfigurationError(
                "loop boundary is not a simple cycle (degenerate block size)")
    start = min(link_ids)
    ordered = [start]
    vertex = lattice.links[start].v
    while True:
        a, b = incident[vertex]
        nxt = b if a == ordered[-1] else a
        if nxt == start:
            break
        ordered.append(nxt)
        lk = lattice.links[nxt]
        vertex = lk.v if lk.u == vertex else lk.u
    if len(ordered) != len(link_ids):
        raise ConfigurationError("loop boundary is not a single cycle")
    return ordered
