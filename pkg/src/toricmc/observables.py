"""Estimators measured on the worldline configuration.

Snapshot observables (anyon counts, string number, the percolation family,
loop products) are evaluated on the equal-time tau = 0 spin slice, which is
exactly what gets exported to snapshot files.  Bulk diagonal observables
(sigma along the diagonal axis, the diagonal stabilizer, diagonal energy
terms) are imaginary-time averages of the cached worldline integrals, and
off-diagonal operators use the standard kink-count estimators

    <sum_c B_c> = <n_interaction> / (beta g)      (per cell after /N)
    <sum_l s_l> = <n_field> / (beta g).

Susceptibilities and the half/full loop ratio are functionals of whole
series and are assembled in post-processing from the raw primitives
(M = int sum_l sigma_l dtau, kink counts, loop products) recorded here.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError
from .lattice import FmLoopPair, Lattice
from .worldline import WorldlineConfig

OBSERVABLE_NAMES = (
    "anyon_count",
    "anyon_density",
    "delta",
    "energy",
    "energy_h",
    "energy_lmbda",
    "energy_J",
    "energy_mu",
    "fredenhagen_marcu",
    "largest_cluster",
    "percolation_probability",
    "percolation_strength",
    "plaquette_percolation_probability",
    "plaquette_z",
    "sigma_x",
    "sigma_z",
    "sigma_x_susceptibility",
    "sigma_z_susceptibility",
    "staggered_imaginary_times",
    "star_x",
    "string_number",
)

#: observables that need the tau = 0 spin snapshot
SNAPSHOT_OBSERVABLES = frozenset({
    "anyon_count", "anyon_density", "fredenhagen_marcu", "largest_cluster",
    "percolation_probability", "percolation_strength",
    "plaquette_percolation_probability", "string_number",
})

#: observables whose value is a functional of the whole series
FUNCTIONAL_OBSERVABLES = frozenset({
    "fredenhagen_marcu", "sigma_x_susceptibility", "sigma_z_susceptibility",
})


def validate_observable_names(names):
    unknown = [n for n in names if n not in OBSERVABLE_NAMES]
    if unknown:
        raise ConfigurationError(
            f"unknown observables {unknown}; valid names are: "
            + ", ".join(OBSERVABLE_NAMES))


def take_snapshot(config: WorldlineConfig) -> np.ndarray:
    """The per-link +-1 spins at tau = 0 in the simulation basis."""
    return np.array(config.base_spin, dtype=np.int8)


def anyon_stats(snapshot, lattice: Lattice, basis: str):
    """Count of violated diagonal stabilizers and their density.

    e-anyons on stars in the x basis, m-anyons on plaquettes in the z
    basis; the density is per star (plaquette) respectively.
    """
    cells = lattice.stars if basis == "x" else lattice.plaquettes
    count = 0
    for cell in cells:
        prod = 1
        for l in cell:
            prod *= snapshot[l]
        if prod < 0:
            count += 1
    return count, count / len(cells)


def string_and_field(snapshot, config: WorldlineConfig):
    """Number of spin-down links at tau = 0, and the time-averaged field.

    The second value is the per-link diagonal magnetization
    (1/(beta N_l)) int sum_l sigma_l dtau.
    """
    string_number = int(np.count_nonzero(snapshot < 0))
    sigma_diag = math.fsum(config.I_link) / (config.beta * config.n_links)
    return string_number, sigma_diag


def stabilizer_estimators(config: WorldlineConfig):
    """(star_x, plaquette_z, delta): stabilizer expectation values.

    The diagonal one is a time average, the off-diagonal one a kink-count
    estimator; the latter is undefined (NaN) when its coupling is zero.
    delta = star_x - plaquette_z in either basis.
    """
    diag = math.fsum(config.I_cell) / (config.beta * config.n_diag_cells)
    g = config.g_kink_cell
    if g > 0.0:
        offdiag = config.n_interaction / (config.beta * g * config.n_kink_cells)
    else:
        offdiag = math.nan
    if config.basis == "x":
        star_x, plaquette_z = diag, offdiag
    else:
        star_x, plaquette_z = offdiag, diag
    return star_x, plaquette_z, star_x - plaquette_z


def energy_estimators(config: WorldlineConfig):
    """(energy, energy_mu, energy_h, energy_J, energy_lmbda).

    Diagonal terms are the time-averaged action components divided by
    beta; each off-diagonal term is -n_species/beta.
    """
    beta = config.beta
    e_cell_diag = -config.g_diag_cell * math.fsum(config.I_cell) / beta
    e_field_diag = -config.g_diag_field * math.fsum(config.I_link) / beta
    e_cell_kink = -config.n_interaction / beta
    e_field_kink = -config.n_field / beta
    if config.basis == "x":
        e_mu, e_h = e_cell_diag, e_field_diag
        e_J, e_lmbda = e_cell_kink, e_field_kink
    else:
        e_J, e_lmbda = e_cell_diag, e_field_diag
        e_mu, e_h = e_cell_kink, e_field_kink
    return e_mu + e_h + e_J + e_lmbda, e_mu, e_h, e_J, e_lmbda


class _OffsetUnionFind:
    """Union-find over nodes carrying integer displacement offsets.

    Each node stores its displacement from the component root in unrolled
    (non-wrapped) coordinates; uniting two already-connected nodes through
    an edge whose displacement disagrees with the stored offsets exposes a
    cycle with nonzero net displacement, i.e. a winding cluster.
    """

    def __init__(self, n, dim):
        self.parent = list(range(n))
        self.size = [1] * n
        self.offset = [(0,) * dim for _ in range(n)]
        self.winding = [False] * n
        self.dim = dim

    def find(self, x):
        path = []
        while self.parent[x] != x:
            path.append(x)
            x = self.parent[x]
        acc = (0,) * self.dim
        for node in reversed(path):
            acc = tuple(a + b for a, b in zip(acc, self.offset[node]))
            self.parent[node] = x
            self.offset[node] = acc
        return x

    def union(self, u, v, disp):
        """Join u and v related by pos(v) = pos(u) + disp; detect winding."""
        ru = self.find(u)
        rv = self.find(v)
        # after path compression the stored offsets are relative to the root
        ou = self._root_offset(u, ru)
        ov = self._root_offset(v, rv)
        if ru == rv:
            if any(a + d != b for a, d, b in zip(ou, disp, ov)):
                self.winding[ru] = True
            return ru
        if self.size[ru] < self.size[rv]:
            ru, rv = rv, ru
            ou, ov = ov, ou
            disp = tuple(-d for d in disp)
        # attach rv under ru: pos(rv) - pos(ru) = ou + disp - ov
        self.parent[rv] = ru
        self.offset[rv] = tuple(a + d - b for a, d, b in zip(ou, disp, ov))
        self.size[ru] += self.size[rv]
        self.winding[ru] = self.winding[ru] or self.winding[rv]
        return ru

    def _root_offset(self, x, root):
        if x == root:
            return (0,) * self.dim
        return self.offset[x]


def _spanning_roots(uf, node_positions, dim):
    """Roots of components that touch both extremes of some dimension.

    `node_positions` is a list of (node, integer coordinate tuple); the
    extremes are taken over the listed positions of the whole lattice.
    """
    lo = [min(p[k] for _, p in node_positions) for k in range(dim)]
    hi = [max(p[k] for _, p in node_positions) for k in range(dim)]
    touch_lo = {}
    touch_hi = {}
    for n, p in node_positions:
        r = uf.find(n)
        a = touch_lo.setdefault(r, [False] * dim)
        b = touch_hi.setdefault(r, [False] * dim)
        for k in range(dim):
            if p[k] == lo[k]:
                a[k] = True
            if p[k] == hi[k]:
                b[k] = True
    return {r for r in touch_lo
            if any(x and y for x, y in zip(touch_lo[r], touch_hi[r]))}


def percolation_analysis(snapshot, lattice: Lattice):
    """(winding indicator, largest cluster in links, percolation strength).

    Clusters are connected components of spin-down links (links sharing a
    vertex are neighbours).  On periodic lattices the indicator fires when
    a cluster winds around the system; on open lattices, when it spans
    opposite boundaries.  The strength is largest_cluster / N_links when
    the indicator fires and 0 otherwise.
    """
    down = [lk for lk in lattice.links if snapshot[lk.id] < 0]
    if not down:
        return 0, 0, 0.0
    uf = _OffsetUnionFind(lattice.n_vertices, lattice.dim)
    for lk in down:
        uf.union(lk.u, lk.v, lk.displacement)
    counts = {}
    for lk in down:
        r = uf.find(lk.u)
        counts[r] = counts.get(r, 0) + 1
    largest = max(counts.values())
    if lattice.winding_directions:
        percolating = {r for r in counts if uf.winding[r]}
    else:
        # spanning check against the full vertex-coordinate extremes
        all_pos = [(v.id, v.cell) for v in lattice.vertices]
        percolating = _spanning_roots(uf, all_pos, lattice.dim) & counts.keys()
    indicator = 1 if percolating else 0
    strength = largest / lattice.n_links if indicator else 0.0
    return indicator, largest, strength


def plaquette_percolation(snapshot, lattice: Lattice) -> int:
    """Winding/spanning indicator for clusters of plaquettes.

    Two plaquettes are neighbours when they share a spin-down link; the
    winding test runs on the dual adjacency, with displacements taken from
    the owner-cell offsets of the shared link in each face.
    """
    if lattice.n_plaquettes == 0:
        return 0
    uf = _OffsetUnionFind(lattice.n_plaquettes, lattice.dim)
    active = []
    for lid, plaqs in enumerate(lattice.link_plaquettes):
        if snapshot[lid] >= 0 or len(plaqs) < 2:
            continue
        offs = []
        for p in plaqs:
            i = lattice.plaquettes[p].index(lid)
            offs.append(lattice.plaq_link_offsets[p][i])
        base_p, base_off = plaqs[0], offs[0]
        for q, off_q in zip(plaqs[1:], offs[1:]):
            # anchor(q) - anchor(p) through this link = off_p - off_q
            disp = tuple(a - b for a, b in zip(base_off, off_q))
            uf.union(base_p, q, disp)
            active.append((base_p, q))
    if not active:
        return 0
    roots = {uf.find(p) for p, _ in active}
    if lattice.winding_directions:
        return 1 if any(uf.winding[r] for r in roots) else 0
    all_pos = [(p, lattice.plaq_anchor[p]) for p in range(lattice.n_plaquettes)]
    return 1 if (_spanning_roots(uf, all_pos, lattice.dim) & roots) else 0


def fredenhagen_marcu_terms(snapshot, loops: FmLoopPair):
    """Products of snapshot spins over the half and full loop."""
    w_half = 1
    for l in loops.half_loop:
        w_half *= int(snapshot[l])
    w_full = 1
    for l in loops.full_loop:
        w_full *= int(snapshot[l])
    return w_half, w_full


def staggered_imaginary_times(config: WorldlineConfig) -> float:
    """Mean over interaction targets of |alternating inter-kink time sum|.

    For target k with kink times t_1 < ... < t_N the alternating sum is
    s_k = [(t_1 - 0) - (t_2 - t_1) + ... + (-1)^N (beta - t_N)]/beta; a
    target without kinks contributes 1.  Sensitive to dense kink coverage,
    hence an order parameter for the trivial phase.
    """
    beta = config.beta
    total = 0.0
    for times in config.cell_times:
        n = len(times)
        alt = 2.0 * (sum(times[0::2]) - sum(times[1::2]))
        s = ((beta if n % 2 == 0 else -beta) + alt) / beta
        total += abs(s)
    return total / len(config.cell_times)


def susceptibility_primitives(config: WorldlineConfig):
    """(M, n_field, n_interaction) with M = int_0^beta sum_l sigma_l dtau."""
    return math.fsum(config.I_link), config.n_field, config.n_interaction
