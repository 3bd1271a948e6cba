"""Piecewise-constant spin worldlines in continuous imaginary time.

Every link carries a spin trajectory sigma_l(tau) on [0, beta) that starts
at a base value and flips at kink times.  Kinks come in two species:

* field kinks flip a single link (the off-diagonal single-spin term),
* interaction kinks flip every link of one off-diagonal cell at once
  (plaquettes in the x basis, stars in the z basis).

The basis decides which terms of the Hamiltonian

    H = -mu sum_v A_v - J sum_p B_p - h sum_l sx_l - lmbda sum_l sz_l

are diagonal.  In the x basis the star term (coupling mu) and the h field
are diagonal while plaquettes (J) and the lmbda field insert kinks; in the
z basis the roles swap.  Weights are positive only for J, lmbda >= 0 in
the x basis and mu, h >= 0 in the z basis; other signs raise
SignProblemError.

The configuration keeps, per link, the time-ordered kink list plus the
exact integral I_l = int_0^beta sigma_l dtau, and per diagonal cell the
flip times (field kinks on member links; interaction kinks never flip a
diagonal cell because they always overlap it in an even number of links)
plus I_c = int_0^beta A_c dtau.  The integrated diagonal action

    U = -g_cell * sum_c I_c  -  g_field * sum_l I_l

is then available in closed form, whole-axis spin flips cost O(1), and
time searches are binary searches in the sorted kink lists.  After a
mutation the integrals of the affected links/cells are recomputed from
their (short) kink lists, so a mutation followed by its inverse restores
the configuration bit-exactly.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right, insort

from .errors import ConfigurationError, ConsistencyError, SignProblemError
from .lattice import Lattice

FIELD = "field"
INTERACTION = "interaction"

SINGLE_LINK = "single_link"
INTERACTION_CELL = "interaction_cell"


class Kink:
    """One off-diagonal operator insertion at a fixed imaginary time."""

    __slots__ = ("time", "species", "target", "_gidx")

    def __init__(self, time, species, target):
        self.time = time
        self.species = species
        self.target = target
        self._gidx = -1

    def __repr__(self):
        return f"Kink(time={self.time!r}, species={self.species!r}, target={self.target})"


def _alt_integral(times, s0, a, b):
    """Integral over (a, b] of the +-1 function that starts at s0 on [0, t_0).

    `times` is the sorted list of flip times; 0 <= a < b <= beta is required
    (no wrapping here).  Closed form in terms of the alternating sum of the
    flip times inside the window, so the cost is one binary search plus two
    C-level slice sums.
    """
    i = bisect_right(times, a)
    j = bisect_right(times, b)
    s_a = s0 if (i & 1) == 0 else -s0
    alt = 2.0 * (sum(times[i:j:2]) - sum(times[i + 1:j:2]))
    end = b if ((j - i) & 1) == 0 else -b
    return s_a * (end - a + alt)


def _wrapped_integral(times, s0, a, b, beta):
    """Integral over the wrapped interval (a, b]; wraps through beta if b < a."""
    if a < b:
        return _alt_integral(times, s0, a, b)
    return _alt_integral(times, s0, a, beta) + _alt_integral(times, s0, 0.0, b)


class WorldlineConfig:
    """Dynamic QMC state: base spins, kinks, and cached action integrals.

    Owned and mutated by exactly one Markov chain; the lattice it references
    is immutable and may be shared.
    """

    def __init__(self, lattice: Lattice, basis: str, beta: float,
                 mu: float, h: float, J: float, lmbda: float,
                 default_spin: int = 1):
        if basis not in ("x", "z"):
            raise ConfigurationError(f"basis must be 'x' or 'z', got {basis!r}")
        if not (beta > 0):
            raise ConfigurationError(f"beta must be > 0, got {beta!r}")
        if default_spin not in (1, -1):
            raise ConfigurationError(f"default_spin must be +1 or -1, got {default_spin!r}")

        self.lattice = lattice
        self.basis = basis
        self.beta = float(beta)
        self.n_links = lattice.n_links
        self._set_couplings(mu, h, J, lmbda)

        if basis == "x":
            self.diag_cells = lattice.stars
            self.kink_cells = lattice.plaquettes
            self.link_diag_cells = [(lk.u, lk.v) for lk in lattice.links]
            self.link_kink_cells = lattice.link_plaquettes
        else:
            self.diag_cells = lattice.plaquettes
            self.kink_cells = lattice.stars
            self.link_diag_cells = lattice.link_plaquettes
            self.link_kink_cells = [(lk.u, lk.v) for lk in lattice.links]
        self.n_diag_cells = len(self.diag_cells)
        self.n_kink_cells = len(self.kink_cells)

        beta_f = self.beta
        n_l = self.n_links
        self.base_spin = [default_spin] * n_l
        self.link_times = [[] for _ in range(n_l)]
        self.field_times = [[] for _ in range(n_l)]
        self.field_recs = [[] for _ in range(n_l)]
        self.cell_times = [[] for _ in range(self.n_kink_cells)]
        self.cell_recs = [[] for _ in range(self.n_kink_cells)]
        self.dflip_times = [[] for _ in range(self.n_diag_cells)]
        self.base_cell = [default_spin ** len(c) if default_spin < 0 else 1
                          for c in self.diag_cells]
        self.I_link = [default_spin * beta_f] * n_l
        self.I_cell = [bc * beta_f for bc in self.base_cell]
        self.field_kinks = []
        self.int_kinks = []

    # -- couplings ---------------------------------------------------------

    def _set_couplings(self, mu, h, J, lmbda):
        if self.basis == "x":
            if J < 0 or lmbda < 0:
                raise SignProblemError(
                    "sign problem: the x basis requires J >= 0 and lmbda >= 0 "
                    f"(got J={J}, lmbda={lmbda})")
        else:
            if mu < 0 or h < 0:
                raise SignProblemError(
                    "sign problem: the z basis requires mu >= 0 and h >= 0 "
                    f"(got mu={mu}, h={h})")
        self.mu = float(mu)
        self.h = float(h)
        self.J = float(J)
        self.lmbda = float(lmbda)
        if self.basis == "x":
            self.g_diag_cell, self.g_diag_field = self.mu, self.h
            self.g_kink_cell, self.g_kink_field = self.J, self.lmbda
        else:
            self.g_diag_cell, self.g_diag_field = self.J, self.lmbda
            self.g_kink_cell, self.g_kink_field = self.mu, self.h

    def set_couplings(self, mu=None, h=None, J=None, lmbda=None):
        """Switch couplings mid-run (thermalization schedules, hysteresis).

        The worldline state is coupling-independent, so only the action
        coefficients and the kink acceptance weights change.
        """
        self._set_couplings(self.mu if mu is None else mu,
                            self.h if h is None else h,
                            self.J if J is None else J,
                            self.lmbda if lmbda is None else lmbda)

    def kink_coupling(self, species):
        return self.g_kink_field if species == FIELD else self.g_kink_cell

    # -- queries -----------------------------------------------------------

    @property
    def n_field(self):
        return len(self.field_kinks)

    @property
    def n_interaction(self):
        return len(self.int_kinks)

    @property
    def U_cached(self):
        """Integrated diagonal action from the maintained per-link/cell integrals."""
        return -(self.g_diag_cell * math.fsum(self.I_cell)
                 + self.g_diag_field * math.fsum(self.I_link))

    def spin_at(self, link, tau):
        """Spin of `link` at imaginary time tau; O(log n) binary search."""
        if not 0 <= tau < self.beta:
            raise ConfigurationError(f"tau must lie in [0, beta), got {tau}")
        return self.base_spin[link] * (1 if bisect_right(self.link_times[link], tau) & 1 == 0 else -1)

    def affected_links(self, species, target):
        if species == FIELD:
            return (target,)
        return self.kink_cells[target]

    def kink_count(self, species, target):
        if species == FIELD:
            return len(self.field_times[target])
        return len(self.cell_times[target])

    def pair_collides(self, species, target, t1, t2):
        """True if inserting kinks at t1, t2 would collide with existing times."""
        if t1 == t2 or t1 <= 0.0 or t2 <= 0.0:
            return True
        for l in self.affected_links(species, target):
            times = self.link_times[l]
            for t in (t1, t2):
                i = bisect_left(times, t)
                if i < len(times) and times[i] == t:
                    return True
        return False

    def pair_action_change(self, species, target, t1, t2):
        """Action change from flipping the wrapped interval (t1, t2].

        Valid both for inserting a kink pair at (t1, t2) and for removing an
        existing pair at those times: either way the worldlines of the
        affected links are negated on the interval, so

            dU = 2 g_field sum_l int sigma_l  +  2 g_cell sum_c int A_c

        with integrals of the current trajectories over the interval.  The
        A_c term only appears for field kinks; an interaction cell overlaps
        every diagonal cell in an even number of links and leaves A_c alone.
        """
        beta = self.beta
        du = 0.0
        gf = self.g_diag_field
        if gf != 0.0:
            for l in self.affected_links(species, target):
                du += 2.0 * gf * _wrapped_integral(
                    self.link_times[l], self.base_spin[l], t1, t2, beta)
        if species == FIELD and self.g_diag_cell != 0.0:
            for c in self.link_diag_cells[target]:
                du += 2.0 * self.g_diag_cell * _wrapped_integral(
                    self.dflip_times[c], self.base_cell[c], t1, t2, beta)
        return du

    # -- mutations ---------------------------------------------------------

    def apply_kink_pair(self, species, target, t1, t2):
        """Insert a kink pair, flipping spins on the wrapped (t1, t2]; return dU."""
        if self.pair_collides(species, target, t1, t2):
            raise ConfigurationError(
                f"kink times collide on target {target}: ({t1}, {t2})")
        du = self.pair_action_change(species, target, t1, t2)
        self.commit_pair_insert(species, target, t1, t2)
        return du

    def remove_kink_pair(self, species, target, t1, t2):
        """Exact inverse of apply_kink_pair; returns the action change."""
        du = self.pair_action_change(species, target, t1, t2)
        self.commit_pair_remove(species, target, t1, t2)
        return du

    def commit_pair_insert(self, species, target, t1, t2):
        wraps = t2 < t1
        links = self.affected_links(species, target)
        for l in links:
            insort(self.link_times[l], t1)
            insort(self.link_times[l], t2)
            if wraps:
                self.base_spin[l] = -self.base_spin[l]
        if species == FIELD:
            for t in (t1, t2):
                k = Kink(t, FIELD, target)
                i = bisect_right(self.field_times[target], t)
                self.field_times[target].insert(i, t)
                self.field_recs[target].insert(i, k)
                self._gadd(self.field_kinks, k)
            for c in self.link_diag_cells[target]:
                insort(self.dflip_times[c], t1)
                insort(self.dflip_times[c], t2)
                if wraps:
                    self.base_cell[c] = -self.base_cell[c]
                self._refresh_cell(c)
        else:
            for t in (t1, t2):
                k = Kink(t, INTERACTION, target)
                i = bisect_right(self.cell_times[target], t)
                self.cell_times[target].insert(i, t)
                self.cell_recs[target].insert(i, k)
                self._gadd(self.int_kinks, k)
        for l in links:
            self._refresh_link(l)

    def commit_pair_remove(self, species, target, t1, t2):
        wraps = t2 < t1
        links = self.affected_links(species, target)
        for l in links:
            self._del_time(self.link_times[l], t1)
            self._del_time(self.link_times[l], t2)
            if wraps:
                self.base_spin[l] = -self.base_spin[l]
        if species == FIELD:
            for t in (t1, t2):
                i = bisect_left(self.field_times[target], t)
                rec = self.field_recs[target][i]
                del self.field_times[target][i]
                del self.field_recs[target][i]
                self._gremove(self.field_kinks, rec)
            for c in self.link_diag_cells[target]:
                self._del_time(self.dflip_times[c], t1)
                self._del_time(self.dflip_times[c], t2)
                if wraps:
                    self.base_cell[c] = -self.base_cell[c]
                self._refresh_cell(c)
        else:
            for t in (t1, t2):
                i = bisect_left(self.cell_times[target], t)
                rec = self.cell_recs[target][i]
                del self.cell_times[target][i]
                del self.cell_recs[target][i]
                self._gremove(self.int_kinks, rec)
        for l in links:
            self._refresh_link(l)

    def whole_line_action_change(self, scope, target):
        """Action change of flipping base spins on the whole imaginary axis.

        O(1): the cached integrals flip sign, so dU is read off directly.
        """
        if scope == SINGLE_LINK:
            du = 2.0 * self.g_diag_field * self.I_link[target]
            for c in self.link_diag_cells[target]:
                du += 2.0 * self.g_diag_cell * self.I_cell[c]
            return du
        if scope == INTERACTION_CELL:
            # even overlap with every diagonal cell: only field terms flip
            return 2.0 * self.g_diag_field * sum(
                self.I_link[l] for l in self.kink_cells[target])
        raise ConfigurationError(f"unknown whole-line scope {scope!r}")

    def flip_whole_line(self, scope, target):
        """Flip the spin of one link (or one interaction cell) at every tau."""
        du = self.whole_line_action_change(scope, target)
        self.commit_flip_line(scope, target)
        return du

    def commit_flip_line(self, scope, target):
        if scope == SINGLE_LINK:
            self.base_spin[target] = -self.base_spin[target]
            self.I_link[target] = -self.I_link[target]
            for c in self.link_diag_cells[target]:
                self.base_cell[c] = -self.base_cell[c]
                self.I_cell[c] = -self.I_cell[c]
        else:
            for l in self.kink_cells[target]:
                self.base_spin[l] = -self.base_spin[l]
                self.I_link[l] = -self.I_link[l]

    # -- kink shifts -------------------------------------------------------

    def kink_window(self, kink):
        """Open time window (as distances dlo, dhi > 0) around a kink.

        The window is bounded by the nearest other kink time on any link the
        kink acts on, wrapping around the periodic time axis.  Link parity
        guarantees at least one neighbour exists.
        """
        beta = self.beta
        t = kink.time
        dlo = dhi = beta
        for l in self.affected_links(kink.species, kink.target):
            times = self.link_times[l]
            n = len(times)
            i = bisect_left(times, t)
            prev = times[i - 1] if i > 0 else times[n - 1] - beta
            nxt = times[i + 1] if i + 1 < n else times[0] + beta
            dlo = min(dlo, t - prev)
            dhi = min(dhi, nxt - t)
        return dlo, dhi

    def shift_action_change(self, kink, delta):
        """Action change of moving a kink by delta within its open window."""
        beta = self.beta
        t = kink.time
        links = self.affected_links(kink.species, kink.target)
        if delta >= 0:
            a, b = t, t + delta
        else:
            a, b = t + delta, t
        wa = a % beta
        wb = b % beta
        du = 0.0
        gf = self.g_diag_field
        if gf != 0.0 and delta != 0.0:
            # no other kink lies between a and b, so sigma_l is constant there
            for l in links:
                idx = bisect_right(self.link_times[l], t)
                if delta < 0:
                    idx -= 1  # value just before the kink
                s = self.base_spin[l] * (1 if idx & 1 == 0 else -1)
                du += 2.0 * gf * s * abs(delta)
        if kink.species == FIELD and self.g_diag_cell != 0.0 and delta != 0.0:
            # other field kinks of the same star may lie inside the arc
            for c in self.link_diag_cells[kink.target]:
                du += 2.0 * self.g_diag_cell * _wrapped_integral(
                    self.dflip_times[c], self.base_cell[c], wa, wb, beta)
        return du

    def move_kink(self, kink, delta):
        """Move a kink by delta (wrapping allowed); returns the action change."""
        du = self.shift_action_change(kink, delta)
        self.commit_shift(kink, delta)
        return du

    def commit_shift(self, kink, delta):
        beta = self.beta
        t_old = kink.time
        raw = t_old + delta
        crosses_zero = raw >= beta or raw < 0.0
        t_new = raw % beta
        links = self.affected_links(kink.species, kink.target)
        for l in links:
            self._del_time(self.link_times[l], t_old)
            insort(self.link_times[l], t_new)
            if crosses_zero:
                self.base_spin[l] = -self.base_spin[l]
        if kink.species == FIELD:
            lnk = kink.target
            i = bisect_left(self.field_times[lnk], t_old)
            del self.field_times[lnk][i]
            del self.field_recs[lnk][i]
            j = bisect_right(self.field_times[lnk], t_new)
            self.field_times[lnk].insert(j, t_new)
            self.field_recs[lnk].insert(j, kink)
            for c in self.link_diag_cells[lnk]:
                self._del_time(self.dflip_times[c], t_old)
                insort(self.dflip_times[c], t_new)
                if crosses_zero:
                    self.base_cell[c] = -self.base_cell[c]
                self._refresh_cell(c)
        else:
            cell = kink.target
            i = bisect_left(self.cell_times[cell], t_old)
            del self.cell_times[cell][i]
            del self.cell_recs[cell][i]
            j = bisect_right(self.cell_times[cell], t_new)
            self.cell_times[cell].insert(j, t_new)
            self.cell_recs[cell].insert(j, kink)
        kink.time = t_new
        for l in links:
            self._refresh_link(l)

    # -- consistency -------------------------------------------------------

    def recompute_action(self) -> float:
        """From-scratch integral of the diagonal energy; does not mutate."""
        beta = self.beta
        total_l = 0.0
        for l in range(self.n_links):
            total_l += _alt_integral(self.link_times[l], self.base_spin[l], 0.0, beta)
        total_c = 0.0
        for c, members in enumerate(self.diag_cells):
            flips = sorted(t for l in members for t in self.field_times[l])
            s0 = 1
            for l in members:
                s0 *= self.base_spin[l]
            total_c += _alt_integral(flips, s0, 0.0, beta)
        return -(self.g_diag_cell * total_c + self.g_diag_field * total_l)

    def check_consistency(self, tol=1e-8):
        """Compare the cached action against the from-scratch recomputation."""
        u = self.U_cached
        u2 = self.recompute_action()
        rel = abs(u - u2) / max(1.0, abs(u))
        if rel > tol:
            raise ConsistencyError(
                f"cached action {u!r} deviates from recomputation {u2!r} "
                f"(relative error {rel:.3e} > {tol})")
        return rel

    def validate(self):
        """Full structural invariant check (debug mode; O(system size))."""
        beta = self.beta
        for l in range(self.n_links):
            times = self.link_times[l]
            if len(times) % 2 != 0:
                raise ConsistencyError(f"odd kink count on link {l}")
            if any(not (0.0 < t < beta) for t in times):
                raise ConsistencyError(f"kink time out of (0, beta) on link {l}")
            if any(times[i] >= times[i + 1] for i in range(len(times) - 1)):
                raise ConsistencyError(f"kink times not strictly sorted on link {l}")
            merged = sorted(self.field_times[l]
                            + [t for c in self.link_kink_cells[l]
                               for t in self.cell_times[c]])
            if merged != times:
                raise ConsistencyError(f"link {l} kink list inconsistent with sources")
            ref = _alt_integral(times, self.base_spin[l], 0.0, beta)
            if ref != self.I_link[l]:
                raise ConsistencyError(f"stale spin integral on link {l}")
        for c, members in enumerate(self.diag_cells):
            flips = sorted(t for l in members for t in self.field_times[l])
            if flips != self.dflip_times[c]:
                raise ConsistencyError(f"stale flip list on diagonal cell {c}")
            s0 = 1
            for l in members:
                s0 *= self.base_spin[l]
            if s0 != self.base_cell[c]:
                raise ConsistencyError(f"stale base value on diagonal cell {c}")
            ref = _alt_integral(flips, s0, 0.0, beta)
            if ref != self.I_cell[c]:
                raise ConsistencyError(f"stale cell integral on diagonal cell {c}")
        for lst in (self.field_kinks, self.int_kinks):
            for i, k in enumerate(lst):
                if k._gidx != i:
                    raise ConsistencyError("global kink registry corrupted")
        if len(self.field_kinks) != sum(len(ts) for ts in self.field_times):
            raise ConsistencyError("field kink registry size mismatch")
        if len(self.int_kinks) != sum(len(ts) for ts in self.cell_times):
            raise ConsistencyError("interaction kink registry size mismatch")
        self.check_consistency()

    # -- internals ---------------------------------------------------------

    def _refresh_link(self, l):
        self.I_link[l] = _alt_integral(
            self.link_times[l], self.base_spin[l], 0.0, self.beta)

    def _refresh_cell(self, c):
        self.I_cell[c] = _alt_integral(
            self.dflip_times[c], self.base_cell[c], 0.0, self.beta)

    @staticmethod
    def _del_time(times, t):
        i = bisect_left(times, t)
        if i >= len(times) or times[i] != t:
            raise ConsistencyError(f"kink time {t!r} not found for removal")
        del times[i]

    @staticmethod
    def _gadd(lst, kink):
        kink._gidx = len(lst)
        lst.append(kink)

    @staticmethod
    def _gremove(lst, kink):
        i = kink._gidx
        last = lst[-1]
        lst[i] = last
        last._gidx = i
        lst.pop()
        kink._gidx = -1


def new_config(lattice: Lattice, basis: str, beta: float, *,
               mu: float = 1.0, h: float = 0.0, J: float = 1.0,
               lmbda: float = 0.0, default_spin: int = 1) -> WorldlineConfig:
    """Fresh kink-free configuration with all links at default_spin."""
    return WorldlineConfig(lattice, basis, beta, mu, h, J, lmbda,
                           default_spin=default_spin)
