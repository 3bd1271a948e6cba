"""Exact references at desk scale: dense diagonalization and enumeration.

Builds the full Hamiltonian

    H = -mu sum_v A_v - J sum_p B_p - h sum_l sx_l - lmbda sum_l sz_l

in the computational basis of the simulated Pauli (so diagonal terms are
diagonal matrices and the other species are bit-flip permutations), takes
thermal traces from the full spectrum, and enumerates classical Boltzmann
weights for the commuting limit.  Capped at 14 links: thermal expectation
values need the whole spectrum, and 2^14 is the largest dimension that is
still comfortable on a desk machine.

State encoding: state index s has bit l set when spin l is -1, so spin
values are 1 - 2*bit.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .lattice import Lattice

MAX_LINKS = 14


class DenseHamiltonian:
    """Dense matrix form of the model plus the observable operators."""

    def __init__(self, lattice: Lattice, couplings: dict, basis: str):
        if basis not in ("x", "z"):
            raise ConfigurationError(f"basis must be 'x' or 'z', got {basis!r}")
        m = lattice.n_links
        if m > MAX_LINKS:
            raise ConfigurationError(
                f"{m} links exceed the dense-diagonalization cap of {MAX_LINKS}")
        self.lattice = lattice
        self.basis = basis
        self.couplings = {k: float(couplings.get(k, 0.0)) for k in ("mu", "h", "J", "lmbda")}
        self.dim = 1 << m

        states = np.arange(self.dim, dtype=np.int64)
        spins = 1.0 - 2.0 * ((states[None, :] >> np.arange(m)[:, None]) & 1)
        self.spin_table = spins  # (n_links, dim), values +-1

        star_prod = np.ones((lattice.n_vertices, self.dim))
        for v, star in enumerate(lattice.stars):
            for l in star:
                star_prod[v] *= spins[l]
        plaq_prod = np.ones((lattice.n_plaquettes, self.dim))
        for p, plaq in enumerate(lattice.plaquettes):
            for l in plaq:
                plaq_prod[p] *= spins[l]

        sum_spins = spins.sum(axis=0)
        sum_star = star_prod.sum(axis=0)
        sum_plaq = plaq_prod.sum(axis=0)

        def flip_sum(masks, dim=self.dim):
            op = np.zeros((dim, dim))
            for mask in masks:
                op[states ^ mask, states] += 1.0
            return op

        link_masks = [1 << l for l in range(m)]
        star_masks = [sum(1 << l for l in star) for star in lattice.stars]
        plaq_masks = [sum(1 << l for l in plaq) for plaq in lattice.plaquettes]

        if basis == "x":
            self.sum_sigma_x = np.diag(sum_spins)
            self.sum_star = np.diag(sum_star)
            self.sum_sigma_z = flip_sum(link_masks)
            self.sum_plaq = flip_sum(plaq_masks)
            self.anyon_diag = 0.5 * (lattice.n_vertices - sum_star)
            self.string_diag = 0.5 * (m - sum_spins)
        else:
            self.sum_sigma_z = np.diag(sum_spins)
            self.sum_plaq = np.diag(sum_plaq)
            self.sum_sigma_x = flip_sum(link_masks)
            self.sum_star = flip_sum(star_masks)
            self.anyon_diag = 0.5 * (lattice.n_plaquettes - sum_plaq)
            self.string_diag = 0.5 * (m - sum_spins)

        mu, h, J, lmbda = (self.couplings[k] for k in ("mu", "h", "J", "lmbda"))
        self.H = (-mu * self.sum_star - J * self.sum_plaq
                  - h * self.sum_sigma_x - lmbda * self.sum_sigma_z)
        if not np.allclose(self.H, self.H.T, atol=1e-12):
            raise AssertionError("Hamiltonian is not symmetric")
        self._eig = None

    def eig(self):
        if self._eig is None:
            self._eig = np.linalg.eigh(self.H)
        return self._eig

    def thermal_weights(self, beta):
        evals, _ = self.eig()
        w = np.exp(-beta * (evals - evals.min()))
        return w / w.sum()

    def expect(self, op, beta):
        """Thermal expectation Tr(op e^{-beta H}) / Z."""
        evals, vecs = self.eig()
        w = self.thermal_weights(beta)
        if op.ndim == 1:  # diagonal operator given as its diagonal
            diag_k = (vecs * vecs).T @ op
        else:
            diag_k = ((op @ vecs) * vecs).sum(axis=0)
        return float(w @ diag_k)

    def diagonal_marginal(self, beta):
        """Probabilities of the computational-basis states, diag(e^{-beta H})/Z."""
        _, vecs = self.eig()
        w = self.thermal_weights(beta)
        return (vecs * vecs) @ w


def build_hamiltonian(lattice: Lattice, couplings: dict, basis: str) -> DenseHamiltonian:
    """Dense Hamiltonian and observable matrices in the simulation basis."""
    return DenseHamiltonian(lattice, couplings, basis)


def thermal_expectations(ham: DenseHamiltonian, beta: float, fd_step: float = 1e-3) -> dict:
    """Exact thermal values for the observables the sampler estimates.

    Susceptibilities are central finite differences of the conjugate total
    magnetization, chi = (1/N) d<sum sigma>/d(field), with O(fd_step^2) error.
    """
    lat = ham.lattice
    cpl = ham.couplings
    n_l, n_v, n_p = lat.n_links, lat.n_vertices, lat.n_plaquettes

    sum_sx = ham.expect(ham.sum_sigma_x, beta)
    sum_sz = ham.expect(ham.sum_sigma_z, beta)
    sum_star = ham.expect(ham.sum_star, beta)
    sum_plaq = ham.expect(ham.sum_plaq, beta)

    e_mu = -cpl["mu"] * sum_star
    e_J = -cpl["J"] * sum_plaq
    e_h = -cpl["h"] * sum_sx
    e_lm = -cpl["lmbda"] * sum_sz

    out = {
        "energy": e_mu + e_J + e_h + e_lm,
        "energy_mu": e_mu,
        "energy_J": e_J,
        "energy_h": e_h,
        "energy_lmbda": e_lm,
        "sigma_x": sum_sx / n_l,
        "sigma_z": sum_sz / n_l,
        "star_x": sum_star / n_v,
        "plaquette_z": sum_plaq / n_p,
        "anyon_count": ham.expect(ham.anyon_diag, beta),
        "string_number": ham.expect(ham.string_diag, beta),
    }
    out["delta"] = out["star_x"] - out["plaquette_z"]
    out["anyon_density"] = out["anyon_count"] / (n_v if ham.basis == "x" else n_p)

    def shifted(name, delta):
        c = dict(cpl)
        c[name] += delta
        return DenseHamiltonian(lat, c, ham.basis)

    plus = shifted("h", fd_step).expect(shifted("h", fd_step).sum_sigma_x, beta)
    minus = shifted("h", -fd_step).expect(shifted("h", -fd_step).sum_sigma_x, beta)
    out["sigma_x_susceptibility"] = (plus - minus) / (2.0 * fd_step * n_l)
    plus = shifted("lmbda", fd_step).expect(shifted("lmbda", fd_step).sum_sigma_z, beta)
    minus = shifted("lmbda", -fd_step).expect(shifted("lmbda", -fd_step).sum_sigma_z, beta)
    out["sigma_z_susceptibility"] = (plus - minus) / (2.0 * fd_step * n_l)
    return out


def classical_boltzmann(lattice: Lattice, couplings: dict, beta: float,
                        basis: str = "x") -> np.ndarray:
    """Exact Boltzmann table of the diagonal classical energy over all states.

    Requires the off-diagonal single-spin coupling of the chosen basis to be
    zero (lmbda in the x basis, h in the z basis) so that the diagonal energy
    is the full classical energy of the spin configuration.
    """
    m = lattice.n_links
    if m > MAX_LINKS:
        raise ConfigurationError(
            f"{m} links exceed the enumeration cap of {MAX_LINKS}")
    cpl = {k: float(couplings.get(k, 0.0)) for k in ("mu", "h", "J", "lmbda")}
    if basis == "x":
        if cpl["lmbda"] != 0.0:
            raise ConfigurationError(
                "classical enumeration in the x basis requires lmbda = 0")
    elif basis == "z":
        if cpl["h"] != 0.0:
            raise ConfigurationError(
                "classical enumeration in the z basis requires h = 0")
    else:
        raise ConfigurationError(f"basis must be 'x' or 'z', got {basis!r}")

    states = np.arange(1 << m, dtype=np.int64)
    spins = 1.0 - 2.0 * ((states[None, :] >> np.arange(m)[:, None]) & 1)
    if basis == "x":
        cells, g_cell, g_field = lattice.stars, cpl["mu"], cpl["h"]
    else:
        cells, g_cell, g_field = lattice.plaquettes, cpl["J"], cpl["lmbda"]
    energy = -g_field * spins.sum(axis=0)
    for cell in cells:
        prod = np.ones(len(states))
        for l in cell:
            prod *= spins[l]
        energy -= g_cell * prod
    w = np.exp(-beta * (energy - energy.min()))
    return w / w.sum()


def state_index(base_spins) -> int:
    """Computational-basis index of a +-1 spin vector (bit set where spin is -1)."""
    idx = 0
    for l, s in enumerate(base_spins):
        if s < 0:
            idx |= 1 << l
    return idx
