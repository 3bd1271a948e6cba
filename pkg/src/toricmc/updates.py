"""Metropolis-Hastings updates for the worldline configuration.

Seven updates, proposed with equal probability:

    0  insert a field kink pair on a uniformly chosen link
    1  remove a field kink pair (uniform ordered pair on a chosen link)
    2  insert an interaction kink pair on a uniformly chosen cell
    3  remove an interaction kink pair
    4  shift one kink inside the open window between its time neighbours
    5  flip one link's spin on the entire imaginary axis
    6  flip an interaction cell's spins on the entire imaginary axis

Pair insertion draws an ordered time pair uniformly on [0, beta)^2 and
flips the wrapped interval (t1, t2]; removal picks an ordered pair among
the n(n-1) kinks of the chosen target, which makes insertion and removal
exact inverses with acceptance

    A_ins = min(1, g^2 beta^2 e^{-dU} / ((n+2)(n+1)))
    A_rem = min(1, n(n-1) e^{-dU} / (g^2 beta^2)).

The shift proposal is symmetric (A = min(1, e^{-dU})), as are the two
whole-axis flips.  The whole-axis flips restore ergodicity at high
temperature and at zero off-diagonal coupling, where the spin at time
0 = beta could otherwise never change.  Updates that can never be
accepted for the current couplings (zero coupling, empty target) exit
early with acceptance 0 and untouched state.
"""

from __future__ import annotations

import math
import random
import secrets
from bisect import bisect_left
from dataclasses import dataclass

from .worldline import FIELD, INTERACTION, INTERACTION_CELL, SINGLE_LINK, WorldlineConfig

N_UPDATES = 7

INSERT_FIELD_PAIR = 0
REMOVE_FIELD_PAIR = 1
INSERT_INTERACTION_PAIR = 2
REMOVE_INTERACTION_PAIR = 3
SHIFT_KINK = 4
FLIP_LINK_LINE = 5
FLIP_CELL_LINE = 6


@dataclass(frozen=True)
class UpdateOutcome:
    """Per-step record of the proposed update and its Metropolis ratio."""

    update_id: int
    proposed: bool
    accepted: bool
    acceptance_probability: float


class ChainRng(random.Random):
    """Seedable Mersenne-Twister stream owned by one Markov chain.

    A seed of 0 requests a random seed; the effective seed is kept in
    `seed_used` so runs can be reproduced from the output metadata.
    """

    def __init__(self, seed: int = 0):
        self.requested_seed = seed
        self.seed_used = seed if seed != 0 else (secrets.randbits(62) + 1)
        super().__init__(self.seed_used)


def _reject(update_id, proposed=True):
    return UpdateOutcome(update_id, proposed, False, 0.0)


def _decide(config, rng, update_id, log_ratio, commit):
    if log_ratio >= 0.0:
        acc = 1.0
        accepted = True
    else:
        acc = math.exp(log_ratio)
        accepted = rng.random() < acc
    if accepted:
        commit()
    return UpdateOutcome(update_id, True, accepted, acc)


def update_insert_pair(config: WorldlineConfig, species: str, rng) -> UpdateOutcome:
    update_id = INSERT_FIELD_PAIR if species == FIELD else INSERT_INTERACTION_PAIR
    g = config.kink_coupling(species)
    if g <= 0.0:
        return _reject(update_id, proposed=False)
    n_targets = config.n_links if species == FIELD else config.n_kink_cells
    target = rng.randrange(n_targets)
    beta = config.beta
    t1 = beta * rng.random()
    t2 = beta * rng.random()
    if config.pair_collides(species, target, t1, t2):
        return _reject(update_id)
    n = config.kink_count(species, target)
    du = config.pair_action_change(species, target, t1, t2)
    log_ratio = 2.0 * math.log(g * beta) - du - math.log((n + 2) * (n + 1))
    return _decide(config, rng, update_id, log_ratio,
                   lambda: config.commit_pair_insert(species, target, t1, t2))


def update_remove_pair(config: WorldlineConfig, species: str, rng) -> UpdateOutcome:
    update_id = REMOVE_FIELD_PAIR if species == FIELD else REMOVE_INTERACTION_PAIR
    n_targets = config.n_links if species == FIELD else config.n_kink_cells
    target = rng.randrange(n_targets)
    n = config.kink_count(species, target)
    if n < 2:
        return _reject(update_id, proposed=False)
    times = config.field_times[target] if species == FIELD else config.cell_times[target]
    i1 = rng.randrange(n)
    i2 = rng.randrange(n - 1)
    if i2 >= i1:
        i2 += 1
    t1, t2 = times[i1], times[i2]
    du = config.pair_action_change(species, target, t1, t2)
    g = config.kink_coupling(species)
    if g <= 0.0:
        # zero-weight leftovers (coupling switched mid-run): always drain
        log_ratio = 0.0
    else:
        log_ratio = math.log(n * (n - 1)) - du - 2.0 * math.log(g * config.beta)
    return _decide(config, rng, update_id, log_ratio,
                   lambda: config.commit_pair_remove(species, target, t1, t2))


def update_shift_kink(config: WorldlineConfig, rng) -> UpdateOutcome:
    n_field = config.n_field
    n_total = n_field + config.n_interaction
    if n_total == 0:
        return _reject(SHIFT_KINK, proposed=False)
    r = rng.randrange(n_total)
    kink = config.field_kinks[r] if r < n_field else config.int_kinks[r - n_field]
    dlo, dhi = config.kink_window(kink)
    delta = -dlo + rng.random() * (dlo + dhi)
    raw = kink.time + delta
    t_new = raw % config.beta
    if delta == -dlo or t_new == 0.0 or t_new == kink.time:
        return _reject(SHIFT_KINK)
    for l in config.affected_links(kink.species, kink.target):
        times = config.link_times[l]
        i = bisect_left(times, t_new)
        if i < len(times) and times[i] == t_new:
            return _reject(SHIFT_KINK)
    du = config.shift_action_change(kink, delta)
    return _decide(config, rng, SHIFT_KINK, -du,
                   lambda: config.commit_shift(kink, delta))


def update_flip_line(config: WorldlineConfig, scope: str, rng) -> UpdateOutcome:
    if scope == SINGLE_LINK:
        update_id = FLIP_LINK_LINE
        target = rng.randrange(config.n_links)
    else:
        update_id = FLIP_CELL_LINE
        target = rng.randrange(config.n_kink_cells)
    du = config.whole_line_action_change(scope, target)
    return _decide(config, rng, update_id, -du,
                   lambda: config.commit_flip_line(scope, target))


def mc_step(config: WorldlineConfig, rng, debug: bool = False) -> UpdateOutcome:
    """Propose and maybe apply one uniformly chosen update."""
    u = rng.randrange(N_UPDATES)
    if u == INSERT_FIELD_PAIR:
        out = update_insert_pair(config, FIELD, rng)
    elif u == REMOVE_FIELD_PAIR:
        out = update_remove_pair(config, FIELD, rng)
    elif u == INSERT_INTERACTION_PAIR:
        out = update_insert_pair(config, INTERACTION, rng)
    elif u == REMOVE_INTERACTION_PAIR:
        out = update_remove_pair(config, INTERACTION, rng)
    elif u == SHIFT_KINK:
        out = update_shift_kink(config, rng)
    elif u == FLIP_LINK_LINE:
        out = update_flip_line(config, SINGLE_LINK, rng)
    else:
        out = update_flip_line(config, INTERACTION_CELL, rng)
    if debug:
        config.validate()
    return out
