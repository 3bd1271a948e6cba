"""Run modes and sweep orchestration.

Three run modes share one Markov chain each:

* thermalization: N_thermalization steps, measuring every step and
  recording the per-step Monte Carlo acceptance ratio (a diagnostic for
  burn-in and freezing),
* sample: thermalize, then N_samples measurements separated by
  N_between_samples steps,
* hysteresis: a list of (h, lmbda) points visited by a single chain, the
  final state of one point seeding the thermalization of the next.

Sweeps (temperature, either field, a circle in the (lmbda, h) plane, and
the two-branch hysteresis loop) run independent chains in parallel
processes; point i derives its seed as base_seed + i so results do not
depend on the worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .lattice import build_fm_loops, build_lattice
from .observables import (
    FUNCTIONAL_OBSERVABLES,
    SNAPSHOT_OBSERVABLES,
    anyon_stats,
    energy_estimators,
    fredenhagen_marcu_terms,
    percolation_analysis,
    plaquette_percolation,
    stabilizer_estimators,
    staggered_imaginary_times,
    string_and_field,
    susceptibility_primitives,
    take_snapshot,
    validate_observable_names,
)
from .stats import SeriesStats, bootstrap_functional, stationary_bootstrap, tau_int
from .updates import ChainRng, mc_step
from .worldline import new_config


@dataclass
class SimSpec:
    """Monte Carlo controls."""

    N_samples: int = 1000
    N_thermalization: int = 10000
    N_between_samples: int = 1000
    N_resamples: int = 1000
    custom_therm: bool = False
    seed: int = 0
    observables: tuple = ("energy",)


@dataclass
class ParamSpec:
    """Hamiltonian couplings; *_therm apply during custom warmup schedules."""

    mu: float = 1.0
    h: float = 0.0
    J: float = 1.0
    lmbda: float = 0.0
    h_therm: float = math.nan
    lmbda_therm: float = math.nan
    h_hys: tuple = ()
    lmbda_hys: tuple = ()


@dataclass
class LatSpec:
    basis: str = "x"
    lattice_type: str = "square"
    system_size: int = 4
    beta: float = 1.0
    boundaries: str = "periodic"
    default_spin: int = 1


@dataclass
class OutSpec:
    path_out: str | None = None
    paths_out: tuple = ()
    save_snapshots: bool = False
    full_time_series: bool = False


@dataclass
class RunConfig:
    sim: SimSpec = field(default_factory=SimSpec)
    params: ParamSpec = field(default_factory=ParamSpec)
    lat: LatSpec = field(default_factory=LatSpec)
    out: OutSpec = field(default_factory=OutSpec)

    def validate(self):
        sim = self.sim
        if not sim.observables:
            raise ConfigurationError("at least one observable must be requested")
        validate_observable_names(sim.observables)
        if sim.N_thermalization < 0:
            raise ConfigurationError("N_thermalization must be >= 0")
        if sim.N_between_samples < 1:
            raise ConfigurationError("N_between_samples must be >= 1")
        if sim.N_resamples < 1:
            raise ConfigurationError("N_resamples must be >= 1")
        if sim.custom_therm:
            if not (math.isfinite(self.params.h_therm)
                    and math.isfinite(self.params.lmbda_therm)):
                raise ConfigurationError(
                    "custom_therm requires finite h_therm and lmbda_therm")
        if len(self.params.h_hys) != len(self.params.lmbda_hys):
            raise ConfigurationError(
                f"h_hys and lmbda_hys lengths differ "
                f"({len(self.params.h_hys)} vs {len(self.params.lmbda_hys)})")


@dataclass
class RunResult:
    """Measured series and bootstrap statistics, ordered as requested."""

    mode: str
    observables: tuple
    config: RunConfig
    seed_used: int
    wall_time: float
    series: np.ndarray | None = None       # (n_obs, n_points)
    acc_ratio: np.ndarray | None = None    # (n_steps,), thermalization mode
    mean: np.ndarray | None = None
    mean_std: np.ndarray | None = None
    binder: np.ndarray | None = None
    binder_std: np.ndarray | None = None
    tau_int: np.ndarray | None = None
    primitives: dict = field(default_factory=dict)
    snapshots: list | None = None
    series_hys: np.ndarray | None = None   # (n_steps, n_obs, N_samples)
    mean_hys: np.ndarray | None = None     # (n_steps, n_obs)
    mean_std_hys: np.ndarray | None = None
    binder_hys: np.ndarray | None = None
    binder_std_hys: np.ndarray | None = None
    tau_int_hys: np.ndarray | None = None
    snapshots_hys: list | None = None
    primitives_hys: list | None = None


def suggested_thermalization(lattice_type: str, L: int, T: float) -> int:
    """Rule-of-thumb warmup length 500 L^d / T (good for small fields)."""
    d = 3 if lattice_type == "cubic" else 2
    return int(round(500 * L**d / T))


class _Recorder:
    """Evaluates the requested observables once per measurement."""

    def __init__(self, config, lattice, names, loops, save_snapshots=False):
        self.config = config
        self.lattice = lattice
        self.names = tuple(names)
        self.loops = loops
        self.save_snapshots = save_snapshots
        req = set(self.names)
        self.need_snapshot = bool(req & SNAPSHOT_OBSERVABLES) or save_snapshots
        self.need_perc = bool(req & {"percolation_probability",
                                     "percolation_strength", "largest_cluster"})
        self.need_anyon = bool(req & {"anyon_count", "anyon_density"})
        self.need_energy = bool(req & {"energy", "energy_mu", "energy_h",
                                       "energy_J", "energy_lmbda"})
        self.need_stab = bool(req & {"star_x", "plaquette_z", "delta"})
        self.series = {n: [] for n in self.names}
        self.primitives = {"M": [], "n_field": [], "n_interaction": []}
        if "fredenhagen_marcu" in req:
            self.primitives["fm_half"] = []
            self.primitives["fm_full"] = []
        self.snapshots = [] if save_snapshots else None

    def record(self):
        c = self.config
        lat = self.lattice
        prim = self.primitives
        M, n_field, n_interaction = susceptibility_primitives(c)
        prim["M"].append(M)
        prim["n_field"].append(n_field)
        prim["n_interaction"].append(n_interaction)

        snap = take_snapshot(c) if self.need_snapshot else None
        if self.save_snapshots:
            self.snapshots.append(snap)

        vals = {}
        if self.need_energy:
            (vals["energy"], vals["energy_mu"], vals["energy_h"],
             vals["energy_J"], vals["energy_lmbda"]) = energy_estimators(c)
        if self.need_stab:
            vals["star_x"], vals["plaquette_z"], vals["delta"] = stabilizer_estimators(c)
        if self.need_anyon:
            vals["anyon_count"], vals["anyon_density"] = anyon_stats(snap, lat, c.basis)
        if self.need_perc:
            (vals["percolation_probability"], vals["largest_cluster"],
             vals["percolation_strength"]) = percolation_analysis(snap, lat)

        for name in self.names:
            if name in vals:
                self.series[name].append(vals[name])
            elif name == "sigma_x" or name == "sigma_z":
                self.series[name].append(self._sigma(name, M, n_field))
            elif name == "string_number":
                self.series[name].append(string_and_field(snap, c)[0])
            elif name == "plaquette_percolation_probability":
                self.series[name].append(plaquette_percolation(snap, lat))
            elif name == "staggered_imaginary_times":
                self.series[name].append(staggered_imaginary_times(c))
            elif name == "fredenhagen_marcu":
                w_half, w_full = fredenhagen_marcu_terms(snap, self.loops)
                prim["fm_half"].append(w_half)
                prim["fm_full"].append(w_full)
                self.series[name].append(w_half)
            elif name in ("sigma_x_susceptibility", "sigma_z_susceptibility"):
                # functional of the whole series; proxy rows are filled in later
                self.series[name].append(0.0)
            # names handled in vals simply skip here

    def _sigma(self, name, M, n_field):
        c = self.config
        diag_value = M / (c.beta * c.n_links)
        diag_name = "sigma_x" if c.basis == "x" else "sigma_z"
        if name == diag_name:
            return diag_value
        g = c.g_kink_field
        if g <= 0.0:
            return math.nan
        return n_field / (c.beta * g * c.n_links)

    def finish(self):
        """Series matrix with susceptibility proxy rows resolved."""
        c = self.config
        n = len(self.primitives["M"])
        rows = []
        M = np.asarray(self.primitives["M"], dtype=np.float64)
        nf = np.asarray(self.primitives["n_field"], dtype=np.float64)
        for name in self.names:
            if name in ("sigma_x_susceptibility", "sigma_z_susceptibility"):
                rows.append(_susceptibility_proxy(name, c, M, nf))
            else:
                rows.append(np.asarray(self.series[name], dtype=np.float64))
        series = np.vstack(rows) if rows else np.zeros((0, n))
        prims = {k: np.asarray(v, dtype=np.float64) for k, v in self.primitives.items()}
        return series, prims


def _diag_susceptibility_name(basis):
    return "sigma_x_susceptibility" if basis == "x" else "sigma_z_susceptibility"


def _susceptibility_proxy(name, config, M, n_field):
    """Per-sample contributions whose mean is the susceptibility estimate."""
    beta, n_links = config.beta, config.n_links
    if name == _diag_susceptibility_name(config.basis):
        d = M - M.mean()
        return d * d / (beta * n_links)
    g = config.g_kink_field
    if g <= 0.0:
        return np.full(M.size, math.nan)
    d = n_field - n_field.mean()
    return (d * d - n_field) / (beta * g * g * n_links)


def _chi_diag_reduce(beta, n_links):
    def reduce(M):
        m = M.mean()
        return (np.mean(M * M) - m * m) / (beta * n_links)
    return reduce


def _chi_offdiag_reduce(beta, g, n_links):
    def reduce(n):
        m = n.mean()
        return (np.mean(n * n) - m * m - m) / (beta * g * g * n_links)
    return reduce


def _fm_reduce(w_half, w_full):
    mf = w_full.mean()
    if mf == 0.0:
        return math.nan
    return w_half.mean() / math.sqrt(abs(mf))


def _nan_stats():
    return SeriesStats(math.nan, math.nan, math.nan, math.nan, math.nan)


def _observable_stats(name, row, prims, config, n_resamples, rng):
    """SeriesStats for one observable; functionals bootstrap their reducer."""
    if name not in FUNCTIONAL_OBSERVABLES:
        if not np.all(np.isfinite(row)):
            return _nan_stats()
        return stationary_bootstrap(row, n_resamples, rng)

    beta, n_links = config.beta, config.n_links
    if name == "fredenhagen_marcu":
        arrays = [prims["fm_half"], prims["fm_full"]]
        reduce = _fm_reduce
        proxy = prims["fm_half"]
    elif name == _diag_susceptibility_name(config.basis):
        arrays = [prims["M"]]
        reduce = _chi_diag_reduce(beta, n_links)
        proxy = row
    else:
        g = config.g_kink_field
        if g <= 0.0:
            return _nan_stats()
        arrays = [prims["n_field"]]
        reduce = _chi_offdiag_reduce(beta, g, n_links)
        proxy = row
    if not np.all(np.isfinite(proxy)):
        return _nan_stats()
    ti = tau_int(proxy)
    ell = max(1, round(2.0 * ti))
    value, std, _ = bootstrap_functional(arrays, reduce, n_resamples, rng, ell)
    proxy_stats = stationary_bootstrap(proxy, n_resamples, rng, expected_block_length=ell)
    return SeriesStats(mean=value, mean_std=std, binder=proxy_stats.binder,
                       binder_std=proxy_stats.binder_std, tau_int=ti)


def _statistics(names, series, prims, config, n_resamples, boot_seed):
    rng = np.random.default_rng(boot_seed)
    stats = [_observable_stats(name, series[i], prims, config, n_resamples, rng)
             for i, name in enumerate(names)]
    return {
        "mean": np.array([s.mean for s in stats]),
        "mean_std": np.array([s.mean_std for s in stats]),
        "binder": np.array([s.binder for s in stats]),
        "binder_std": np.array([s.binder_std for s in stats]),
        "tau_int": np.array([s.tau_int for s in stats]),
    }


def _setup(run_config):
    run_config.validate()
    lat = run_config.lat
    lattice = build_lattice(lat.lattice_type, lat.system_size, lat.boundaries)
    loops = None
    if "fredenhagen_marcu" in run_config.sim.observables:
        loops = build_fm_loops(lattice, max(1, lat.system_size // 2))
    return lattice, loops


def _initial_couplings(run_config):
    p = run_config.params
    if run_config.sim.custom_therm:
        return p.h_therm, p.lmbda_therm
    return p.h, p.lmbda


def run_thermalization(run_config: RunConfig, debug: bool = False) -> RunResult:
    """Warmup only; measures every step and records acceptance ratios."""
    t0 = time.perf_counter()
    lattice, loops = _setup(run_config)
    sim, p, lat = run_config.sim, run_config.params, run_config.lat
    h0, lmbda0 = _initial_couplings(run_config)
    config = new_config(lattice, lat.basis, lat.beta, mu=p.mu, h=h0,
                        J=p.J, lmbda=lmbda0, default_spin=lat.default_spin)
    rng = ChainRng(sim.seed)
    rec = _Recorder(config, lattice, sim.observables, loops,
                    save_snapshots=run_config.out.save_snapshots)
    acc = np.empty(sim.N_thermalization)
    for i in range(sim.N_thermalization):
        out = mc_step(config, rng, debug=debug)
        acc[i] = out.acceptance_probability
        rec.record()
    config.check_consistency()
    series, prims = rec.finish()
    stats = _statistics(sim.observables, series, prims, config,
                        sim.N_resamples, rng.seed_used)
    return RunResult(mode="thermalization", observables=tuple(sim.observables),
                     config=run_config, seed_used=rng.seed_used,
                     wall_time=time.perf_counter() - t0, series=series,
                     acc_ratio=acc, primitives=prims, snapshots=rec.snapshots,
                     **stats)


def run_sample(run_config: RunConfig, debug: bool = False) -> RunResult:
    """Thermalize, then measure N_samples times with thinning in between."""
    t0 = time.perf_counter()
    if run_config.sim.N_samples < 1:
        raise ConfigurationError("N_samples must be >= 1 for sampling runs")
    lattice, loops = _setup(run_config)
    sim, p, lat = run_config.sim, run_config.params, run_config.lat
    h0, lmbda0 = _initial_couplings(run_config)
    config = new_config(lattice, lat.basis, lat.beta, mu=p.mu, h=h0,
                        J=p.J, lmbda=lmbda0, default_spin=lat.default_spin)
    rng = ChainRng(sim.seed)
    for _ in range(sim.N_thermalization):
        mc_step(config, rng, debug=debug)
    if sim.custom_therm:
        config.set_couplings(h=p.h, lmbda=p.lmbda)
    rec = _Recorder(config, lattice, sim.observables, loops,
                    save_snapshots=run_config.out.save_snapshots)
    for _ in range(sim.N_samples):
        for _ in range(sim.N_between_samples):
            mc_step(config, rng, debug=debug)
        rec.record()
    config.check_consistency()
    series, prims = rec.finish()
    stats = _statistics(sim.observables, series, prims, config,
                        sim.N_resamples, rng.seed_used)
    return RunResult(mode="sample", observables=tuple(sim.observables),
                     config=run_config, seed_used=rng.seed_used,
                     wall_time=time.perf_counter() - t0, series=series,
                     primitives=prims, snapshots=rec.snapshots, **stats)


def run_hysteresis(run_config: RunConfig, debug: bool = False) -> RunResult:
    """One chain visits the (h_hys, lmbda_hys) schedule point by point."""
    t0 = time.perf_counter()
    run_config.validate()
    sim, p, lat = run_config.sim, run_config.params, run_config.lat
    if not p.h_hys:
        raise ConfigurationError("hysteresis needs a nonempty h_hys/lmbda_hys schedule")
    if sim.custom_therm:
        raise ConfigurationError("custom_therm cannot be combined with hysteresis")
    if sim.N_samples < 1:
        raise ConfigurationError("N_samples must be >= 1 for sampling runs")
    lattice, loops = _setup(run_config)
    config = new_config(lattice, lat.basis, lat.beta, mu=p.mu, h=p.h_hys[0],
                        J=p.J, lmbda=p.lmbda_hys[0], default_spin=lat.default_spin)
    rng = ChainRng(sim.seed)

    all_series, all_stats, all_snaps, all_prims = [], [], [], []
    for step, (h_i, lmbda_i) in enumerate(zip(p.h_hys, p.lmbda_hys)):
        config.set_couplings(h=h_i, lmbda=lmbda_i)
        for _ in range(sim.N_thermalization):
            mc_step(config, rng, debug=debug)
        rec = _Recorder(config, lattice, sim.observables, loops,
                        save_snapshots=run_config.out.save_snapshots)
        for _ in range(sim.N_samples):
            for _ in range(sim.N_between_samples):
                mc_step(config, rng, debug=debug)
            rec.record()
        config.check_consistency()
        series, prims = rec.finish()
        all_series.append(series)
        all_prims.append(prims)
        all_snaps.append(rec.snapshots)
        all_stats.append(_statistics(sim.observables, series, prims, config,
                                     sim.N_resamples, [rng.seed_used, step]))

    stacked = {k + "_hys": np.array([s[k] for s in all_stats])
               for k in ("mean", "mean_std", "binder", "binder_std", "tau_int")}
    return RunResult(mode="hysteresis", observables=tuple(sim.observables),
                     config=run_config, seed_used=rng.seed_used,
                     wall_time=time.perf_counter() - t0,
                     series_hys=np.array(all_series),
                     snapshots_hys=all_snaps, primitives_hys=all_prims,
                     **stacked)


def resolve_processes(processes) -> int:
    """CPU count policy: 0 = all cores, negative -x = cores - x, None = -4."""
    cores = os.cpu_count() or 1
    if processes is None:
        processes = -4
    if processes == 0:
        n = cores
    elif processes < 0:
        n = cores + processes
    else:
        n = processes
    return max(1, n)


def _sweep_point(args):
    mode, cfg, debug = args
    if mode == "hysteresis":
        return run_hysteresis(cfg, debug=debug)
    return run_sample(cfg, debug=debug)


def _derive_seed(base_seed, i):
    return base_seed + i if base_seed != 0 else 0


def sweep_points(base_config: RunConfig, sweep_spec: dict):
    """The list of (label, RunConfig, mode) a sweep will run, in order."""
    kind = sweep_spec.get("kind")
    base_config.validate()
    points = []

    def with_params(i, label, **changes):
        lat_changes = {k: changes.pop(k) for k in ("beta",) if k in changes}
        cfg = replace(
            base_config,
            sim=replace(base_config.sim, seed=_derive_seed(base_config.sim.seed, i)),
            params=replace(base_config.params, **changes),
            lat=replace(base_config.lat, **lat_changes),
        )
        return label, cfg, "sample"

    if kind in ("T", "h", "lmbda"):
        lo, hi, steps = (sweep_spec[k] for k in ("lower", "upper", "steps"))
        if steps < 1:
            raise ConfigurationError("sweep needs steps >= 1")
        values = np.linspace(lo, hi, steps)
        for i, v in enumerate(values):
            if kind == "T":
                if v <= 0:
                    raise ConfigurationError("temperatures must be > 0")
                points.append(with_params(i, {"T": float(v)}, beta=1.0 / float(v)))
            elif kind == "h":
                points.append(with_params(i, {"h": float(v)}, h=float(v)))
            else:
                points.append(with_params(i, {"lmbda": float(v)}, lmbda=float(v)))
    elif kind == "circle":
        theta_l, theta_u, steps = (sweep_spec[k] for k in ("theta_lower", "theta_upper", "steps"))
        radius = sweep_spec["radius"]
        center_lmbda = sweep_spec["center_lmbda"]
        center_h = sweep_spec["center_h"]
        if steps < 1:
            raise ConfigurationError("sweep needs steps >= 1")
        # angles measured anti-clockwise from the lmbda axis
        for i, th in enumerate(np.linspace(theta_l, theta_u, steps)):
            lm = center_lmbda + radius * math.cos(th)
            hh = center_h + radius * math.sin(th)
            points.append(with_params(i, {"theta": float(th), "lmbda": lm, "h": hh},
                                      lmbda=lm, h=hh))
    elif kind == "hysteresis_two_branch":
        fwd = replace(base_config,
                      sim=replace(base_config.sim, seed=_derive_seed(base_config.sim.seed, 0)))
        rev = replace(
            base_config,
            sim=replace(base_config.sim, seed=_derive_seed(base_config.sim.seed, 1)),
            params=replace(base_config.params,
                           h_hys=tuple(reversed(base_config.params.h_hys)),
                           lmbda_hys=tuple(reversed(base_config.params.lmbda_hys))),
            out=replace(base_config.out,
                        paths_out=tuple(reversed(base_config.out.paths_out))))
        points = [({"branch": "forward"}, fwd, "hysteresis"),
                  ({"branch": "reversed"}, rev, "hysteresis")]
    else:
        raise ConfigurationError(
            f"unknown sweep kind {kind!r}; expected T, h, lmbda, circle "
            "or hysteresis_two_branch")
    return points


def run_sweep(base_config: RunConfig, sweep_spec: dict, processes=None,
              debug: bool = False) -> list:
    """Run an embarrassingly parallel sweep; results in point order."""
    points = sweep_points(base_config, sweep_spec)
    jobs = [(mode, cfg, debug) for _, cfg, mode in points]
    workers = min(resolve_processes(processes), len(jobs))
    if workers <= 1:
        return [_sweep_point(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_sweep_point, jobs))


def run_thermalization_ensemble(run_config: RunConfig, repetitions: int,
                                processes=None, debug: bool = False):
    """Average thermalization series over independent chains.

    Returns (averaged RunResult, list of per-chain RunResults); chain i
    uses seed base + i (or fresh entropy when the base seed is 0).
    """
    if repetitions < 1:
        raise ConfigurationError("repetitions must be >= 1")
    cfgs = [replace(run_config,
                    sim=replace(run_config.sim,
                                seed=_derive_seed(run_config.sim.seed, i)))
            for i in range(repetitions)]
    workers = min(resolve_processes(processes), repetitions)
    if workers <= 1:
        results = [run_thermalization(c, debug=debug) for c in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_thermalization, cfgs))
    avg = results[0]
    if repetitions > 1:
        series = np.mean([r.series for r in results], axis=0)
        acc = np.mean([r.acc_ratio for r in results], axis=0)
        avg = replace(results[0], series=series, acc_ratio=acc)
    return avg, results
