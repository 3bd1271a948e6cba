"""Hierarchical results document with the documented key layout.

Results are stored as a flat text file, one `key/path = value` line per
entry, with the key paths

    simulation/results/acc_ratio                       (thermalization only)
    simulation/results/<observable>/series             (if enabled)
    simulation/results/<observable>/{mean, mean_error,
                                     binder, binder_error,
                                     autocorrelation_time}
    simulation/metadata/...

For hysteresis runs the scalar entries hold arrays ordered like the
h_hysteresis / lmbda_hysteresis schedule.  Values are serialized as JSON
(numbers at full precision, NaN allowed), so files re-parse to the exact
values written.  Writes are atomic (temp file + rename).
"""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from . import __version__ as _pkg_version
from .driver import RunResult

RESULTS_FILENAME = "results.txt"

_STAT_KEYS = (("mean", "mean"), ("mean_std", "mean_error"),
              ("binder", "binder"), ("binder_std", "binder_error"),
              ("tau_int", "autocorrelation_time"))


@dataclass
class ResultsDocument:
    """Ordered mapping of slash-separated key paths to plain values."""

    entries: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.entries[key]

    def __contains__(self, key):
        return key in self.entries

    def keys(self):
        return self.entries.keys()


def _plain(value):
    """Convert numpy scalars/arrays to json-serializable Python values."""
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def build_results_document(result: RunResult, extra_metadata: dict | None = None) -> ResultsDocument:
    """Assemble the document for one finished run."""
    doc = ResultsDocument()
    e = doc.entries
    hysteresis = result.mode == "hysteresis"
    full_series = result.config.out.full_time_series

    if result.acc_ratio is not None:
        e["simulation/results/acc_ratio"] = _plain(result.acc_ratio)

    for i, name in enumerate(result.observables):
        base = f"simulation/results/{name}"
        if full_series:
            if hysteresis:
                e[base + "/series"] = _plain(result.series_hys[:, i, :])
            elif result.series is not None:
                e[base + "/series"] = _plain(result.series[i])
            if name == "fredenhagen_marcu":
                if hysteresis:
                    e[base + "/series_full"] = _plain(
                        [p["fm_full"] for p in result.primitives_hys])
                else:
                    e[base + "/series_full"] = _plain(result.primitives["fm_full"])
        for attr, label in _STAT_KEYS:
            if hysteresis:
                e[f"{base}/{label}"] = _plain(getattr(result, attr + "_hys")[:, i])
            else:
                e[f"{base}/{label}"] = _plain(getattr(result, attr)[i])

    meta = {
        "mode": result.mode,
        "code_version": _pkg_version,
        "seed_used": result.seed_used,
        "wall_time_seconds": result.wall_time,
    }
    cfg = result.config
    for section_name, section in (("sim", cfg.sim), ("params", cfg.params),
                                  ("lat", cfg.lat), ("out", cfg.out)):
        for fname, fval in vars(section).items():
            meta[f"{section_name}/{fname}"] = _plain(fval)
    if extra_metadata:
        meta.update({k: _plain(v) for k, v in extra_metadata.items()})
    for k in sorted(meta):
        e[f"simulation/metadata/{k}"] = meta[k]
    return doc


def write_results(document: ResultsDocument, path) -> None:
    """Serialize the document atomically; keys keep their insertion order."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".results-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            for key, value in document.entries.items():
                fh.write(f"{key} = {json.dumps(value)}\n")
        os.replace(tmp, path)
    except OSError as err:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise OSError(f"cannot write results file {path}: {err}") from err


def read_results(path) -> ResultsDocument:
    """Parse a results file back into a document with identical values."""
    doc = ResultsDocument()
    try:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                key, sep, raw = line.partition(" = ")
                if not sep:
                    raise ValueError(
                        f"{path}:{lineno}: malformed line (no ' = ' separator)")
                doc.entries[key] = json.loads(raw)
    except OSError as err:
        raise OSError(f"cannot read results file {path}: {err}") from err
    return doc
