"""Plain-text serialization of kernels, measures and schedules.

Kernel and measure files are CSV with a one-line header ``# kernel <size>``
or ``# measure <size>`` followed by one row per state.  Values are written
with 17 significant digits so a round trip is exact.  Schedule files are JSON
objects ``{"kernels": [...], "rule": ..., "seed": ..., "horizon": ...}``
whose kernel names resolve to ``<name>.csv`` next to the schedule file.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import Kernel, Measure, Schedule, check_kernel, check_measure, validate_kernel
from .exceptions import ConfigError, ValidationError

FLOAT_FMT = "%.17g"


def _write_rows(path, kind, rows):
    rows = np.atleast_2d(rows)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {kind} {rows.shape[-1] if kind == 'kernel' else rows.size}\n")
        np.savetxt(fh, rows, fmt=FLOAT_FMT, delimiter=",")


def _read_rows(path, kind):
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != "#" or header[1] != kind:
            raise ValidationError(f"{path}: expected header '# {kind} <size>'")
        size = int(header[2])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return size, data


def write_kernel(path, K):
    _write_rows(path, "kernel", check_kernel(K))


def read_kernel(path) -> Kernel:
    size, data = _read_rows(path, "kernel")
    if data.shape != (size, size):
        raise ValidationError(f"{path}: header says {size} states, found shape {data.shape}")
    return validate_kernel(data)


def write_measure(path, mu):
    w = check_measure(mu)
    with open(path, "w", newline="") as fh:
        fh.write(f"# measure {w.size}\n")
        np.savetxt(fh, w[:, None], fmt=FLOAT_FMT)


def read_measure(path) -> Measure:
    size, data = _read_rows(path, "measure")
    w = data.ravel()
    if w.size != size:
        raise ValidationError(f"{path}: header says {size} states, found {w.size}")
    return Measure(check_measure(w))


def schedule_to_dict(schedule: Schedule, names=None):
    names = list(names or schedule.names or [f"K{j}" for j in range(len(schedule.kernels))])
    out = {"kernels": names, "rule": schedule.rule, "seed": schedule.seed,
           "horizon": schedule.horizon}
    if schedule.rule in ("explicit", "explicit-index-sequence"):
        out["indices"] = [int(j) for j in schedule.indices]
    return out


def schedule_from_dict(data, kernels):
    """Rebuild a schedule from its JSON form and a ``name -> kernel`` mapping."""
    try:
        names = list(data["kernels"])
        rule = data["rule"]
        horizon = int(data["horizon"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed schedule: {exc}") from None
    missing = [n for n in names if n not in kernels]
    if missing:
        raise ConfigError(f"unknown kernels {missing}")
    ks = [kernels[n] for n in names]
    if rule == "fixed-cycle":
        return Schedule.cycle(ks, horizon, names=names)
    if rule == "seeded-random":
        if data.get("seed") is None:
            raise ConfigError("seeded-random schedules need a seed")
        return Schedule.random(ks, horizon, int(data["seed"]), names=names)
    if rule in ("explicit", "explicit-index-sequence"):
        idx = data.get("indices", list(range(len(ks))))
        if len(idx) < horizon:
            raise ConfigError("index sequence shorter than horizon")
        return Schedule.from_indices(ks, idx[:horizon], names=names)
    raise ConfigError(f"unknown selection rule {rule!r}")


def write_schedule(path, schedule: Schedule, names=None, write_kernels=True):
    path = Path(path)
    data = schedule_to_dict(schedule, names)
    if write_kernels:
        for name, K in zip(data["kernels"], schedule.kernels):
            write_kernel(path.parent / f"{name}.csv", K)
    path.write_text(json.dumps(data, indent=2) + "\n")


def read_schedule(path) -> Schedule:
    path = Path(path)
    data = json.loads(path.read_text())
    kernels = {n: read_kernel(path.parent / f"{n}.csv") for n in data.get("kernels", [])}
    return schedule_from_dict(data, kernels)
