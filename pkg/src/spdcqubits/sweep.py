"""(g0, t) parameter sweeps.

One trajectory is integrated per pump coupling g0 and observables are
harvested at every sample time along it. Rows are independent and may be
farmed out to worker processes; results are merged in row order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .dynamics import DEFAULT_DT, EvolutionSpec, evolve
from .fockspace import ConfigError, SpaceConfig, build_space, vacuum_state
from .observables import OBSERVABLE_COLUMNS, observe
from .operators import OperatorSet, build_hamiltonian

__all__ = [
    "SweepGrid",
    "RowResult",
    "SweepResult",
    "default_grid",
    "run_sweep",
    "compare_regimes",
    "write_sweep",
    "WITNESSES",
]

log = logging.getLogger(__name__)

WITNESSES = ("G_CV", "G_CV_prime", "G_DV")
CONVERGENCE_TOL = 1e-4


@dataclass(frozen=True)
class SweepGrid:
    """Pump couplings and sample times, in units of omega1 and 1/omega1."""

    g0_values: tuple[float, ...]
    times: tuple[float, ...]

    def __post_init__(self):
        g0 = tuple(float(g) for g in self.g0_values)
        ts = tuple(float(t) for t in self.times)
        if not g0 or not ts:
            raise ConfigError("sweep grid needs at least one g0 and one time")
        if any(b <= a for a, b in zip(g0, g0[1:])) or g0[0] < 0:
            raise ConfigError("g0 values must be nonnegative and strictly increasing")
        if any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] < 0:
            raise ConfigError("times must be nonnegative and strictly increasing")
        object.__setattr__(self, "g0_values", g0)
        object.__setattr__(self, "times", ts)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.g0_values), len(self.times)

    def with_anchors(self) -> "SweepGrid":
        """Same grid plus a ``g0 = 0`` row and a ``t = 0`` column."""
        g0 = self.g0_values if self.g0_values[0] == 0 else (0.0, *self.g0_values)
        ts = self.times if self.times[0] == 0 else (0.0, *self.times)
        return SweepGrid(g0, ts)


def default_grid() -> SweepGrid:
    """20 couplings 0.02..0.40 and 100 times 0.25..25."""
    return SweepGrid(tuple(round(0.02 * k, 10) for k in range(1, 21)),
                     tuple(0.25 * k for k in range(1, 101)))


@dataclass
class RowResult:
    g0: float
    cells: list[dict[str, float]]
    failed: bool = False
    diagnostic: str = ""
    warnings: list[str] = field(default_factory=list)
    leaks: list[tuple[float, float, float]] = field(default_factory=list)
    unconverged: list[bool] = field(default_factory=list)
    convergence_shift: list[float] = field(default_factory=list)


@dataclass
class SweepResult:
    grid: SweepGrid
    config: SpaceConfig
    method: str
    dt: float
    rows: list[RowResult]

    @property
    def provenance(self) -> dict:
        cfg = asdict(self.config)
        return {
            "version": __version__,
            "method": self.method,
            "dt": self.dt,
            "cutoffs": list(self.config.cutoffs),
            "config": {k: list(v) if isinstance(v, tuple) else v for k, v in cfg.items()
                       if k != "pump_coupling"},
            "grid_hash": grid_hash(self.grid, self.config, self.method, self.dt),
        }

    def values(self, column: str) -> np.ndarray:
        """``(n_g0, n_t)`` array of one observable; NaN for failed rows."""
        out = np.full(self.grid.shape, np.nan)
        for r, row in enumerate(self.rows):
            if not row.failed:
                out[r, : len(row.cells)] = [c[column] for c in row.cells]
        return out


def grid_hash(grid: SweepGrid, config: SpaceConfig, method: str, dt: float) -> str:
    payload = json.dumps({
        "g0": grid.g0_values, "t": grid.times, "method": method, "dt": dt,
        "cutoffs": config.cutoffs, "w": config.mode_freqs, "W": config.qubit_freqs,
        "g": config.rabi_couplings, "wd": None if config.drive_freq == sum(config.mode_freqs)
        else config.drive_freq,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _trajectory_rows(config, times, method, dt, norm_tol):
    space = build_space(config)
    ops = OperatorSet(space)
    ham = build_hamiltonian(space, config)
    spec = EvolutionSpec(t_final=times[-1], sample_times=times, method=method, dt=dt,
                         norm_tol=norm_tol)
    g0 = config.pump_coupling
    return evolve(space, ham, spec, vacuum_state(space),
                  observer=lambda t, psi: observe(ops, psi, t, g0).row())


def _run_row(args) -> RowResult:
    config, times, method, dt, norm_tol, check_convergence = args
    traj = _trajectory_rows(config, times, method, dt, norm_tol)
    row = RowResult(config.pump_coupling, traj.records, traj.failed, traj.diagnostic,
                    list(traj.warnings), list(traj.leaks))
    if traj.failed:
        log.warning("row g0=%g failed: %s", config.pump_coupling, traj.diagnostic)
        return row
    if check_convergence:
        bigger = config.replace(cutoffs=tuple(n + 2 for n in config.cutoffs))
        ref = _trajectory_rows(bigger, times, method, dt, norm_tol)
        for k, cell in enumerate(row.cells):
            if k >= len(ref.records):
                row.convergence_shift.append(float("inf"))
            else:
                row.convergence_shift.append(max(abs(cell[w] - ref.records[k][w]) for w in WITNESSES))
        row.unconverged = [s > CONVERGENCE_TOL for s in row.convergence_shift]
    return row


def run_sweep(grid: SweepGrid, config: SpaceConfig | None = None, jobs: int = 1,
              method: str = "a", dt: float = DEFAULT_DT, norm_tol: float = 1e-9,
              check_convergence: bool = False) -> SweepResult:
    """Integrate one trajectory per g0 and collect observables at every grid time.

    ``config`` supplies every physical parameter except the pump coupling.
    With ``check_convergence`` each row is repeated with all cutoffs raised
    by 2 and cells whose witnesses move by more than 1e-4 are flagged.
    """
    config = config or SpaceConfig()
    tasks = [(config.replace(pump_coupling=g0), grid.times, method, dt, norm_tol,
              check_convergence) for g0 in grid.g0_values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_row, tasks))
    else:
        rows = [_run_row(t) for t in tasks]
    return SweepResult(grid, config.replace(pump_coupling=0.0), method, dt, rows)


def compare_regimes(result: SweepResult, tol: float = 0.0) -> dict:
    """Count cells where each witness certifies entanglement (value > tol)."""
    ok = [r for r in result.rows if not r.failed]
    if not ok:
        raise ValueError("sweep has no successful rows")
    cv = sum(1 for r in ok for c in r.cells if c["G_CV"] > tol)
    dv = sum(1 for r in ok for c in r.cells if c["G_DV"] > tol)
    return {
        "cells_cv_positive": cv,
        "cells_dv_positive": dv,
        "ratio": (dv / cv) if cv else (float("inf") if dv else float("nan")),
        "cells_total": sum(len(r.cells) for r in ok),
        "failed_rows": [r.g0 for r in result.rows if r.failed],
    }


def _fmt(v) -> str:
    return repr(float(v))


def write_sweep(result: SweepResult, out_dir, stem: str = "sweep") -> tuple[str, str]:
    """Write ``<stem>_<hash>.csv`` and ``<stem>_<hash>.json``; returns both paths.

    The CSV opens with ``# key = value`` provenance lines.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov = result.provenance
    base = out / f"{stem}_{prov['grid_hash']}"
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        for key, value in prov.items():
            fh.write(f"# {key} = {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(OBSERVABLE_COLUMNS)
        for row in result.rows:
            if row.failed:
                continue
            for cell in row.cells:
                writer.writerow([_fmt(cell[c]) for c in OBSERVABLE_COLUMNS])
    summary = {
        "provenance": prov,
        "grid": {"g0": list(result.grid.g0_values), "t": list(result.grid.times)},
        "summary": compare_regimes(result) if any(not r.failed for r in result.rows) else None,
        "rows": [{
            "g0": r.g0,
            "failed": r.failed,
            "diagnostic": r.diagnostic,
            "warnings": r.warnings,
            "peak_leak": [max((lk[i] for lk in r.leaks), default=0.0) for i in range(3)],
            "unconverged_cells": [result.grid.times[k] for k, u in enumerate(r.unconverged) if u],
        } for r in result.rows],
    }
    json_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return str(csv_path), str(json_path)
