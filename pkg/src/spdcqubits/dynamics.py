"""Time evolution of ``i d/dt psi = H(t) psi``.

Two independent propagators are provided:

``"a"``
    classical fixed-step RK4 on the amplitude ODE.
``"b"``
    exponential midpoint rule: ``psi <- exp(-i H(t + h/2) h) psi`` with the
    exponential applied to the vector by a scaled, truncated Taylor series.

Between consecutive sample times the interval is split into equal substeps
no longer than ``dt``, so samples are hit exactly and runs are reproducible.
The state is never renormalised; the norm is reported as an error signal.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .fockspace import ConfigError, Space
from .operators import HamiltonianModel

__all__ = [
    "DEFAULT_DT",
    "EvolutionSpec",
    "TrajectoryResult",
    "evolve",
    "rk4_step",
    "midpoint_expm_step",
    "leakage",
    "leakage_report",
    "parity_expectation",
    "outside_probability",
    "write_trajectory_csv",
]

log = logging.getLogger(__name__)

DEFAULT_DT = 1e-3
METHODS = ("a", "b")


@dataclass(frozen=True)
class EvolutionSpec:
    """What to integrate and how.

    ``norm_tol`` is the allowed squared-norm drift per unit time; a sample
    at time t fails when ``|<psi|psi> - 1| > norm_tol * max(t, 1)``.
    """

    t_final: float
    sample_times: tuple[float, ...] | None = None
    method: str = "a"
    dt: float = DEFAULT_DT
    norm_tol: float = 1e-9
    leak_threshold: float = 1e-3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_final < 0:
            raise ConfigError(f"t_final must be >= 0, got {self.t_final}")
        times = self.sample_times
        if times is None:
            times = (float(self.t_final),)
        times = tuple(float(t) for t in times)
        if not times:
            raise ConfigError("at least one sample time is required")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("sample times must be strictly increasing")
        if times[0] < 0 or times[-1] > self.t_final + 1e-12:
            raise ConfigError(f"sample times must lie in [0, {self.t_final}]")
        object.__setattr__(self, "sample_times", times)


@dataclass
class TrajectoryResult:
    method: str
    dt: float
    cutoffs: tuple[int, int, int]
    times: list[float] = field(default_factory=list)
    norms: list[float] = field(default_factory=list)
    parity: list[float] = field(default_factory=list)
    outside: list[float] = field(default_factory=list)
    leaks: list[tuple[float, float, float]] = field(default_factory=list)
    records: list[Any] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    failed: bool = False
    diagnostic: str = ""
    warnings: list[str] = field(default_factory=list)

    @property
    def final_state(self) -> np.ndarray:
        if not self.states:
            raise ValueError("trajectory was run without keeping states")
        return self.states[-1]

    @property
    def max_norm_deviation(self) -> float:
        return max((abs(n - 1.0) for n in self.norms), default=0.0)


def rk4_step(ham: HamiltonianModel, t: float, h: float, psi: np.ndarray) -> np.ndarray:
    def f(s, y):
        return -1j * ham.apply(s, y)

    k1 = f(t, psi)
    k2 = f(t + h / 2, psi + (h / 2) * k1)
    k3 = f(t + h / 2, psi + (h / 2) * k2)
    k4 = f(t + h, psi + h * k3)
    return psi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def midpoint_expm_step(ham: HamiltonianModel, t: float, h: float, psi: np.ndarray,
                       tol: float = 1e-17, max_terms: int = 60) -> np.ndarray:
    """Apply ``exp(-i H(t + h/2) h)`` to ``psi``.

    The step is split into ``s`` pieces with ``||H|| h / s <= 1/2`` and the
    Taylor series of each piece is summed until the next term is negligible.
    """
    tm = t + h / 2
    s = max(1, math.ceil(2 * ham.norm_bound * abs(h)))
    hs = h / s
    out = psi
    for _ in range(s):
        term = out
        acc = out.copy()
        for k in range(1, max_terms + 1):
            term = (-1j * hs / k) * ham.apply(tm, term)
            acc += term
            if np.linalg.norm(term) <= tol * np.linalg.norm(acc):
                break
        else:
            raise RuntimeError("Taylor series did not converge; step too large")
        out = acc
    return out


_STEPPERS: dict[str, Callable] = {"a": rk4_step, "b": midpoint_expm_step}


def leakage(space: Space, psi: np.ndarray) -> tuple[float, float, float]:
    """Population on the top retained Fock level of each mode."""
    prob = np.abs(psi) ** 2
    occ = space.occupations
    return tuple(float(prob[occ[:, i] == space.cutoffs[i]].sum()) for i in range(3))


def _parity_mask(space: Space) -> np.ndarray:
    par = space.pair_parities
    return np.all(par == par[:, :1], axis=1)


def parity_expectation(space: Space, psi: np.ndarray) -> float:
    """``<psi|P|psi>`` for the pair-parity projector (P is diagonal)."""
    return float(np.sum(np.abs(psi[_parity_mask(space)]) ** 2))


def outside_probability(space: Space, psi: np.ndarray) -> float:
    """Total probability on basis states with unequal pair parities."""
    return float(np.sum(np.abs(psi[~_parity_mask(space)]) ** 2))


def evolve(space: Space, ham: HamiltonianModel, spec: EvolutionSpec, initial: np.ndarray,
           observer: Callable[[float, np.ndarray], Any] | None = None,
           keep_states: bool = False) -> TrajectoryResult:
    """Integrate from ``t = 0`` and record diagnostics at every sample time.

    ``observer(t, psi)``, when given, is called at each sample and its
    return values are collected in ``result.records``.
    """
    psi = np.array(initial, dtype=complex)
    if psi.shape != (space.dim,) or ham.dim != space.dim:
        raise ValueError(f"state/Hamiltonian dimension does not match space dim {space.dim}")
    n0 = float(np.vdot(psi, psi).real)
    if abs(n0 - 1.0) > 1e-12:
        raise ValueError(f"initial state is not normalised (norm^2 = {n0})")

    step = _STEPPERS[spec.method]
    mask = _parity_mask(space)
    result = TrajectoryResult(spec.method, spec.dt, tuple(space.cutoffs))
    t = 0.0
    for ts in spec.sample_times:
        span = ts - t
        nsub = math.ceil(span / spec.dt - 1e-9) if span > 0 else 0
        for k in range(nsub):
            h = span / nsub
            psi = step(ham, t + k * h, h, psi)
        t = ts

        prob = np.abs(psi) ** 2
        norm = float(prob.sum())
        result.times.append(ts)
        result.norms.append(norm)
        result.parity.append(float(prob[mask].sum()))
        result.outside.append(float(prob[~mask].sum()))
        leak = leakage(space, psi)
        result.leaks.append(leak)
        if keep_states:
            result.states.append(psi.copy())

        # the failing sample keeps its diagnostics but is not observed
        if not np.isfinite(norm) or abs(norm - 1.0) > spec.norm_tol * max(ts, 1.0):
            result.failed = True
            result.diagnostic = (f"norm drift {norm - 1.0:.3e} at t={ts:g} exceeds "
                                 f"{spec.norm_tol:g} per unit time (method {spec.method}, dt {spec.dt:g})")
            log.warning(result.diagnostic)
            break
        if observer is not None:
            result.records.append(observer(ts, psi))
        if max(leak) > spec.leak_threshold and not result.warnings:
            msg = (f"top Fock level population {max(leak):.3e} at t={ts:g} exceeds "
                   f"{spec.leak_threshold:g}; cutoffs {space.cutoffs} may be too small")
            result.warnings.append(msg)
            log.info(msg)
    return result


def leakage_report(result: TrajectoryResult) -> tuple[float, float, float]:
    """Peak top-level population per mode over the trajectory."""
    if result.failed:
        raise ValueError(f"trajectory failed: {result.diagnostic}")
    if not result.leaks:
        return (0.0, 0.0, 0.0)
    arr = np.asarray(result.leaks)
    return tuple(float(v) for v in arr.max(axis=0))


def write_trajectory_csv(path, result: TrajectoryResult, observable_columns=(),
                         provenance: dict | None = None) -> None:
    """CSV with ``t,norm,P_expect,leak1,leak2,leak3`` followed by observable columns.

    ``result.records`` must be mappings holding the observable columns; a
    failed sample without a record is left out.
    Provenance, if given, is written as leading ``#`` comment lines.
    """
    extra = [c for c in observable_columns if c not in ("t", "norm", "P_expect")]
    with open(path, "w", newline="") as fh:
        if provenance:
            for key, value in provenance.items():
                fh.write(f"# {key} = {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "norm", "P_expect", "leak1", "leak2", "leak3", *extra])
        n_rows = len(result.records) if extra else len(result.times)
        for i, t in enumerate(result.times[:n_rows]):
            rec = result.records[i] if extra else {}
            writer.writerow([_fmt(t), _fmt(result.norms[i]), _fmt(result.parity[i]),
                             *(_fmt(v) for v in result.leaks[i]),
                             *(_fmt(rec[c]) for c in extra)])


def _fmt(v) -> str:
    return repr(float(v))
