"""Composite Hilbert space of three (bosonic mode, qubit) pairs.

Basis states are ordered lexicographically over ``(n1, q1, n2, q2, n3, q3)``
with each mode adjacent to its qubit, so the flat index is

    k = ((((n1*2 + q1)*(N2+1) + n2)*2 + q2)*(N3+1) + n3)*2 + q3

Qubit level 0 is the ground state ``|g>`` and 1 the excited state ``|e>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np

__all__ = [
    "ConfigError",
    "SpaceConfig",
    "BasisIndex",
    "Space",
    "build_space",
    "vacuum_state",
    "pair_parity",
]


class ConfigError(ValueError):
    """Invalid physical or numerical configuration."""


@dataclass(frozen=True)
class SpaceConfig:
    """Truncation cutoffs and physical parameters, in units of ``omega1``.

    ``drive_freq`` defaults to the sum of the mode frequencies.
    """

    cutoffs: tuple[int, int, int] = (6, 6, 6)
    mode_freqs: tuple[float, float, float] = (1.0, 2.0, 1.0)
    qubit_freqs: tuple[float, float, float] = (1.0, 2.0, 1.0)
    rabi_couplings: tuple[float, float, float] = (0.01, 0.01, 0.01)
    pump_coupling: float = 0.1
    drive_freq: float | None = None

    def __post_init__(self):
        for name in ("cutoffs", "mode_freqs", "qubit_freqs", "rabi_couplings"):
            value = tuple(getattr(self, name))
            if len(value) != 3:
                raise ConfigError(f"{name} needs exactly 3 entries, got {len(value)}")
            object.__setattr__(self, name, value)
        if any(int(n) != n or n < 1 for n in self.cutoffs):
            raise ConfigError(f"cutoffs must be integers >= 1, got {self.cutoffs}")
        object.__setattr__(self, "cutoffs", tuple(int(n) for n in self.cutoffs))
        if any(w <= 0 for w in self.mode_freqs):
            raise ConfigError(f"mode frequencies must be positive, got {self.mode_freqs}")
        if any(w <= 0 for w in self.qubit_freqs):
            raise ConfigError(f"qubit frequencies must be positive, got {self.qubit_freqs}")
        if any(g < 0 for g in self.rabi_couplings):
            raise ConfigError(f"Rabi couplings must be >= 0, got {self.rabi_couplings}")
        if self.pump_coupling < 0:
            raise ConfigError(f"pump coupling must be >= 0, got {self.pump_coupling}")
        if self.drive_freq is None:
            object.__setattr__(self, "drive_freq", float(sum(self.mode_freqs)))
        elif self.drive_freq <= 0:
            raise ConfigError(f"drive frequency must be positive, got {self.drive_freq}")

    def replace(self, **changes) -> "SpaceConfig":
        """Copy with fields changed.

        The drive frequency is recomputed from the new mode frequencies
        unless it is given explicitly or was overridden before.
        """
        values = {
            "cutoffs": self.cutoffs,
            "mode_freqs": self.mode_freqs,
            "qubit_freqs": self.qubit_freqs,
            "rabi_couplings": self.rabi_couplings,
            "pump_coupling": self.pump_coupling,
            "drive_freq": None if self.drive_freq == sum(self.mode_freqs) else self.drive_freq,
        }
        values.update(changes)
        return SpaceConfig(**values)


class BasisIndex(NamedTuple):
    n1: int
    q1: int
    n2: int
    q2: int
    n3: int
    q3: int

    @property
    def occupations(self) -> tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)

    @property
    def levels(self) -> tuple[int, int, int]:
        return (self.q1, self.q2, self.q3)


@dataclass(frozen=True, eq=False)
class Space:
    """Immutable handle on the truncated product basis."""

    cutoffs: tuple[int, int, int]
    _factor_dims: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        dims = []
        for n in self.cutoffs:
            dims += [n + 1, 2]
        object.__setattr__(self, "_factor_dims", tuple(dims))

    @property
    def dim(self) -> int:
        return int(np.prod(self._factor_dims))

    @property
    def factor_dims(self) -> tuple[int, ...]:
        """Dimensions of the six tensor factors in index order."""
        return self._factor_dims

    def flat(self, index) -> int:
        n1, q1, n2, q2, n3, q3 = index
        N = self.cutoffs
        if not (0 <= n1 <= N[0] and 0 <= n2 <= N[1] and 0 <= n3 <= N[2]):
            raise IndexError(f"occupation out of range in {tuple(index)} for cutoffs {N}")
        if not all(q in (0, 1) for q in (q1, q2, q3)):
            raise IndexError(f"qubit level must be 0 or 1 in {tuple(index)}")
        return ((((n1 * 2 + q1) * (N[1] + 1) + n2) * 2 + q2) * (N[2] + 1) + n3) * 2 + q3

    def unflat(self, k: int) -> BasisIndex:
        if not 0 <= k < self.dim:
            raise IndexError(f"flat index {k} out of range [0, {self.dim})")
        digits = []
        for d in reversed(self._factor_dims):
            k, r = divmod(k, d)
            digits.append(r)
        return BasisIndex(*map(int, reversed(digits)))

    @cached_property
    def labels(self) -> np.ndarray:
        """``(dim, 6)`` integer array of ``(n1, q1, n2, q2, n3, q3)`` per basis state."""
        grids = np.indices(self._factor_dims).reshape(6, -1)
        labels = grids.T.copy()
        labels.setflags(write=False)
        return labels

    @property
    def occupations(self) -> np.ndarray:
        """``(dim, 3)`` photon numbers."""
        return self.labels[:, 0::2]

    @property
    def levels(self) -> np.ndarray:
        """``(dim, 3)`` qubit levels."""
        return self.labels[:, 1::2]

    @cached_property
    def pair_parities(self) -> np.ndarray:
        """``(dim, 3)`` array of ``(n_i + q_i) mod 2``."""
        par = (self.occupations + self.levels) % 2
        par.setflags(write=False)
        return par


def build_space(config: SpaceConfig | tuple[int, int, int]) -> Space:
    """Build the product basis for a configuration or a bare cutoff triple."""
    cutoffs = config.cutoffs if isinstance(config, SpaceConfig) else tuple(config)
    if len(cutoffs) != 3 or any(int(n) != n or n < 1 for n in cutoffs):
        raise ConfigError(f"cutoffs must be three integers >= 1, got {cutoffs}")
    return Space(tuple(int(n) for n in cutoffs))


def vacuum_state(space: Space) -> np.ndarray:
    """The state ``|0g 0g 0g>``."""
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.flat((0, 0, 0, 0, 0, 0))] = 1.0
    return psi


def pair_parity(index) -> tuple[int, int, int]:
    n1, q1, n2, q2, n3, q3 = index
    return ((n1 + q1) % 2, (n2 + q2) % 2, (n3 + q3) % 2)
