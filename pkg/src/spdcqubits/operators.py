"""Sparse operators on the mode-qubit product space.

All operators are ``scipy.sparse.csr_matrix`` in canonical form (sorted
column indices, no duplicates, explicit zeros removed), so that two builds
of the same operator are bit-identical.

Conventions (hbar = 1, unit masses):

* ``x = (a + a^dag)/sqrt(2)``, ``p = i(a^dag - a)/sqrt(2)``
* qubit level 0 is ``|g>``; ``sigma_z|g> = -|g>``; ``sigma_+ = |e><g|``
* ``S_axis = sigma_axis / 2``
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache, reduce
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .fockspace import ConfigError, Space, SpaceConfig

__all__ = [
    "canonical",
    "embed",
    "ladder",
    "quadratures",
    "pauli",
    "spin",
    "number",
    "is_hermitian",
    "hermiticity_error",
    "commutator_norm",
    "HamiltonianModel",
    "build_hamiltonian",
    "parity_projector",
    "OperatorSet",
    "dump_operator",
    "load_operator",
]

_SQRT2 = np.sqrt(2.0)

_QUBIT_MATRICES = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "+": np.array([[0, 0], [1, 0]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),
}


def canonical(op) -> sp.csr_matrix:
    """Return ``op`` as complex CSR with sorted indices and no stored zeros."""
    op = sp.csr_matrix(op, dtype=complex)
    op.sum_duplicates()
    op.eliminate_zeros()
    op.sort_indices()
    return op


def _check_site(i: int) -> int:
    if i not in (1, 2, 3):
        raise ValueError(f"site index must be 1, 2 or 3, got {i!r}")
    return i - 1


def embed(space: Space, factors: dict[int, np.ndarray]) -> sp.csr_matrix:
    """Kronecker product with ``factors[slot]`` at tensor slot ``slot`` (0..5),
    identity elsewhere. Even slots are modes, odd slots qubits."""
    mats = [
        sp.csr_matrix(factors[s]) if s in factors else sp.identity(d, format="csr", dtype=complex)
        for s, d in enumerate(space.factor_dims)
    ]
    return canonical(reduce(lambda a, b: sp.kron(a, b, format="csr"), mats))


def _lowering(n_max: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def ladder(space: Space, mode: int, raising: bool = False) -> sp.csr_matrix:
    """``a_i`` (or ``a_i^dag`` with ``raising=True``), hard-truncated at the cutoff."""
    m = _check_site(mode)
    a = _lowering(space.cutoffs[m])
    return embed(space, {2 * m: a.T if raising else a})


def number(space: Space, mode: int) -> sp.csr_matrix:
    m = _check_site(mode)
    return embed(space, {2 * m: np.diag(np.arange(space.cutoffs[m] + 1)).astype(complex)})


def quadratures(space: Space, mode: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    m = _check_site(mode)
    a = _lowering(space.cutoffs[m])
    x = (a + a.T) / _SQRT2
    p = 1j * (a.T - a) / _SQRT2
    return embed(space, {2 * m: x}), embed(space, {2 * m: p})


def pauli(space: Space, qubit: int, axis: str) -> sp.csr_matrix:
    """Pauli operator on one qubit; ``axis`` is one of ``x y z + -``."""
    m = _check_site(qubit)
    if axis not in _QUBIT_MATRICES:
        raise ValueError(f"unknown Pauli axis {axis!r}")
    return embed(space, {2 * m + 1: _QUBIT_MATRICES[axis]})


def spin(space: Space, qubit: int, axis: str) -> sp.csr_matrix:
    if axis not in ("x", "y", "z"):
        raise ValueError(f"spin axis must be x, y or z, got {axis!r}")
    return pauli(space, qubit, axis) * 0.5


def hermiticity_error(op) -> float:
    diff = op - op.conj().T
    return float(abs(diff).max()) if diff.nnz else 0.0


def is_hermitian(op, tol: float = 0.0) -> bool:
    return hermiticity_error(op) <= tol


def commutator_norm(a, b) -> float:
    """Largest absolute entry of ``ab - ba``."""
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    c = sp.csr_matrix(a @ b - b @ a)
    c.eliminate_zeros()
    return float(abs(c).max()) if c.nnz else 0.0


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """``H(t) = H0 + g0 cos(wd t) X3``."""

    static: sp.csr_matrix
    pump: sp.csr_matrix
    pump_coupling: float
    drive_freq: float

    def envelope(self, t: float) -> float:
        return self.pump_coupling * np.cos(self.drive_freq * t)

    def evaluate(self, t: float) -> sp.csr_matrix:
        return canonical(self.static + self.envelope(t) * self.pump)

    def apply(self, t: float, psi: np.ndarray) -> np.ndarray:
        out = self.static @ psi
        g = self.envelope(t)
        if g != 0.0:
            out += g * (self.pump @ psi)
        return out

    @cached_property
    def norm_bound(self) -> float:
        """Upper bound on ``||H(t)||_1`` valid for all t."""
        col = abs(self.static).sum(axis=0) + self.pump_coupling * abs(self.pump).sum(axis=0)
        return float(np.max(col))

    @property
    def dim(self) -> int:
        return self.static.shape[0]


def build_hamiltonian(space: Space, config: SpaceConfig) -> HamiltonianModel:
    if tuple(config.cutoffs) != tuple(space.cutoffs):
        raise ConfigError(f"config cutoffs {config.cutoffs} do not match space {space.cutoffs}")
    ops = OperatorSet.for_space(space)
    h0 = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for i in (1, 2, 3):
        w, big_w, g = (config.mode_freqs[i - 1], config.qubit_freqs[i - 1],
                       config.rabi_couplings[i - 1])
        h0 = h0 + w * ops.n(i) + (big_w / 2) * ops.sigma(i, "z")
        if g:
            h0 = h0 + g * ops.sigma(i, "x") @ ops.field(i)
    x3 = ops.field(1) @ ops.field(2) @ ops.field(3)
    return HamiltonianModel(canonical(h0), canonical(x3),
                            float(config.pump_coupling), float(config.drive_freq))


def parity_projector(space: Space, literal: bool = False) -> sp.csr_matrix:
    """Diagonal projector onto the dynamical subspace.

    The default keeps basis states whose pair parities ``(n_i + q_i) mod 2``
    are all equal. ``literal=True`` instead keeps states whose three photon
    numbers share one parity *and* whose three qubits share one level; this
    variant does not commute with the Rabi terms and is kept only for the
    negative check.
    """
    if literal:
        n_par = space.occupations % 2
        lev = space.levels
        keep = np.all(n_par == n_par[:, :1], axis=1) & np.all(lev == lev[:, :1], axis=1)
    else:
        par = space.pair_parities
        keep = np.all(par == par[:, :1], axis=1)
    return canonical(sp.diags(keep.astype(complex), format="csr"))


class OperatorSet:
    """Lazily built, cached single-site operators for one space."""

    def __init__(self, space: Space):
        self.space = space

    @staticmethod
    @lru_cache(maxsize=8)
    def for_space(space: Space) -> "OperatorSet":
        return OperatorSet(space)

    @lru_cache(maxsize=None)
    def a(self, i: int) -> sp.csr_matrix:
        return ladder(self.space, i)

    @lru_cache(maxsize=None)
    def adag(self, i: int) -> sp.csr_matrix:
        return ladder(self.space, i, raising=True)

    @lru_cache(maxsize=None)
    def n(self, i: int) -> sp.csr_matrix:
        return number(self.space, i)

    @lru_cache(maxsize=None)
    def field(self, i: int) -> sp.csr_matrix:
        """``a_i + a_i^dag``."""
        return canonical(self.a(i) + self.adag(i))

    @lru_cache(maxsize=None)
    def xp(self, i: int) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        return quadratures(self.space, i)

    def x(self, i: int) -> sp.csr_matrix:
        return self.xp(i)[0]

    def p(self, i: int) -> sp.csr_matrix:
        return self.xp(i)[1]

    @lru_cache(maxsize=None)
    def sigma(self, i: int, axis: str) -> sp.csr_matrix:
        return pauli(self.space, i, axis)

    @lru_cache(maxsize=None)
    def S(self, i: int, axis: str) -> sp.csr_matrix:
        return spin(self.space, i, axis)

    @lru_cache(maxsize=None)
    def excited(self, i: int) -> sp.csr_matrix:
        """``sigma_+ sigma_-`` on qubit i."""
        return canonical(self.sigma(i, "+") @ self.sigma(i, "-"))

    @cached_property
    def P(self) -> sp.csr_matrix:
        return parity_projector(self.space)


def dump_operator(op, path) -> None:
    """Write nonzeros as ``row col re im`` lines in canonical row-major order."""
    op = canonical(op)
    rows = np.repeat(np.arange(op.shape[0]), np.diff(op.indptr))
    with open(path, "w") as fh:
        fh.write(f"# dim {op.shape[0]}\n")
        for r, c, v in zip(rows, op.indices, op.data):
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")


def load_operator(path) -> sp.csr_matrix:
    text = Path(path).read_text().splitlines()
    dim = int(text[0].split()[2])
    rows, cols, vals = [], [], []
    for line in text[1:]:
        r, c, re, im = line.split()
        rows.append(int(r))
        cols.append(int(c))
        vals.append(complex(float(re), float(im)))
    return canonical(sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)))
