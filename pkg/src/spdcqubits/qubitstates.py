"""Three-qubit reference states and the two-qubit z-covariance bound.

Qubit basis ordering matches the full simulator: qubit 1 is the most
significant bit and level 0 is the ground state ``|g>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from itertools import product

import numpy as np

from .observables import PAIRS, witness_terms

__all__ = [
    "REFERENCE_KINDS",
    "QubitDensityMatrix",
    "SpinMoments",
    "make_reference",
    "spin_moments",
    "dv_witness",
    "zcov_formula",
    "zcov_direct",
    "zcov_maximize",
    "separable_zcov_max",
    "random_pure_two_qubit",
]

_SIG = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "-": np.array([[0, 1], [0, 0]], dtype=complex),
    "+": np.array([[0, 0], [1, 0]], dtype=complex),
}
_KET = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))

REFERENCE_KINDS = ("ghz", "w", "mimic_ghz", "dephased_ghz", "mixed")


def _kron(*mats):
    return reduce(np.kron, mats)


def _site_op(n: int, site: int, m: np.ndarray) -> np.ndarray:
    return _kron(*(m if s == site else np.eye(2) for s in range(1, n + 1)))


@dataclass
class QubitDensityMatrix:
    """Density matrix on 2 or 3 qubits.

    ``decomposition`` optionally lists ``(weight, (ket_1, ..., ket_n))``
    product terms; when present it certifies separability.
    """

    matrix: np.ndarray
    name: str = ""
    decomposition: list[tuple[float, tuple[np.ndarray, ...]]] | None = field(default=None, repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape not in ((4, 4), (8, 8)):
            raise ValueError(f"expected a 4x4 or 8x8 matrix, got {m.shape}")
        if abs(np.trace(m) - 1) > 1e-12:
            raise ValueError(f"trace is {np.trace(m)}, not 1")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("matrix has a negative eigenvalue")
        self.matrix = m

    @property
    def n_qubits(self) -> int:
        return int(np.log2(self.matrix.shape[0]))

    def expect(self, op: np.ndarray) -> complex:
        return complex(np.trace(self.matrix @ op))

    def rebuild_from_decomposition(self) -> np.ndarray:
        if self.decomposition is None:
            raise ValueError(f"{self.name or 'state'} carries no product decomposition")
        out = np.zeros_like(self.matrix)
        for w, kets in self.decomposition:
            v = _kron(*kets)
            out += w * np.outer(v, v.conj())
        return out

    @property
    def is_pure(self) -> bool:
        return abs(np.trace(self.matrix @ self.matrix).real - 1) < 1e-12


def _pure(v, name):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return QubitDensityMatrix(np.outer(v, v.conj()), name)


def _from_terms(terms, name):
    rho = np.zeros((8, 8), dtype=complex)
    for w, kets in terms:
        v = _kron(*kets)
        rho += w * np.outer(v, v.conj())
    return QubitDensityMatrix(rho, name, terms)


def make_reference(kind: str) -> QubitDensityMatrix:
    """Reference three-qubit states.

    ``mimic_ghz`` is the separable mixture::

        1/12 (|0_a><0_a| + |1_a><1_a|) (x) (|0_b 0_c><..| + |1_b 1_c><..|)

    summed over ``(a; b, c) = (1; 2,3), (2; 1,3), (3; 1,2)``.
    ``dephased_ghz`` is ``(|000><000| + |111><111|)/2``.
    """
    kind = kind.lower()
    if kind == "ghz":
        v = np.zeros(8)
        v[0] = v[7] = 1
        return _pure(v, "ghz")
    if kind == "w":
        v = np.zeros(8)
        v[[4, 2, 1]] = 1  # |egg>, |geg>, |gge>
        return _pure(v, "w")
    if kind == "mimic_ghz":
        terms = []
        for a, b, c in ((1, 2, 3), (2, 1, 3), (3, 1, 2)):
            for qa, qbc in product((0, 1), repeat=2):
                levels = {a: qa, b: qbc, c: qbc}
                terms.append((1 / 12, tuple(_KET[levels[s]] for s in (1, 2, 3))))
        return _from_terms(terms, "mimic_ghz")
    if kind == "dephased_ghz":
        return _from_terms([(0.5, (_KET[q],) * 3) for q in (0, 1)], "dephased_ghz")
    if kind == "mixed":
        terms = [(1 / 8, tuple(_KET[q] for q in bits)) for bits in product((0, 1), repeat=3)]
        return _from_terms(terms, "mixed")
    raise ValueError(f"unknown reference state {kind!r}; choose from {REFERENCE_KINDS}")


@dataclass
class SpinMoments:
    """``mean[i][axis]`` and ``cov[axis][(i, j)]`` for ``S = sigma/2``."""

    mean: dict[int, dict[str, float]]
    cov: dict[str, dict[tuple[int, int], float]]

    def flat(self) -> dict[str, float]:
        out = {}
        for i, axes in self.mean.items():
            for ax, v in axes.items():
                out[f"<S{ax}{i}>"] = v
        for ax, pairs in self.cov.items():
            for (i, j), v in pairs.items():
                out[f"Δ²S{ax}{i}S{ax}{j}"] = v
        return out


def _coerce(rho) -> QubitDensityMatrix:
    if isinstance(rho, QubitDensityMatrix):
        return rho
    return QubitDensityMatrix(np.asarray(rho))


def spin_moments(rho) -> SpinMoments:
    rho = _coerce(rho)
    n = rho.n_qubits
    sites = range(1, n + 1)
    pairs = [(i, j) for i in sites for j in sites if i < j]
    S = {(i, ax): _site_op(n, i, _SIG[ax] / 2) for i in sites for ax in "xyz"}
    mean = {i: {ax: rho.expect(S[i, ax]).real for ax in "xyz"} for i in sites}
    cov = {ax: {(i, j): rho.expect(S[i, ax] @ S[j, ax]).real - mean[i][ax] * mean[j][ax]
                for i, j in pairs}
           for ax in "xyz"}
    return SpinMoments(mean, cov)


def dv_witness(rho) -> float:
    """``G_DV`` evaluated on a three-qubit density matrix."""
    rho = _coerce(rho)
    if rho.n_qubits != 3:
        raise ValueError("G_DV needs three qubits")
    sm = _site_op(3, 1, _SIG["-"]) @ _site_op(3, 2, _SIG["-"]) @ _site_op(3, 3, _SIG["-"])
    exc = {i: _site_op(3, i, _SIG["+"] @ _SIG["-"]) for i in (1, 2, 3)}
    singles = [rho.expect(exc[i]).real for i in (1, 2, 3)]
    pairs = {(j, k): rho.expect(exc[j] @ exc[k]).real for j, k in PAIRS}
    return abs(rho.expect(sm)) - max(witness_terms(singles, pairs))


def _coeffs(c) -> np.ndarray:
    c = np.asarray(c, dtype=complex).reshape(-1)
    if c.shape != (4,):
        raise ValueError("two-qubit state needs 4 coefficients (c00, c01, c10, c11)")
    if abs(np.vdot(c, c).real - 1) > 1e-12:
        raise ValueError("two-qubit state is not normalised")
    return c


def zcov_formula(c) -> float:
    """Closed form of ``Δ²S_z1 S_z2`` for a pure two-qubit state ``(c00, c01, c10, c11)``."""
    p00, p01, p10, p11 = np.abs(_coeffs(c)) ** 2
    return float((1 - p10 - p01) * p11 - p11 ** 2 - p01 * p10)


def zcov_direct(c) -> float:
    c = _coeffs(c)
    return spin_moments(np.outer(c, c.conj())).cov["z"][1, 2]


def _zcov_probs(p):
    """Vectorised closed form on rows of squared magnitudes ``(p00, p01, p10, p11)``."""
    p = np.atleast_2d(p)
    return (1 - p[:, 2] - p[:, 1]) * p[:, 3] - p[:, 3] ** 2 - p[:, 1] * p[:, 2]


def random_pure_two_qubit(rng, size: int) -> np.ndarray:
    v = rng.normal(size=(size, 4)) + 1j * rng.normal(size=(size, 4))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _hill_climb(mags, rng, iters=4000, step=0.1, min_step=1e-10):
    """Maximise over nonnegative magnitudes; phases do not enter the formula."""
    best = mags / np.linalg.norm(mags)
    fbest = _zcov_probs(best ** 2)[0]
    while step > min_step and iters > 0:
        improved = False
        for _ in range(20):
            iters -= 1
            trial = np.abs(best + step * rng.normal(size=4))
            nrm = np.linalg.norm(trial)
            if nrm == 0:
                continue
            trial /= nrm
            f = _zcov_probs(trial ** 2)[0]
            if f > fbest:
                best, fbest, improved = trial, f, True
                break
        if not improved:
            step /= 2
    return fbest, best


def zcov_maximize(samples: int, seed: int = 0, start=None) -> tuple[float, np.ndarray]:
    """Brute-force maximum of ``Δ²S_z1 S_z2`` over pure two-qubit states.

    Draws ``samples`` Haar-random states (plus ``start`` if given), then
    hill-climbs from the best one on the coefficient magnitudes.
    Returns ``(value, argmax coefficients)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    if start is not None:
        cands = np.vstack([_coeffs(start)[None, :], random_pure_two_qubit(rng, samples - 1)])
    else:
        cands = random_pure_two_qubit(rng, samples)
    vals = _zcov_probs(np.abs(cands) ** 2)
    k = int(np.argmax(vals))
    f, mags = _hill_climb(np.abs(cands[k]), rng)
    if f < vals[k]:
        return float(vals[k]), cands[k]
    phases = np.exp(1j * np.angle(cands[k]))
    return float(f), mags * phases


def separable_zcov_max(samples: int, seed: int = 0, max_terms: int = 4) -> float:
    """Largest ``|Δ²S_z1 S_z2|`` over random separable two-qubit mixtures.

    Each sample mixes up to ``max_terms`` random pure product states with
    random weights.
    """
    rng = np.random.default_rng(seed)
    best = 0.0
    batch = 10_000
    done = 0
    while done < samples:
        m = min(batch, samples - done)
        k = rng.integers(1, max_terms + 1, size=m)
        w = rng.random((m, max_terms)) * (np.arange(max_terms) < k[:, None])
        w /= w.sum(axis=1, keepdims=True)
        # P(excited) for each qubit of each product term
        e1 = rng.random((m, max_terms))
        e2 = rng.random((m, max_terms))
        mean1 = (w * e1).sum(axis=1)
        mean2 = (w * e2).sum(axis=1)
        joint = (w * e1 * e2).sum(axis=1)
        best = max(best, float(np.abs(joint - mean1 * mean2).max()))
        done += m
    return best
