"""Moments, covariances, covariance rates and tripartite witnesses.

Witnesses, for splittings ``i|jk`` in the fixed order ``1|23, 2|13, 3|12``::

    G_CV  = |<a1 a2 a3>| - max_i sqrt(<n_i> <n_j n_k>)
    G'_CV = |<a1 a2 a3>| - sum_i sqrt(<n_i> <n_j n_k>)
    G_DV  = |<s-1 s-2 s-3>| - max_i sqrt(<e_i> <e_j e_k>)

with ``n_i = a_i^dag a_i`` and ``e_i = sigma+_i sigma-_i``. A positive value
certifies genuine tripartite entanglement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fockspace import SpaceConfig, build_space
from .operators import HamiltonianModel, OperatorSet, build_hamiltonian

__all__ = [
    "PAIRS",
    "SPLITTINGS",
    "OBSERVABLE_COLUMNS",
    "NumericalSanityError",
    "MomentSet",
    "CovarianceSet",
    "WitnessValues",
    "ObservableRecord",
    "expect",
    "moments",
    "covariances",
    "witness_terms",
    "witness_cv",
    "witness_dv",
    "zero_moments",
    "exact_rates",
    "printed_rates",
    "AuditRow",
    "rate_audit",
    "observe",
]

PAIRS = ((1, 2), (1, 3), (2, 3))
SPLITTINGS = ((1, 2, 3), (2, 1, 3), (3, 1, 2))
COV_KINDS = ("x", "p", "Sx", "Sy", "Sz")

OBSERVABLE_COLUMNS = (
    "t", "g0", "G_CV", "G_CV_prime", "G_DV",
    *(f"Δ²{kind}{i}{j}" for kind in COV_KINDS for i, j in PAIRS),
    "P_expect", "norm",
)

NEG_TOL = 1e-12


class NumericalSanityError(ArithmeticError):
    """A quantity that must be nonnegative came out clearly negative."""


def expect(op, psi: np.ndarray) -> complex:
    return complex(np.vdot(psi, op @ psi))


def _check_norm(psi, tol):
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalised: <psi|psi> = {norm!r}")


@dataclass
class MomentSet:
    """Expectation values of one state. Site-indexed arrays use index i-1."""

    a: np.ndarray
    sigma_minus: np.ndarray
    sigma_plus: np.ndarray
    x: np.ndarray
    p: np.ndarray
    spin: np.ndarray  # (3, 3): [site, axis x/y/z]
    n: np.ndarray
    nn: dict[tuple[int, int], complex]
    a123: complex
    excited: np.ndarray
    excited_pair: dict[tuple[int, int], complex]
    sm123: complex


def moments(ops: OperatorSet, psi: np.ndarray, norm_tol: float = 1e-6) -> MomentSet:
    _check_norm(psi, norm_tol)
    prob = np.abs(psi) ** 2
    occ = ops.space.occupations
    lev = ops.space.levels

    def site(fn):
        return np.array([fn(i) for i in (1, 2, 3)])

    return MomentSet(
        a=site(lambda i: expect(ops.a(i), psi)),
        sigma_minus=site(lambda i: expect(ops.sigma(i, "-"), psi)),
        sigma_plus=site(lambda i: expect(ops.sigma(i, "+"), psi)),
        x=site(lambda i: expect(ops.x(i), psi)),
        p=site(lambda i: expect(ops.p(i), psi)),
        spin=np.array([[expect(ops.S(i, ax), psi) for ax in "xyz"] for i in (1, 2, 3)]),
        # number and excitation operators are diagonal in the product basis
        n=np.array([complex(prob @ occ[:, i]) for i in range(3)]),
        nn={(j, k): complex(prob @ (occ[:, j - 1] * occ[:, k - 1])) for j, k in PAIRS},
        a123=expect(ops.a(1) @ ops.a(2) @ ops.a(3), psi),
        excited=np.array([complex(prob @ lev[:, i]) for i in range(3)]),
        excited_pair={(j, k): complex(prob @ (lev[:, j - 1] * lev[:, k - 1])) for j, k in PAIRS},
        sm123=expect(ops.sigma(1, "-") @ ops.sigma(2, "-") @ ops.sigma(3, "-"), psi),
    )


@dataclass
class CovarianceSet:
    """``cross[kind][(i, j)]`` for i < j and ``variance[kind][i]``.

    Cross-subsystem factors commute; same-site variances use the
    symmetrised product.
    """

    cross: dict[str, dict[tuple[int, int], complex]]
    variance: dict[str, dict[int, complex]]

    def __getitem__(self, key):
        kind, pair = key
        return self.cross[kind][pair]


def _site_ops(ops: OperatorSet, kind: str, i: int):
    if kind == "x":
        return ops.x(i)
    if kind == "p":
        return ops.p(i)
    return ops.S(i, kind[1].lower())


def covariances(ops: OperatorSet, psi: np.ndarray, norm_tol: float = 1e-6) -> CovarianceSet:
    _check_norm(psi, norm_tol)
    cross, variance = {}, {}
    for kind in COV_KINDS:
        applied = {i: _site_ops(ops, kind, i) @ psi for i in (1, 2, 3)}
        mean = {i: complex(np.vdot(psi, applied[i])) for i in (1, 2, 3)}
        # <O_i O_j> = <O_i psi | O_j psi> for Hermitian O_i
        cross[kind] = {(i, j): complex(np.vdot(applied[i], applied[j])) - mean[i] * mean[j]
                       for i, j in PAIRS}
        variance[kind] = {i: complex(np.vdot(applied[i], applied[i]).real) - mean[i] ** 2
                          for i in (1, 2, 3)}
    return CovarianceSet(cross, variance)


def _nonneg(value, what):
    v = float(np.real(value))
    if v < -NEG_TOL:
        raise NumericalSanityError(f"{what} = {v!r} is negative beyond {NEG_TOL}")
    return max(v, 0.0)


def witness_terms(singles, pairs) -> list[float]:
    """``sqrt(<O_i> <O_j O_k>)`` for the splittings 1|23, 2|13, 3|12."""
    out = []
    for i, j, k in SPLITTINGS:
        s = _nonneg(singles[i - 1], f"single occupation {i}")
        d = _nonneg(pairs[(j, k)], f"pair occupation {j}{k}")
        out.append(float(np.sqrt(s * d)))
    return out


def witness_cv(m: MomentSet) -> tuple[float, float]:
    """``(G_CV, G'_CV)``."""
    terms = witness_terms(m.n, m.nn)
    head = abs(m.a123)
    return head - max(terms), head - sum(terms)


def witness_dv(m: MomentSet) -> float:
    terms = witness_terms(m.excited, m.excited_pair)
    return abs(m.sm123) - max(terms)


@dataclass
class WitnessValues:
    G_CV: float
    G_CV_prime: float
    G_DV: float


def zero_moments(ops: OperatorSet, psi: np.ndarray) -> dict[str, complex]:
    """Single, pair and triplet ladder moments that vanish in the dynamical subspace."""
    a = {i: ops.a(i) for i in (1, 2, 3)}
    ad = {i: ops.adag(i) for i in (1, 2, 3)}
    sgm = {(i, s): ops.sigma(i, s) for i in (1, 2, 3) for s in "+-"}
    out = {}
    for i in (1, 2, 3):
        out[f"<a{i}>"] = expect(a[i], psi)
        out[f"<a{i}^dag>"] = expect(ad[i], psi)
        out[f"<s+{i}>"] = expect(sgm[i, "+"], psi)
        out[f"<s-{i}>"] = expect(sgm[i, "-"], psi)
    for i in (1, 2, 3):
        for j in (1, 2, 3):
            if i == j:
                continue
            if i < j:
                out[f"<a{i} a{j}>"] = expect(a[i] @ a[j], psi)
                out[f"<a{i}^dag a{j}^dag>"] = expect(ad[i] @ ad[j], psi)
                for s in "+-":
                    for r in "+-":
                        out[f"<s{s}{i} s{r}{j}>"] = expect(sgm[i, s] @ sgm[j, r], psi)
            out[f"<a{i}^dag a{j}>"] = expect(ad[i] @ a[j], psi)
            out[f"<a{i} a{j}^dag>"] = expect(a[i] @ ad[j], psi)
            for s in "+-":
                out[f"<a{i} s{s}{j}>"] = expect(a[i] @ sgm[j, s], psi)
                out[f"<a{i}^dag s{s}{j}>"] = expect(ad[i] @ sgm[j, s], psi)
            out[f"<a{i}^dag a{i} a{j}>"] = expect(ad[i] @ a[i] @ a[j], psi)
    return out


def exact_rates(ops: OperatorSet, ham: HamiltonianModel, psi: np.ndarray, t: float,
                second_moment: bool = False) -> dict[tuple[str, tuple[int, int]], float]:
    """``d/dt`` of every tracked cross covariance from the Heisenberg equation.

    Uses ``d<A>/dt = <[A, H]>/i = 2 Im <A psi | H psi>`` for Hermitian A,
    applied to ``O_i O_j``, ``O_i`` and ``O_j``. With ``second_moment=True``
    the rate of ``<O_i O_j>`` alone is returned.
    """
    hpsi = ham.apply(t, psi)
    out = {}
    for kind in COV_KINDS:
        applied = {i: _site_ops(ops, kind, i) @ psi for i in (1, 2, 3)}
        mean = {i: np.vdot(psi, applied[i]).real for i in (1, 2, 3)}
        dmean = {i: 2 * np.vdot(applied[i], hpsi).imag for i in (1, 2, 3)}
        for i, j in PAIRS:
            prod = _site_ops(ops, kind, i) @ applied[j]
            rate = 2 * np.vdot(prod, hpsi).imag
            if not second_moment:
                rate -= dmean[i] * mean[j] + mean[i] * dmean[j]
            out[kind, (i, j)] = float(rate)
    return out


PRINTED_FORMULAS = ("x", "p", "Sx", "Sy_short", "Sy_extended", "Sz")


def printed_rates(ops: OperatorSet, ham: HamiltonianModel, config: SpaceConfig,
                  psi: np.ndarray, t: float, x_reading: str = "quadrature"
                  ) -> dict[tuple[str, tuple[int, int]], complex]:
    """Evaluate the closed-form covariance rates exactly as written.

    ``Sy_short`` is the two-term S_y rate and ``Sy_extended`` adds the
    ``x sigma_y sigma_z`` corrections. Masses and hbar are set to 1. ``x_reading`` selects what ``x_i`` means
    inside the formulas: ``"quadrature"`` is ``(a + a^dag)/sqrt 2`` as used
    everywhere else here, ``"field"`` is ``a + a^dag`` as in the Rabi term
    of the Hamiltonian.
    """
    if x_reading == "quadrature":
        X = {i: ops.x(i) for i in (1, 2, 3)}
    elif x_reading == "field":
        X = {i: ops.field(i) for i in (1, 2, 3)}
    else:
        raise ValueError(f"unknown x_reading {x_reading!r}")
    P = {i: ops.p(i) for i in (1, 2, 3)}
    sx = {i: ops.sigma(i, "x") for i in (1, 2, 3)}
    sy = {i: ops.sigma(i, "y") for i in (1, 2, 3)}
    sz = {i: ops.sigma(i, "z") for i in (1, 2, 3)}
    w = dict(zip((1, 2, 3), config.mode_freqs))
    om = dict(zip((1, 2, 3), config.qubit_freqs))
    g = dict(zip((1, 2, 3), config.rabi_couplings))
    gt = ham.envelope(t)

    def e(op):
        return expect(op, psi)

    out = {}
    for i, j in PAIRS:
        k = 6 - i - j
        out["x", (i, j)] = (e(X[i] @ P[j] + X[j] @ P[i]) - e(X[i]) * e(P[j]) - e(P[i]) * e(X[j]))
        out["p", (i, j)] = (
            -e(w[j] ** 2 * P[i] @ X[j] + w[i] ** 2 * X[i] @ P[j])
            - 1j * e(g[j] * sx[j] @ P[i] + g[i] * sx[i] @ P[j])
            - gt * e(P[i] @ X[i] @ X[k] + X[j] @ P[j] @ X[k])
            + e(w[i] ** 2 * X[i] + g[i] * sx[i] + gt * X[j] @ X[k]) * e(P[j])
            + e(w[j] ** 2 * X[j] + g[j] * sx[j] + gt * X[i] @ X[k]) * e(P[i])
        )
        sxy = e(sx[i] @ sy[j])
        syx = e(sy[i] @ sx[j])
        out["Sx", (i, j)] = om[i] * sxy + om[j] * syx
        out["Sy_short", (i, j)] = om[j] * syx + om[i] * sxy
        out["Sy_extended", (i, j)] = (om[j] * syx + om[i] * sxy
                                      - 2 * g[j] * e(X[j] @ sy[i] @ sz[j])
                                      - 2 * g[i] * e(X[i] @ sz[i] @ sy[j]))
        out["Sz", (i, j)] = (g[j] / 2 * e(sz[i] @ X[j] @ sy[j])
                             + g[i] / 2 * e(X[i] @ sy[i] @ sz[j]))
    return out


_FORMULA_KIND = {"x": "x", "p": "p", "Sx": "Sx", "Sy_short": "Sy", "Sy_extended": "Sy", "Sz": "Sz"}


@dataclass
class AuditRow:
    """Comparison of one printed formula against the exact rate.

    ``scale`` is the least-squares factor ``c`` in ``exact ~ c * printed``
    and ``residual`` the relative misfit after scaling. ``exact_match``
    means the formula is right as printed.
    """

    formula: str
    pair: tuple[int, int]
    x_reading: str
    target: str
    scale: complex
    residual: float
    raw_error: float

    @property
    def proportional(self) -> bool:
        return self.residual <= 1e-9

    @property
    def exact_match(self) -> bool:
        return self.raw_error <= 1e-9


def _random_state(rng, dim):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def rate_audit(config: SpaceConfig | None = None, n_states: int = 12, seed: int = 7,
               t: float = 0.3) -> list[AuditRow]:
    """Check every printed rate formula on random generic states.

    Generic states are needed: on the vacuum trajectory every x, p, S_x and
    S_y rate vanishes identically, which cannot tell formulas apart.
    Each formula is compared against both the covariance rate and the rate
    of the bare second moment ``<O_i O_j>``.
    """
    if config is None:
        config = SpaceConfig(cutoffs=(2, 2, 2), pump_coupling=0.3,
                             rabi_couplings=(0.05, 0.07, 0.11))
    space = build_space(config)
    ops = OperatorSet(space)
    ham = build_hamiltonian(space, config)
    rng = np.random.default_rng(seed)
    states = [_random_state(rng, space.dim) for _ in range(n_states)]
    exact = {"covariance": [exact_rates(ops, ham, s, t) for s in states],
             "second_moment": [exact_rates(ops, ham, s, t, second_moment=True) for s in states]}
    rows = []
    for reading in ("quadrature", "field"):
        printed = [printed_rates(ops, ham, config, s, t, reading) for s in states]
        for formula in PRINTED_FORMULAS:
            for pair in PAIRS:
                pv = np.array([pr[formula, pair] for pr in printed])
                for target, ex in exact.items():
                    ev = np.array([e[_FORMULA_KIND[formula], pair] for e in ex])
                    denom = np.vdot(pv, pv).real
                    c = np.vdot(pv, ev) / denom if denom > 0 else 0.0
                    scale_ref = max(np.linalg.norm(ev), 1e-300)
                    rows.append(AuditRow(
                        formula, pair, reading, target, complex(c),
                        float(np.linalg.norm(ev - c * pv) / scale_ref),
                        float(np.linalg.norm(ev - pv) / scale_ref),
                    ))
    return rows


@dataclass
class ObservableRecord:
    t: float
    g0: float
    witnesses: WitnessValues
    covariances: CovarianceSet
    moments: MomentSet
    P_expect: float
    norm: float
    extras: dict = field(default_factory=dict)

    def row(self) -> dict[str, float]:
        out = {"t": self.t, "g0": self.g0, "G_CV": self.witnesses.G_CV,
               "G_CV_prime": self.witnesses.G_CV_prime, "G_DV": self.witnesses.G_DV}
        for kind in COV_KINDS:
            for i, j in PAIRS:
                out[f"Δ²{kind}{i}{j}"] = float(np.real(self.covariances.cross[kind][i, j]))
        out["P_expect"] = self.P_expect
        out["norm"] = self.norm
        return out

    def __getitem__(self, column):
        return self.row()[column]


def observe(ops: OperatorSet, psi: np.ndarray, t: float, g0: float,
            norm_tol: float = 1e-6) -> ObservableRecord:
    """Full observable bundle for one sample."""
    prob = np.abs(psi) ** 2
    par = ops.space.pair_parities
    mask = np.all(par == par[:, :1], axis=1)
    m = moments(ops, psi, norm_tol)
    cv, cvp = witness_cv(m)
    return ObservableRecord(
        t=float(t), g0=float(g0),
        witnesses=WitnessValues(cv, cvp, witness_dv(m)),
        covariances=covariances(ops, psi, norm_tol),
        moments=m,
        P_expect=float(prob[mask].sum()),
        norm=float(prob.sum()),
    )
