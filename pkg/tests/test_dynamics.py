import numpy as np
import pytest
from scipy.integrate import solve_ivp

from spdcqubits.dynamics import (EvolutionSpec, evolve, leakage, leakage_report,
                                 midpoint_expm_step, outside_probability, parity_expectation,
                                 rk4_step, write_trajectory_csv)
from spdcqubits.fockspace import ConfigError, SpaceConfig, build_space, vacuum_state
from spdcqubits.operators import build_hamiltonian

from conftest import random_state


def _reference_solution(ham, psi0, t_final):
    sol = solve_ivp(lambda t, y: -1j * ham.apply(t, y), (0, t_final), psi0.astype(complex),
                    method="DOP853", rtol=1e-12, atol=1e-13)
    return sol.y[:, -1]


@pytest.mark.parametrize("method, tol", [("a", 1e-8), ("b", 1e-6)])
def test_matches_adaptive_reference(small_system, method, tol, rng):
    space, _, ham = small_system
    psi0 = random_state(rng, space.dim)
    ref = _reference_solution(ham, psi0, 1.5)
    res = evolve(space, ham, EvolutionSpec(1.5, method=method, dt=1e-3), psi0, keep_states=True)
    assert np.linalg.norm(res.final_state - ref) < tol


@pytest.mark.parametrize("method, order", [("a", 4), ("b", 2)])
def test_convergence_order(small_system, method, order, rng):
    space, _, ham = small_system
    psi0 = random_state(rng, space.dim)
    ref = _reference_solution(ham, psi0, 0.5)
    errs = [np.linalg.norm(evolve(space, ham, EvolutionSpec(0.5, method=method, dt=dt), psi0,
                                  keep_states=True).final_state - ref)
            for dt in (0.02, 0.01)]
    assert np.log2(errs[0] / errs[1]) == pytest.approx(order, abs=0.3)


def test_methods_agree_on_vacuum(small_system):
    space, _, ham = small_system
    out = [evolve(space, ham, EvolutionSpec(2.0, method=m), vacuum_state(space),
                  keep_states=True).final_state for m in "ab"]
    assert 1 - abs(np.vdot(*out)) < 1e-10


def test_single_steps_unitary_to_order(small_system, rng):
    space, _, ham = small_system
    psi = random_state(rng, space.dim)
    for step in (rk4_step, midpoint_expm_step):
        out = step(ham, 0.2, 1e-3, psi)
        assert abs(np.linalg.norm(out) - 1) < 1e-12


def test_free_vacuum_is_stationary():
    cfg = SpaceConfig(cutoffs=(2, 2, 2), rabi_couplings=(0, 0, 0), pump_coupling=0.0)
    space = build_space(cfg)
    ham = build_hamiltonian(space, cfg)
    res = evolve(space, ham, EvolutionSpec(3.0, method="b"), vacuum_state(space), keep_states=True)
    psi = res.final_state
    # only a global phase exp(+i sum(Omega)/2 t)
    assert psi[0] == pytest.approx(np.exp(1j * sum(cfg.qubit_freqs) / 2 * 3.0), abs=1e-12)


def test_samples_recorded_exactly(small_system):
    space, _, ham = small_system
    times = (0.0, 0.1, 0.35, 1.0)
    seen = []
    res = evolve(space, ham, EvolutionSpec(1.0, times), vacuum_state(space),
                 observer=lambda t, psi: seen.append(t) or t)
    assert res.times == list(times) == seen == res.records
    assert res.norms[0] == 1.0


def test_parity_and_outside(small_system):
    space, _, ham = small_system
    res = evolve(space, ham, EvolutionSpec(2.0, (0.5, 1.0, 2.0)), vacuum_state(space),
                 keep_states=True)
    for psi, par, out in zip(res.states, res.parity, res.outside):
        assert par == pytest.approx(1, abs=1e-12)
        assert out < 1e-20
        assert parity_expectation(space, psi) == pytest.approx(par)
        assert outside_probability(space, psi) == pytest.approx(out)


def test_norm_failure_is_reported(small_system):
    space, _, ham = small_system
    res = evolve(space, ham, EvolutionSpec(5.0, (1.0, 2.0, 5.0), dt=0.5), vacuum_state(space))
    assert res.failed
    assert "norm drift" in res.diagnostic
    assert len(res.times) < 3
    with pytest.raises(ValueError):
        leakage_report(res)


def test_leakage_warning_small_cutoff():
    cfg = SpaceConfig(cutoffs=(1, 1, 1), pump_coupling=0.4)
    space = build_space(cfg)
    res = evolve(space, build_hamiltonian(space, cfg), EvolutionSpec(5.0, (2.5, 5.0)),
                 vacuum_state(space))
    assert res.warnings and "cutoffs" in res.warnings[0]
    assert max(leakage_report(res)) > 1e-3


def test_leakage_of_top_state():
    space = build_space((2, 2, 2))
    psi = np.zeros(space.dim, dtype=complex)
    psi[space.flat((2, 0, 0, 0, 2, 1))] = 1
    assert leakage(space, psi) == (1.0, 0.0, 1.0)


@pytest.mark.parametrize("kwargs", [
    {"method": "c"}, {"dt": 0}, {"sample_times": (0.5, 0.2)}, {"sample_times": (2.0,)},
    {"sample_times": ()}, {"t_final": -1},
])
def test_spec_validation(kwargs):
    args = {"t_final": 1.0, **kwargs}
    with pytest.raises(ConfigError):
        EvolutionSpec(**args)


def test_rejects_unnormalised(small_system):
    space, _, ham = small_system
    with pytest.raises(ValueError):
        evolve(space, ham, EvolutionSpec(1.0), 2 * vacuum_state(space))


def test_final_state_requires_keep(small_system):
    space, _, ham = small_system
    res = evolve(space, ham, EvolutionSpec(0.1), vacuum_state(space))
    with pytest.raises(ValueError):
        res.final_state


def test_trajectory_csv(tmp_path, small_system):
    space, _, ham = small_system
    res = evolve(space, ham, EvolutionSpec(0.5, (0.0, 0.5)), vacuum_state(space),
                 observer=lambda t, psi: {"t": t, "foo": 2 * t})
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, res, ("t", "foo"), {"method": "a"})
    lines = path.read_text().splitlines()
    assert lines[0] == "# method = a"
    assert lines[1] == "t,norm,P_expect,leak1,leak2,leak3,foo"
    assert lines[3].split(",")[-1] == "1.0"
