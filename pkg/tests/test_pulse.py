import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otocsim.molecule import CROTONIC_TAU_MS, MoleculeSpec, crotonic_default, derived_crotonic_couplings
from otocsim.operators import expm_hermitian
from otocsim.pulse import (
    InfeasibleTimingError,
    PulseTiming,
    compile_and_verify,
    compiled_block,
    net_z_times,
    process_fidelity,
    refocused_segment,
    rz_layer,
    solve_timing,
    target_block,
    z_corrections,
)
from otocsim.random_unitary import effective_hamiltonian


def chain(j12, j23, j34, offsets=(0.0, 0.0, 0.0, 0.0), long_range=(0.0, 0.0, 0.0)):
    j13, j24, j14 = long_range
    j = np.array([
        [0, j12, j13, j14],
        [j12, 0, j23, j24],
        [j13, j23, 0, j34],
        [j14, j24, j34, 0],
    ], dtype=float)
    return MoleculeSpec.from_arrays(offsets, j)


def test_derived_couplings_frozen():
    # inverted from the printed refocusing times at JT = 1.6
    np.testing.assert_allclose(derived_crotonic_couplings(), (41.64316, 69.67111, 72.44606), atol=1e-5)


def test_golden_timing():
    t = solve_timing(crotonic_default(), 1.6)
    for got, want in zip((t.tau_ms, t.tau1_ms, t.tau2_ms), CROTONIC_TAU_MS):
        assert abs(got - want) <= 0.01
    assert max(abs(r) for r in t.residuals) < 1e-12


def test_uniform_couplings_put_pulses_mid_block():
    t = solve_timing(chain(50.0, 50.0, 50.0), 1.6)
    assert t.tau1_ms == pytest.approx(t.tau_ms) and t.tau2_ms == pytest.approx(t.tau_ms)


@settings(max_examples=1000, deadline=None)
@given(
    j12=st.floats(10, 100),
    j23=st.floats(10, 100),
    j34=st.floats(10, 100),
    jt=st.floats(0.1, 3.0),
)
def test_timing_solution_satisfies_equations(j12, j23, j34, jt):
    t = solve_timing(chain(j12, j23, j34), jt)
    assert max(abs(r) for r in t.residuals) < 1e-12 * max(1.0, jt)


def test_net_times_and_corrections():
    t = PulseTiming(12.0, 9.0, 7.0)
    s = net_z_times(t)
    np.testing.assert_allclose(s, (12e-3, 12e-3, 6e-3, 2e-3))
    m = chain(40.0, 60.0, 70.0, offsets=(100.0, -25.0, 0.0, 10.0))
    want = [(2 * math.pi * f * x) % (2 * math.pi) for f, x in zip((100.0, -25.0, 0.0, 10.0), s)]
    np.testing.assert_allclose(z_corrections(m, t), want, atol=1e-12)


def test_zero_offsets_need_no_correction():
    t = solve_timing(chain(41.0, 69.0, 72.0), 1.6)
    assert all(a == 0 for a in t.alphas)


def test_rz_layer_single_spin():
    np.testing.assert_allclose(rz_layer([math.pi]), np.diag([-1j, 1j]), atol=1e-15)


@pytest.mark.parametrize("offsets", [(0.0, 0.0, 0.0, 0.0), (1250.0, -2730.0, 3890.0, -4410.0), (31.0, 5.0, -700.0, 12.5)])
def test_compiled_block_is_exact_without_long_range(offsets):
    m = crotonic_default(offsets_hz=offsets)
    t = solve_timing(m, 1.6)
    f = process_fidelity(compiled_block(m, t), target_block(1.6))
    assert f >= 1 - 1e-9


def test_long_range_couplings_reduce_fidelity():
    base = crotonic_default()
    j12, j23, j34 = derived_crotonic_couplings()
    m = chain(j12, j23, j34, offsets=base.offsets_hz, long_range=(1.2, 0.8, 6.5))
    report = compile_and_verify(m, 1.6)
    assert report.fidelity_nn >= 1 - 1e-9
    assert report.fidelity_full < 1 - 1e-6
    assert report.residual_z_phase < 1e-9


def test_process_fidelity_ignores_global_phase():
    u = target_block(1.6)
    assert process_fidelity(u, np.exp(0.7j) * u) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("j23", [0.0, -3.0])
def test_non_positive_coupling_is_infeasible(j23):
    with pytest.raises(InfeasibleTimingError) as info:
        solve_timing(chain(41.0, j23, 72.0), 1.6)
    assert info.value.equation == "J23"


def test_negative_angle_is_infeasible():
    with pytest.raises(InfeasibleTimingError):
        solve_timing(chain(41.0, 69.0, 72.0), -1.6)


def test_pulse_past_block_end_is_infeasible():
    # J23 < J12 pushes tau1 beyond tau
    with pytest.raises(InfeasibleTimingError) as info:
        compile_and_verify(chain(41.0, 20.0, 72.0), 1.6)
    assert "tau1" in info.value.equation


def test_solver_needs_four_spins():
    with pytest.raises(ValueError):
        solve_timing(MoleculeSpec.from_arrays([0.0, 0.0], [[0, 1], [1, 0]]), 1.0)


def test_refocused_segment_matches_toggling_frame():
    # one pi pulse per spin: segment = exp(-i H_eff tau) times the Pauli frame
    m = crotonic_default()
    rng = np.random.default_rng(31)
    for _ in range(10):
        lam = rng.random(4)
        u, frame = refocused_segment(m, lam, 10e-3)
        h = effective_hamiltonian(lam, "Z", m, "toggling")
        np.testing.assert_allclose(u, expm_hermitian(h, 10e-3) @ frame, atol=1e-9)
