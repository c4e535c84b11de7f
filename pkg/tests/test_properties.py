"""Algebraic invariants checked over generated inputs."""

import numpy as np
from hypothesis import given, settings, strategies as st

from rydlink.detection import fit_visibility, herald_efficiency
from rydlink.photonics import transmission_loss_channel
from rydlink.qstate import (
    JointState,
    apply_channel,
    partial_trace,
    pauli_expectation,
    photon_register,
    pure_state,
    tensor,
    trace_norm,
)
from rydlink.superatom import coherence_factor, dephasing_channel

PH_A = photon_register("a")
PH_B = photon_register("b")

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
angle = st.floats(min_value=-np.pi, max_value=np.pi, allow_nan=False)
seeds = st.integers(min_value=0, max_value=2**31 - 1)


def _random_state(seed, register, trace=1.0):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    rho = g @ g.conj().T
    return JointState((register,), rho / np.trace(rho) * trace)


@settings(max_examples=50, deadline=None)
@given(seeds, unit, unit)
def test_tensor_then_trace_recovers_scaled_factor(seed, tr_a, tr_b):
    tr_a = 0.05 + 0.95 * tr_a
    tr_b = 0.05 + 0.95 * tr_b
    a = _random_state(seed, PH_A, tr_a)
    b = _random_state(seed + 1, PH_B, tr_b)
    reduced = partial_trace(tensor(a, b), PH_B)
    assert np.allclose(reduced.rho, a.rho * tr_b, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(seeds, unit, unit)
def test_sequential_loss_composes_multiplicatively(seed, eta1, eta2):
    s = _random_state(seed, PH_A)
    once = apply_channel(
        apply_channel(s, transmission_loss_channel(eta1), PH_A),
        transmission_loss_channel(eta2),
        PH_A,
    )
    combined = apply_channel(s, transmission_loss_channel(eta1 * eta2), PH_A)
    # qubit-sector populations and coherences agree; vacuum absorbs the rest
    assert np.allclose(once.rho[:2, :2], combined.rho[:2, :2], atol=1e-10)
    assert abs(once.trace() - combined.trace()) < 1e-12


@settings(max_examples=50, deadline=None)
@given(unit, unit)
def test_dephasing_composes_multiplicatively(g1, g2):
    s = pure_state(PH_A, (1 / np.sqrt(2), 1 / np.sqrt(2), 0))
    twice = apply_channel(
        apply_channel(s, dephasing_channel(g1), PH_A), dephasing_channel(g2), PH_A
    )
    assert abs(twice.rho[0, 1] - 0.5 * g1 * g2) < 1e-10
    assert abs(twice.trace() - 1.0) < 1e-10


@settings(max_examples=100, deadline=None)
@given(seeds)
def test_pauli_expectations_stay_bounded(seed):
    s = _random_state(seed, PH_A)
    for op in "XYZ":
        value = pauli_expectation(s, {PH_A: op}, renormalize=True)
        assert -1.0 - 1e-9 <= value <= 1.0 + 1e-9


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_trace_norm_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    q, _ = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    assert abs(trace_norm(q @ m) - trace_norm(m)) < 1e-8
    assert abs(trace_norm(m.conj().T) - trace_norm(m)) < 1e-8


@settings(max_examples=100, deadline=None)
@given(unit, unit, unit)
def test_herald_efficiency_bounded_product(a, b, c):
    value = herald_efficiency(a, b, c)
    assert 0.0 <= value <= min(a, b, c) + 1e-12


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.98), angle)
def test_fit_visibility_recovers_generated_fringes(v, phi):
    phases = np.linspace(0.0, 2.0 * np.pi, 11)
    series = [(p, (1 + v * np.sin(p + phi)) / 2, 500.0) for p in phases]
    fit_v, fit_phi, _ = fit_visibility(series)
    assert abs(fit_v - v) < 1e-6
    if v > 1e-3:
        delta = (fit_phi - phi + np.pi) % (2 * np.pi) - np.pi
        assert abs(delta) < 1e-5


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=0.0, max_value=5e-6), st.floats(min_value=1e-7, max_value=1e-5))
def test_coherence_factor_monotone_in_time(t, tau):
    later = coherence_factor(t + 1e-7, tau)
    now = coherence_factor(t, tau)
    assert 0.0 <= later <= now <= 1.0
