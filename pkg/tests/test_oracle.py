import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqptsim.model import ModelParams, momenta
from dqptsim.oracle import (correlation_matrix, correlation_matrix_t0, exact_evolve,
                            free_entanglement_spectrum, loschmidt_analytic, loschmidt_exact,
                            necf_analytic, position_hamiltonian, prequench_state, rate_function,
                            reduced_density_matrix, renyi2_bits, schmidt_probabilities)

P4 = ModelParams(4, 0.9)
P8 = ModelParams(8, 0.8)


def test_loschmidt_frozen_values():
    assert loschmidt_analytic(P4, 1.0) == pytest.approx(0.2190951534313464 - 0.11149571572483036j, abs=1e-12)
    assert loschmidt_analytic(P8, 1.0) == pytest.approx(0.07126614003695893 - 0.04930122452433455j, abs=1e-12)


def test_loschmidt_at_zero():
    assert loschmidt_analytic(P4, 0.0) == 1


def test_loschmidt_at_first_minimum():
    # q = 0 mode sits at a quarter period; its factor has modulus |1 - 2 m^2 / w^2|
    w0 = math.sqrt(0.81 + 1)
    t = math.pi / (2 * w0)
    L = loschmidt_analytic(P4, t)
    assert abs(L) == pytest.approx(abs(1 - 2 * 0.81 / w0 ** 2), abs=1e-12)
    assert abs(L) == pytest.approx(0.10497237569060773, abs=1e-12)
    assert rate_function(L, 4) == pytest.approx(0.5635145130248461, abs=1e-12)


@pytest.mark.parametrize("params", [P4, P8])
def test_analytic_matches_exact_diagonalization(params):
    for t in np.linspace(0, 5, 50):
        assert loschmidt_exact(params, t) == pytest.approx(loschmidt_analytic(params, t), abs=1e-8)


@pytest.mark.parametrize("params", [P4, P8])
def test_product_of_mode_factors(params):
    for t in np.linspace(0, 5, 50):
        prod = np.prod([necf_analytic(params, q, t) for q in momenta(params.N)])
        assert prod == pytest.approx(loschmidt_analytic(params, t), abs=1e-12)


def test_necf_examples():
    assert necf_analytic(P4, 0, 0.0) == 1
    for t in (0.3, 1.7):
        assert necf_analytic(P4, -1, t) == pytest.approx(np.exp(-0.9j * t), abs=1e-12)
    assert necf_analytic(P8, 1, 0.7) == pytest.approx(0.7334617285393175 - 0.08347570616497232j, abs=1e-12)


def test_free_theory_only():
    with pytest.raises(ValueError):
        loschmidt_analytic(ModelParams(4, 0.9, e=0.5), 1.0)
    with pytest.raises(ValueError):
        correlation_matrix(ModelParams(4, 0.9, e=0.5), 1.0)


def test_interacting_overlap_frozen():
    assert loschmidt_exact(ModelParams(4, 0.9, e=0.9), 1.0) == pytest.approx(
        0.2864088693634662 - 0.1572392091930458j, abs=1e-10)


def test_evolution_norm_and_energy():
    p = ModelParams(4, 0.9, e=0.7)
    H = position_hamiltonian(p, mass_sign=-1, interacting=True)
    energies = []
    for t in (0.0, 0.4, 2.1):
        psi = exact_evolve(p, t)
        assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-10)
        energies.append(np.vdot(psi, H @ psi).real)
    assert np.allclose(energies, energies[0], atol=1e-8)
    assert abs(np.vdot(prequench_state(p), exact_evolve(p, 0.0))) == pytest.approx(1.0)


def test_correlation_frozen_entries():
    G = correlation_matrix(P4, 0.0).entries
    assert G[0, 0] == pytest.approx(0.08275881709438769, abs=1e-12)
    assert G[0, 1] == pytest.approx(-0.18582353656179137, abs=1e-12)
    # published rounding
    assert G[0, 0].real == pytest.approx(0.08281, abs=1e-3)
    assert G[0, 1].real == pytest.approx(-0.18587, abs=1e-3)


def test_closed_form_matches_propagated():
    for params in (P4, P8):
        assert np.allclose(correlation_matrix_t0(params), correlation_matrix(params, 0.0).entries,
                           atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0, 20))
def test_correlation_invariants(t):
    G = correlation_matrix(P8, t).entries
    assert np.allclose(G, G.conj().T, atol=1e-10)
    w = np.linalg.eigvalsh(G)
    assert w.min() > -1e-10 and w.max() < 1 + 1e-10
    assert np.trace(G).real == pytest.approx(4.0, abs=1e-10)


def test_heavy_mass_limit_is_staggered():
    G = correlation_matrix(ModelParams(8, 1e6), 0.0).entries
    assert np.allclose(np.diag(G).real, [0, 1] * 4, atol=1e-5)


def test_entanglement_spectrum_example():
    levels, spec = free_entanglement_spectrum(correlation_matrix(P4, 0.0).restrict([0, 1]))
    assert np.allclose(spec.probabilities, [0.9153706181, 0.0413794109, 0.0413794109, 0.0018705601],
                       atol=1e-9)
    assert np.allclose(spec.probabilities, [0.91531, 0.04141, 0.04141, 0.00187], atol=1e-3)
    assert spec.renyi2 == pytest.approx(0.24925392686304018, abs=1e-10)
    assert spec.renyi2 == pytest.approx(0.2495, abs=1e-3)
    assert np.allclose(sorted(levels), [-3.09654566, 3.09654566], atol=1e-7)


def test_spectrum_edge_cases():
    _, pure = free_entanglement_spectrum(np.diag([1.0, 0.0]))
    assert np.allclose(pure.probabilities, [1, 0, 0, 0]) and pure.renyi2 == pytest.approx(0.0)
    levels, flat = free_entanglement_spectrum(np.diag([0.5, 0.5]))
    assert np.allclose(flat.probabilities, 0.25) and flat.renyi2 == pytest.approx(2.0)
    assert np.allclose(levels, 0.0)


@pytest.mark.parametrize("params, sites", [(P4, [0, 1]), (P8, [0, 1, 2, 3]), (P8, [2, 3])])
def test_gaussian_spectrum_matches_partial_trace(params, sites):
    for t in (0.0, 0.8, 1.9):
        G = correlation_matrix(params, t).restrict(sites)
        _, spec = free_entanglement_spectrum(G)
        dense = schmidt_probabilities(exact_evolve(params, t), sites, params.N)
        assert np.allclose(spec.probabilities, dense.probabilities, atol=1e-8)


def test_reduced_density_is_a_state():
    rho = reduced_density_matrix(exact_evolve(P4, 0.6), [0, 1], 4)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert np.allclose(rho, rho.conj().T)


def test_rate_function_examples():
    assert rate_function(1.0, 4) == 0.0
    assert rate_function(math.exp(-4), 4) == pytest.approx(1.0)
    assert rate_function(0.0, 4) == math.inf
    assert renyi2_bits(0.25) == pytest.approx(2.0)
