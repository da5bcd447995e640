import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqptsim.model import (ModelParams, bogoliubov_angles, bogoliubov_matrix, dispersion,
                           interaction_coefficient, interaction_hamiltonian_terms, mode_hamiltonian,
                           momenta, modes, site_distance, staggered_charge_offsets)

masses = st.floats(0.05, 3.0) | st.floats(-3.0, -0.05)
sizes = st.sampled_from([4, 8, 12])


def test_params_reject_bad_size():
    with pytest.raises(ValueError):
        ModelParams(6, 0.9)


def test_params_collect_every_violation():
    with pytest.raises(ValueError) as exc:
        ModelParams(5, 0.9, a=-1.0, N_T=0)
    text = str(exc.value)
    assert "multiple of 4" in text and "lattice spacing" in text and "N_T" in text


def test_effective_mass_uses_theta():
    p = ModelParams(4, 0.9, theta=math.pi)
    assert p.mass == pytest.approx(-0.9)


@pytest.mark.parametrize("N, m, q, expected", [
    (4, 0.9, -1, 0.9),
    (4, 0.9, 0, 1.345362404707371),
    (8, 0.8, 1, math.sqrt(0.64 + 0.5)),
])
def test_dispersion_values(N, m, q, expected):
    assert dispersion(ModelParams(N, m), q) == pytest.approx(expected, abs=1e-12)


def test_dispersion_rejects_out_of_range_mode():
    with pytest.raises(ValueError):
        dispersion(ModelParams(4, 0.9), 1)


def test_momenta_range():
    assert momenta(8) == [-2, -1, 0, 1]


def test_bogoliubov_angle_examples():
    p = ModelParams(4, 0.9)
    assert bogoliubov_angles(p, -1, 1)[1] == pytest.approx(0.0, abs=1e-12)
    alpha, beta = bogoliubov_angles(p, 0, 1)
    assert alpha == 0.0
    assert beta == pytest.approx(0.418990612504195, abs=1e-12)
    assert beta == pytest.approx(math.atan(math.sqrt(0.445362 / 2.245362)), abs=1e-6)


def test_massless_limit_angle():
    _, beta = bogoliubov_angles(ModelParams(8, 1e-9), 1, 1)
    assert beta == pytest.approx(math.pi / 4, abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(N=sizes, m=masses, data=st.data())
def test_mode_invariants(N, m, data):
    p = ModelParams(N, m)
    q = data.draw(st.sampled_from(momenta(N)))
    w = dispersion(p, q)
    assert w >= abs(m) - 1e-12
    # the dispersion is even in q
    if -q in momenta(N):
        assert dispersion(p, -q) == pytest.approx(w, abs=1e-12)
    bp = bogoliubov_angles(p, q, 1)[1]
    bm = bogoliubov_angles(p, q, -1)[1]
    assert bp + bm == pytest.approx(math.pi / 2, abs=1e-12)
    for sign in (1, -1):
        U = bogoliubov_matrix(p, q, sign)
        assert np.allclose(U.conj().T @ U, np.eye(2), atol=1e-12)
        D = U.conj().T @ mode_hamiltonian(p, q, sign) @ U
        assert np.allclose(D, np.diag([w, -w]), atol=1e-12)


def test_bogoliubov_matrix_diagonalizes_example():
    p = ModelParams(4, 0.9)
    H = mode_hamiltonian(p, 0, 1)
    assert np.allclose(H, [[0.9, 1], [1, -0.9]])
    U = bogoliubov_matrix(p, 0, 1)
    assert np.allclose(np.diag(U.conj().T @ H @ U).real, [1.345362404707371, -1.345362404707371])
    assert np.allclose(bogoliubov_matrix(p, -1, 1), np.eye(2))


def test_modes_record():
    ms = modes(ModelParams(4, 0.9))
    assert [mm.q for mm in ms] == [-1, 0]
    for mm in ms:
        assert mm.beta_plus + mm.beta_minus == pytest.approx(math.pi / 2)


@pytest.mark.parametrize("N, d, expected", [
    (4, 0, 0.0), (4, 1, -0.125), (4, 2, -0.25), (8, 4, -0.5833333333333334),
])
def test_interaction_coefficient(N, d, expected):
    assert interaction_coefficient(N, d) == pytest.approx(expected, abs=1e-12)


def test_interaction_coefficient_range():
    with pytest.raises(ValueError):
        interaction_coefficient(4, 3)


def test_site_distance_wraps():
    assert site_distance(8, 0, 7) == 1
    assert site_distance(8, 1, 5) == 4


def test_empty_terms_without_coupling():
    t = interaction_hamiltonian_terms(ModelParams(4, 0.9))
    assert t.terms == [] and t.constant == 0.0


def _brute_force_interaction(p: ModelParams) -> np.ndarray:
    N = p.N
    diag = np.zeros(2 ** N)
    for idx, bits in enumerate(itertools.product((0, 1), repeat=N)):
        occ = [1 - b for b in bits]  # qubit |0> is an occupied site
        charge = [occ[n] - (1 - (-1) ** n) / 2 for n in range(N)]
        diag[idx] = p.a * p.e ** 2 * sum(
            interaction_coefficient(N, site_distance(N, n, k)) * charge[n] * charge[k]
            for n in range(N) for k in range(N))
    return diag


@pytest.mark.parametrize("N, e, m", [(4, 1.0, 1.0), (8, 0.7, 0.8)])
def test_interaction_terms_match_brute_force(N, e, m):
    p = ModelParams(N, m, e=e)
    assert np.allclose(interaction_hamiltonian_terms(p).diagonal(N), _brute_force_interaction(p),
                       atol=1e-12)


def test_zz_weights_translation_invariant():
    zz = interaction_hamiltonian_terms(ModelParams(8, 0.8, e=1.0)).zz
    for (i, j), c in zz.items():
        assert zz[tuple(sorted(((i + 2) % 8, (j + 2) % 8)))] == pytest.approx(c)


def test_half_filled_states_are_neutral():
    off = staggered_charge_offsets(8)
    for bits in itertools.product((0, 1), repeat=8):
        if sum(bits) == 4:
            occ = np.array([1 - b for b in bits])
            charge = occ - (1 - (-1) ** np.arange(8)) / 2
            assert charge.sum() == 0
    assert off.sum() == 0
