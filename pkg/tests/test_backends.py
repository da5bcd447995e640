import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dqptsim import _kernels
from dqptsim import circuit as C
from dqptsim.model import ModelParams
from dqptsim.simulator import apply

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def random_state(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def random_unitary(rng):
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.data())
def test_single_qubit_kernels_agree(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 31)))
    target = data.draw(st.integers(0, n - 1))
    others = [k for k in range(n) if k != target]
    controls = tuple(data.draw(st.lists(st.sampled_from(others), unique=True, max_size=2))
                     if others else [])
    psi = random_state(rng, n)
    u = random_unitary(rng)
    a, b = psi.copy(), psi.copy()
    _kernels.apply_1q(a, n, target, controls, u, "numba")
    _kernels.apply_1q(b, n, target, controls, u, "numpy")
    assert np.allclose(a, b, atol=1e-13)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 7), st.data())
def test_parity_phase_kernels_agree(n, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 31)))
    i, j = data.draw(st.permutations(range(n)))[:2]
    rest = [k for k in range(n) if k not in (i, j)]
    controls = tuple(data.draw(st.lists(st.sampled_from(rest), unique=True, max_size=1))
                     if rest else [])
    psi = random_state(rng, n)
    even = np.exp(1j * rng.uniform(0, 6.3))
    a, b = psi.copy(), psi.copy()
    _kernels.apply_zz_phase(a, n, i, j, controls, even, even.conjugate(), "numba")
    _kernels.apply_zz_phase(b, n, i, j, controls, even, even.conjugate(), "numpy")
    assert np.allclose(a, b, atol=1e-13)


@pytest.mark.parametrize("params", [ModelParams(4, 0.9), ModelParams(8, 0.8, e=0.5, N_T=2)])
def test_full_pipeline_agrees(params):
    circ = C.build_ramsey_loschmidt(params, 1.1, "y")
    assert np.allclose(apply(circ, backend="numba"), apply(circ, backend="numpy"), atol=1e-12)


def backend_in_subprocess(value):
    env = dict(os.environ, DQPTSIM_BACKEND=value)
    return subprocess.run([sys.executable, "-c", "from dqptsim import _kernels; print(_kernels.BACKEND)"],
                          env=env, capture_output=True, text=True)


def test_environment_selects_backend():
    assert backend_in_subprocess("numpy").stdout.strip() == "numpy"
    assert backend_in_subprocess(" NUMBA ").stdout.strip() == "numba"
    bad = backend_in_subprocess("cuda")
    assert bad.returncode != 0 and "DQPTSIM_BACKEND" in bad.stderr


def test_shot_runs_are_byte_identical_across_backends(tmp_path):
    tables = {}
    for backend in ("numba", "numpy"):
        out = tmp_path / backend
        env = dict(os.environ, DQPTSIM_BACKEND=backend)
        subprocess.run([sys.executable, "-m", "dqptsim.cli", "run", "--preset", "loschmidt-n8",
                        "--set", "t_points=12", "-o", str(out)],
                       env=env, check=True, capture_output=True, text=True)
        tables[backend] = (out / "loschmidt.csv").read_bytes()
    assert tables["numba"] == tables["numpy"]
