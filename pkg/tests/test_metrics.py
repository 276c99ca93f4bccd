"""Tests for fidelity, concurrence, purity and the Hermitian square root."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from biphoton import states
from biphoton.errors import UnphysicalStateError, ValidationError
from biphoton.metrics import (
    concurrence,
    fidelity,
    matrix_sqrt_hermitian,
    metric_report,
    purity,
)
from biphoton.states import MeasurementMode as M

seeds = st.integers(0, 2**32 - 1)


def random_psd(rng, rank=4):
    g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
    return g @ g.conj().T


def wootters_oracle(rho):
    # non-Hermitian textbook form: eigenvalues of rho * flipped rho
    y = np.array([[0, -1j], [1j, 0]])
    yy = np.kron(y, y)
    r = rho @ yy @ rho.conj() @ yy
    lam = np.sort(np.sqrt(np.abs(np.linalg.eigvals(r).real)))[::-1]
    return max(0.0, lam[0] - lam[1] - lam[2] - lam[3])


def local_unitary(rng):
    return np.kron(unitary_group.rvs(2, random_state=rng), unitary_group.rvs(2, random_state=rng))


class TestSqrt:
    def test_identity(self):
        assert np.allclose(matrix_sqrt_hermitian(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        r = matrix_sqrt_hermitian(np.diag([4.0, 1, 0, 0]))
        assert np.allclose(r, np.diag([2.0, 1, 0, 0]), atol=1e-14)

    @given(seeds, st.integers(1, 4))
    def test_square_recovers_input(self, seed, rank):
        m = random_psd(np.random.default_rng(seed), rank)
        r = matrix_sqrt_hermitian(m)
        assert np.linalg.norm(r @ r - m) <= 1e-8 * max(1.0, np.linalg.norm(m))
        assert np.linalg.eigvalsh(r)[0] >= -1e-12

    @given(seeds, st.floats(1e-3, 1e3))
    def test_scaling(self, seed, c):
        m = random_psd(np.random.default_rng(seed))
        assert np.allclose(matrix_sqrt_hermitian(c * m), np.sqrt(c) * matrix_sqrt_hermitian(m),
                           atol=1e-8 * np.sqrt(c) * np.linalg.norm(m))

    def test_small_negative_clamped(self):
        r = matrix_sqrt_hermitian(np.diag([1.0, 1, 1, -1e-9]))
        assert r[3, 3] == 0

    def test_negative_rejected(self):
        with pytest.raises(UnphysicalStateError):
            matrix_sqrt_hermitian(np.diag([1.0, 1, 1, -1e-3]))


class TestFidelity:
    @given(seeds)
    def test_self_is_one(self, seed):
        rho = states.random_density_matrix(np.random.default_rng(seed))
        assert fidelity(rho, rho) == pytest.approx(1, abs=1e-8)

    def test_mixed_vs_bell(self):
        assert fidelity(states.maximally_mixed(), states.bell()) == pytest.approx(0.25, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 0.3, 0.8, 0.943, 1.0])
    def test_werner(self, p):
        assert fidelity(states.werner(p), states.bell()) == pytest.approx((1 + 3 * p) / 4,
                                                                          abs=1e-12)

    def test_fidelity_0957_point(self):
        assert fidelity(states.werner(0.943), states.bell()) == pytest.approx(0.957, abs=5e-4)

    @given(seeds)
    def test_symmetric_with_pure_argument(self, seed):
        rng = np.random.default_rng(seed)
        rho = states.random_density_matrix(rng)
        psi = states.random_density_matrix(rng, rank=1)
        assert fidelity(rho, psi) == pytest.approx(fidelity(psi, rho), abs=1e-8)
        # pure target: reduces to an expectation value
        assert fidelity(rho, psi) == pytest.approx(np.trace(rho @ psi).real, abs=1e-8)

    @settings(max_examples=50)
    @given(seeds)
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        a = states.random_density_matrix(rng)
        b = states.random_density_matrix(rng)
        u = unitary_group.rvs(4, random_state=rng)
        ua = u @ a @ u.conj().T
        ub = u @ b @ u.conj().T
        assert fidelity(ua, ub) == pytest.approx(fidelity(a, b), abs=1e-8)

    def test_orthogonal_states(self):
        assert fidelity(states.product(M.P1, M.P1), states.product(M.P2, M.P2)) == 0

    def test_rejects_unphysical(self):
        with pytest.raises(ValidationError):
            fidelity(np.eye(4), states.bell())


class TestConcurrence:
    def test_bell(self):
        assert concurrence(states.bell()) == pytest.approx(1, abs=1e-12)

    @pytest.mark.parametrize("a", list(M))
    @pytest.mark.parametrize("b", list(M))
    def test_product_states(self, a, b):
        assert concurrence(states.product(a, b)) == pytest.approx(0, abs=1e-7)

    def test_werner_example(self):
        assert concurrence(states.werner(0.8)) == pytest.approx(0.7, abs=1e-12)

    @pytest.mark.parametrize("p", np.linspace(0, 1, 11))
    def test_werner_formula(self, p):
        assert concurrence(states.werner(p)) == pytest.approx(max(0, (3 * p - 1) / 2), abs=1e-10)

    def test_concurrence_0926_point(self):
        assert concurrence(states.werner(0.9507)) == pytest.approx(0.926, abs=1e-4)

    @settings(max_examples=50)
    @given(seeds)
    def test_matches_textbook_form(self, seed):
        rho = states.random_density_matrix(np.random.default_rng(seed))
        assert concurrence(rho) == pytest.approx(wootters_oracle(rho), abs=1e-7)

    @settings(max_examples=50)
    @given(seeds)
    def test_local_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        rho = states.random_density_matrix(rng, rank=2)
        u = local_unitary(rng)
        assert concurrence(u @ rho @ u.conj().T) == pytest.approx(concurrence(rho), abs=1e-8)

    @given(seeds, st.floats(0, 1))
    def test_mixed_with_separable(self, seed, w):
        rng = np.random.default_rng(seed)
        a, b = rng.choice(list(M), 2)
        rho = w * states.maximally_mixed() + (1 - w) * states.product(a, b)
        assert concurrence(rho) == pytest.approx(0, abs=1e-7)

    @given(seeds)
    def test_range(self, seed):
        c = concurrence(states.random_density_matrix(np.random.default_rng(seed)))
        assert 0 <= c <= 1


class TestPurity:
    def test_values(self):
        assert purity(states.bell()) == pytest.approx(1)
        assert purity(states.maximally_mixed()) == pytest.approx(0.25)
        assert purity(states.werner(0.95)) == pytest.approx(0.926875, abs=1e-12)


def test_report():
    r = metric_report(states.werner(0.9), states.bell())
    assert r.fidelity == pytest.approx(0.925)
    assert r.concurrence == pytest.approx(0.85)
    assert r.eigenvalues[0] == pytest.approx(0.925)
    assert list(r.to_dict()) == ["fidelity", "concurrence", "purity", "eigenvalues",
                                 "target_label"]
