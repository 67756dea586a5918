"""
Tests for the correlation-matrix representation and its in-place updates.
"""

import numpy as np
import pytest

from fermion_steer.errors import CorruptStateError, DimensionError, NotUnitaryError, OrthogonalityError
from fermion_steer.gaussian import CorrelationMatrix, ModeVector, RandomStream, SingleParticleUnitary


def random_pure_state(n, n_particles, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, _ = np.linalg.qr(a)
    occupied = q[:, :n_particles]
    #G_ij = <c_i^dag c_j> = sum_k conj(phi_k(i)) phi_k(j)
    return CorrelationMatrix(occupied.conj() @ occupied.T, pure=True)


def random_mode(n, seed=1):
    rng = np.random.default_rng(seed)
    return ModeVector(n, rng.standard_normal(n) + 1j * rng.standard_normal(n), normalize=True)


class TestModeVector:

    def test_basis(self):
        w = ModeVector.basis(4, 2)
        np.testing.assert_allclose(w.dense(), [0, 0, 1, 0])
        assert w.support.tolist() == [2]

    def test_sparse_support_is_sorted(self):
        w = ModeVector(6, np.array([0.6, 0.8j]), support=[4, 1])
        assert w.support.tolist() == [1, 4]
        np.testing.assert_allclose(w.dense(), [0, 0.8j, 0, 0, 0.6, 0])

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            ModeVector(2, np.array([1.0, 1.0]))

    def test_rejects_out_of_range_support(self):
        with pytest.raises(DimensionError):
            ModeVector(3, np.array([1.0]), support=[3])

    def test_overlap_is_antilinear_in_first_argument(self):
        a = ModeVector(2, np.array([1j, 0.0]))
        b = ModeVector(2, np.array([1.0, 0.0]))
        assert a.overlap(b) == pytest.approx(-1j)

    def test_embed(self):
        w = ModeVector.basis(2, 1).embed(6, offset=3)
        assert w.dim == 6
        assert w.support.tolist() == [4]


class TestSingleParticleUnitary:

    def test_rejects_non_unitary(self):
        with pytest.raises(NotUnitaryError):
            SingleParticleUnitary(np.array([[1.0, 1.0], [0.0, 1.0]]))

    def test_from_generator(self):
        h = np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, -0.5]])
        u = SingleParticleUnitary.from_generator(1j * h)
        np.testing.assert_allclose(u.matrix.conj().T @ u.matrix, np.eye(2), atol=1e-12)

    def test_support_size_mismatch(self):
        with pytest.raises(DimensionError):
            SingleParticleUnitary(np.eye(2), support=[0, 1, 2])


class TestRandomStream:

    def test_reproducible(self):
        a = RandomStream(7, key=(3,))
        b = RandomStream(7, key=(3,))
        np.testing.assert_array_equal(a.random(5), b.random(5))

    def test_trajectory_streams_differ(self):
        a = RandomStream.for_trajectory(7, 0)
        b = RandomStream.for_trajectory(7, 1)
        assert not np.allclose(a.random(5), b.random(5))

    def test_counter(self):
        rng = RandomStream(0)
        rng.random()
        rng.uniform(0.0, 1.0, 3)
        rng.choice(10, 4)
        assert rng.counter == 8


class TestCorrelationMatrix:

    def test_product_state(self):
        G = CorrelationMatrix.product_state(4, [1, 0, 1, 0])
        np.testing.assert_allclose(np.diag(G.data).real, [1, 0, 1, 0])
        assert G.total_charge() == pytest.approx(2.0)
        assert G.purity_deviation() == 0.0

    def test_validate_rejects_spectrum(self):
        with pytest.raises(CorruptStateError):
            CorrelationMatrix(np.diag([1.5, 0.0]))

    def test_validate_rejects_non_hermitian(self):
        with pytest.raises(CorruptStateError):
            CorrelationMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_apply_unitary_swap(self):
        G = CorrelationMatrix.product_state(3, [1, 0, 0])
        G.apply_unitary(SingleParticleUnitary.swap(0, 2))
        np.testing.assert_allclose(np.diag(G.data).real, [0, 0, 1], atol=1e-14)

    def test_apply_unitary_embedded_matches_dense(self):
        G = random_pure_state(5, 2)
        H = G.copy()
        theta = 0.4
        block = np.array([[np.cos(theta), 1j * np.sin(theta)], [1j * np.sin(theta), np.cos(theta)]])
        dense = np.eye(5, dtype=complex)
        dense[np.ix_([1, 3], [1, 3])] = block
        G.apply_unitary(SingleParticleUnitary(block, support=[1, 3]))
        H.apply_unitary(SingleParticleUnitary(dense))
        np.testing.assert_allclose(G.data, H.data, atol=1e-13)

    def test_projective_measurement_outcome_one(self):
        G = random_pure_state(6, 3)
        w = random_mode(6)
        p = G.occupation_expectation(w)
        prob = G.project_occupation(w, 1)
        assert prob == pytest.approx(p)
        assert G.occupation_expectation(w) == pytest.approx(1.0, abs=1e-12)
        assert G.total_charge() == pytest.approx(3.0, abs=1e-12)
        assert G.purity_deviation() < 1e-12

    def test_projective_measurement_outcome_zero(self):
        G = random_pure_state(6, 3)
        w = random_mode(6)
        p = G.occupation_expectation(w)
        prob = G.project_occupation(w, 0)
        assert prob == pytest.approx(1.0 - p)
        assert G.occupation_expectation(w) == pytest.approx(0.0, abs=1e-12)
        assert G.total_charge() == pytest.approx(3.0, abs=1e-12)

    def test_measurement_on_product_state_is_deterministic(self):
        G = CorrelationMatrix.product_state(3, [1, 0, 1])
        rng = RandomStream(0)
        outcome, p = G.measure_occupation(ModeVector.basis(3, 0), rng)
        assert (outcome, p) == (1, 1.0)
        outcome, p = G.measure_occupation(ModeVector.basis(3, 1), rng)
        assert (outcome, p) == (0, 0.0)
        assert rng.counter == 0

    def test_conditioning_on_impossible_outcome(self):
        G = CorrelationMatrix.product_state(2, [0, 0])
        with pytest.raises(CorruptStateError):
            G.project_occupation(ModeVector.basis(2, 0), 1)

    def test_mode_dimension_mismatch(self):
        G = CorrelationMatrix.product_state(2, [1, 0])
        with pytest.raises(DimensionError):
            G.occupation_expectation(ModeVector.basis(3, 0))

    def test_weak_probabilities_sum_to_one(self):
        p_plus, p_minus = CorrelationMatrix.weak_probabilities(0.3, 0.8)
        assert p_plus + p_minus == pytest.approx(1.0)

    def test_weak_measurement_strong_limit(self):
        G = random_pure_state(4, 2)
        H = G.copy()
        w = random_mode(4)
        G.weak_update(w, 40.0, 1)
        H.project_occupation(w, 1)
        np.testing.assert_allclose(G.data, H.data, atol=1e-10)

    def test_weak_measurement_zero_strength_is_identity(self):
        G = random_pure_state(4, 2)
        before = G.data.copy()
        prob = G.weak_update(random_mode(4), 0.0, -1)
        assert prob == pytest.approx(0.5)
        np.testing.assert_allclose(G.data, before, atol=1e-14)

    def test_weak_measurement_rejects_bad_outcome(self):
        G = random_pure_state(4, 2)
        with pytest.raises(ValueError):
            G.weak_update(random_mode(4), 1.0, 0)

    def test_fswap_exchanges_occupations(self):
        G = CorrelationMatrix.product_state(4, [1, 0, 0, 0])
        G.fswap(ModeVector.basis(4, 0), ModeVector.basis(4, 2))
        np.testing.assert_allclose(np.diag(G.data).real, [0, 0, 1, 0], atol=1e-14)

    def test_fswap_preserves_purity_and_charge(self):
        G = random_pure_state(6, 3)
        w_a = ModeVector(6, np.array([1.0, 1.0j]) / np.sqrt(2.0), support=[0, 1])
        w_b = ModeVector(6, np.array([1.0, -1.0]) / np.sqrt(2.0), support=[3, 5])
        p_a = G.occupation_expectation(w_a)
        p_b = G.occupation_expectation(w_b)
        G.fswap(w_a, w_b)
        assert G.occupation_expectation(w_a) == pytest.approx(p_b, abs=1e-12)
        assert G.occupation_expectation(w_b) == pytest.approx(p_a, abs=1e-12)
        assert G.total_charge() == pytest.approx(3.0, abs=1e-12)
        assert G.purity_deviation() < 1e-12

    def test_fswap_rejects_overlapping_modes(self):
        G = random_pure_state(4, 2)
        w = ModeVector(4, np.array([1.0, 1.0]) / np.sqrt(2.0), support=[0, 1])
        with pytest.raises(OrthogonalityError):
            G.fswap(w, ModeVector.basis(4, 0))

    def test_sanitize_clamps_spectrum(self):
        G = CorrelationMatrix(np.diag([1.0 + 5e-10, -5e-10]), check=False)
        G.sanitize()
        eig = np.linalg.eigvalsh(G.data)
        assert eig.min() >= 0.0 and eig.max() <= 1.0

    def test_restrict(self):
        G = random_pure_state(5, 2)
        sub = G.restrict([0, 2])
        np.testing.assert_allclose(sub.data, G.data[np.ix_([0, 2], [0, 2])])
