import numpy as np
import pytest

from fermion_steer.chern_model import (Band, Orbital, OWModeSet, band_overlap, band_projectors, bloch_vector,
                                       build_ow_mode, form_factor, form_factor_zeros, ground_state_correlation,
                                       ground_state_correlation_field, lattice_hamiltonian, overcomplete_rank,
                                       ow_profile, truncate, DEFAULT_TAU)
from fermion_steer.errors import GapClosedError
from fermion_steer.lattice import AlphaField, LatticeSpec


class TestBandStructure:

    def test_bloch_vector(self):
        n = bloch_vector((0.0, np.pi / 2), 1.5)
        np.testing.assert_allclose(n, [0.0, 1.0, 0.5], atol=1e-15)

    def test_projectors(self):
        k = (0.3, -1.1)
        p_plus, p_minus = band_projectors(k, 1.5)
        np.testing.assert_allclose(p_plus + p_minus, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(p_minus @ p_minus, p_minus, atol=1e-14)
        np.testing.assert_allclose(p_plus @ p_minus, np.zeros((2, 2)), atol=1e-14)

    def test_gap_closes(self):
        with pytest.raises(GapClosedError):
            band_projectors((0.0, 0.0), 2.0)

    def test_band_enum(self):
        assert Band.from_symbol("+") is Band.UPPER
        assert Band.LOWER.symbol == "-"
        with pytest.raises(ValueError):
            Band.from_symbol("x")


class TestGroundState:

    @pytest.mark.parametrize("alpha", [1.5, 3.0, -1.0])
    def test_pure_half_filled(self, alpha):
        lattice = LatticeSpec(6)
        G = ground_state_correlation(lattice, alpha)
        assert G.purity_deviation() < 1e-12
        assert G.total_charge() == pytest.approx(lattice.n_cells, abs=1e-10)

    @pytest.mark.parametrize("alpha", [1.5, 3.0])
    def test_real_space_matches_momentum_space(self, alpha):
        lattice = LatticeSpec(6)
        G_k = ground_state_correlation(lattice, alpha)
        G_r = ground_state_correlation_field(AlphaField.uniform(lattice, alpha))
        np.testing.assert_allclose(G_r.data, G_k.data, atol=1e-10)

    def test_hamiltonian_is_hermitian(self):
        lattice = LatticeSpec(4)
        field = AlphaField.domain_wall(lattice, 1.0, 3.0, 1)
        H = lattice_hamiltonian(field)
        np.testing.assert_allclose(H, H.conj().T, atol=1e-15)

    def test_gapless_field(self):
        with pytest.raises(GapClosedError):
            ground_state_correlation_field(AlphaField.uniform(LatticeSpec(4), 2.0))


class TestOWModes:

    def test_profile_is_normalized_and_read_only(self):
        phi = ow_profile(LatticeSpec(6), 1.5, Orbital.A, Band.LOWER)
        assert np.linalg.norm(phi) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            phi[0, 0, 0] = 0.0

    @pytest.mark.parametrize("band,target", [(Band.LOWER, 1.0), (Band.UPPER, 0.0)])
    def test_untruncated_modes_satisfy_stabilizer_conditions(self, band, target):
        lattice = LatticeSpec(6)
        G = ground_state_correlation(lattice, 1.5)
        for orbital in Orbital:
            mode = build_ow_mode(lattice, 1.5, (2, 3), orbital, band)
            assert G.occupation_expectation(mode.wavefunction) == pytest.approx(target, abs=1e-10)

    def test_translation(self):
        lattice = LatticeSpec(6)
        a = build_ow_mode(lattice, 1.5, (0, 0), Orbital.B, Band.UPPER).wavefunction.dense()
        b = build_ow_mode(lattice, 1.5, (1, 2), Orbital.B, Band.UPPER).wavefunction.dense()
        shifted = np.roll(a.reshape(6, 6, 2), (2, 1), axis=(0, 1)).ravel()
        np.testing.assert_allclose(b, shifted, atol=1e-14)

    def test_truncation(self):
        lattice = LatticeSpec(8)
        mode = build_ow_mode(lattice, 1.5, (0, 0), Orbital.A, Band.LOWER)
        short = truncate(mode, 1, lattice)
        assert short.shell == 1
        assert 0 < short.wavefunction.support.size <= 9 * 2
        assert np.linalg.norm(short.wavefunction.amplitudes) == pytest.approx(1.0)
        x, y, _ = zip(*(lattice.mode_coords(i) for i in short.wavefunction.support))
        assert set(x) <= {7, 0, 1} and set(y) <= {7, 0, 1}

    def test_large_shell_is_untruncated(self):
        lattice = LatticeSpec(6)
        mode = build_ow_mode(lattice, 1.5, (0, 0), Orbital.A, Band.LOWER)
        assert truncate(mode, 3, lattice).shell is None

    def test_truncation_rejects_zero_shell(self):
        lattice = LatticeSpec(6)
        mode = build_ow_mode(lattice, 1.5, (0, 0), Orbital.A, Band.LOWER)
        with pytest.raises(ValueError):
            truncate(mode, 0, lattice)

    def test_mode_set(self):
        lattice = LatticeSpec(4)
        modes = OWModeSet.build(AlphaField.uniform(lattice, 1.5), n_shell=1)
        assert len(modes) == 4 * lattice.n_cells
        assert modes.get(5, Orbital.B, Band.UPPER).center == lattice.site_coords(5)
        assert len(modes.band_modes(Band.LOWER)) == 2 * lattice.n_cells


def assert_same_momentum(k, target, atol=1e-4):
    d = np.angle(np.exp(1j * (np.asarray(k) - np.asarray(target))))
    assert np.all(np.abs(d) < atol), (k, target)


class TestFormFactors:

    def test_zero_locations(self):
        zeros = form_factor_zeros(LatticeSpec(8), Orbital.A, Band.LOWER, 1.5)
        assert len(zeros) == 1
        assert_same_momentum(zeros[0], (np.pi / 3, 0.0))

    def test_orbitals_vanish_at_distinct_momenta(self):
        lattice = LatticeSpec(8)
        za = form_factor_zeros(lattice, Orbital.A, Band.LOWER, 1.5)
        zb = form_factor_zeros(lattice, Orbital.B, Band.LOWER, 1.5)
        assert len(zb) == 1
        assert_same_momentum(zb[0], (-np.pi / 3, 0.0))
        assert not np.allclose(za[0], zb[0], atol=1e-2)

    def test_trivial_phase_has_no_zeros(self):
        assert form_factor_zeros(LatticeSpec(8), Orbital.A, Band.LOWER, 3.0) == []

    def test_form_factor_normalization(self):
        lattice = LatticeSpec(16)
        kx, ky = lattice.momenta()
        values = [abs(form_factor((a, b), Orbital.A, Band.UPPER, 1.5, grid_size=16)) ** 2
                  for a, b in zip(kx.ravel(), ky.ravel())]
        assert np.mean(values) == pytest.approx(1.0, rel=1e-10)

    def test_band_overlaps_sum_to_tau_norm(self):
        k = LatticeSpec(6).momenta()
        total = band_overlap(k, DEFAULT_TAU[0], Band.UPPER, 1.5) + band_overlap(k, DEFAULT_TAU[0], Band.LOWER, 1.5)
        np.testing.assert_allclose(total, 1.0, atol=1e-14)

    def test_overcomplete_rank(self):
        lattice = LatticeSpec(8)
        modes = OWModeSet.build(AlphaField.uniform(lattice, 1.0))
        assert overcomplete_rank(modes, Band.LOWER, (Orbital.A,)) == lattice.n_cells - 1
        assert overcomplete_rank(modes, Band.LOWER) == lattice.n_cells
